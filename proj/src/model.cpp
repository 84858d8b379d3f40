#include "rbnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rbnn/errors.hpp"
#include "rbnn/kernels.hpp"
#include "rbnn/rng.hpp"

namespace rbnn {

namespace {

constexpr double kTanhOptScale = 1.7159;
constexpr double kTanhOptSlope = 2.0 / 3.0;

IntMatrix init_layer(size_t rows, size_t cols, QFormat fmt, std::mt19937_64& g) {
    const double r = std::sqrt(6.0 / (static_cast<double>(cols) + static_cast<double>(rows)));
    IntMatrix w(rows, cols);
    for (size_t i = 0; i < w.data.size(); ++i)
        w.data[i] = quantize_raw(uniform_range(g, -r, r), fmt);
    return w;
}

PlasticSubnet make_plastic(uint32_t h0, uint32_t in, uint32_t out, int bits,
                           uint32_t seed, uint32_t recursion) {
    std::mt19937_64 g(mix64(seed, 0x696e6974ull, recursion));  // "init" stream
    PlasticSubnet p;
    p.bits = bits;
    p.w1 = init_layer(h0, in, weight_format(bits), g);
    p.w2 = init_layer(out, h0, weight_format(bits), g);
    return p;
}

}  // namespace

double act_hidden(double x, Activation a) {
    if (a == Activation::tanh_opt) return kTanhOptScale * std::tanh(kTanhOptSlope * x);
    return std::tanh(x);
}

double act_hidden_deriv(double y, Activation a) {
    if (a == Activation::tanh_opt) {
        const double t = y / kTanhOptScale;
        return kTanhOptScale * kTanhOptSlope * (1.0 - t * t);
    }
    return 1.0 - y * y;
}

std::vector<double> softmax(std::span<const double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

Matrix PlasticSubnet::real_w1() const {
    Matrix m(w1.rows, w1.cols);
    const int f = format().frac_bits;
    for (size_t i = 0; i < w1.data.size(); ++i)
        m.data[i] = std::ldexp(static_cast<double>(w1.data[i]), -f);
    return m;
}

Matrix PlasticSubnet::real_w2() const {
    Matrix m(w2.rows, w2.cols);
    const int f = format().frac_bits;
    for (size_t i = 0; i < w2.data.size(); ++i)
        m.data[i] = std::ldexp(static_cast<double>(w2.data[i]), -f);
    return m;
}

RbnnModel new_model(uint32_t h0, int initial_bits, uint32_t seed, uint32_t input_dim,
                    uint32_t output_dim, Activation act) {
    if (h0 < 1) throw ConfigError("initial_hidden must be >= 1");
    if (initial_bits < 2 || initial_bits > 32)
        throw ConfigError("initial_bits must be in 2..32");
    if (input_dim < 1 || output_dim < 2)
        throw ConfigError("model needs input_dim >= 1 and output_dim >= 2");

    RbnnModel m;
    m.h0 = h0;
    m.input_dim = input_dim;
    m.output_dim = output_dim;
    m.seed = seed;
    m.activation = act;
    m.ledger.slot_count =
        uint64_t(input_dim) * h0 + uint64_t(h0) * output_dim;
    m.ledger.initial_bits = static_cast<uint32_t>(initial_bits);
    m.ledger.recursion_index = 0;
    m.ledger.plastic_bits = static_cast<uint32_t>(initial_bits);
    m.plastic = make_plastic(h0, input_dim, output_dim, initial_bits, seed, 0);
    return m;
}

void freeze_and_recycle(RbnnModel& m, int min_plastic_bits) {
    if (!m.plastic) throw BudgetExhausted("freeze_and_recycle: no plastic sub-network");
    const int next_bits = static_cast<int>(m.ledger.plastic_bits) - 1;
    if (next_bits < min_plastic_bits)
        throw BudgetExhausted("budget exhausted: next plastic width " +
                              std::to_string(next_bits) + " bits is below the minimum of " +
                              std::to_string(min_plastic_bits));

    FrozenSubnet fz;
    fz.w1 = binarize_matrix(m.plastic->w1);
    fz.w2 = binarize_matrix(m.plastic->w2);
    m.frozen.push_back(std::move(fz));
    m.ledger.recursion_index += 1;
    m.ledger.plastic_bits -= 1;
    m.plastic = make_plastic(m.h0, m.input_dim, m.output_dim, next_bits, m.seed,
                             m.ledger.recursion_index);
}

void subnet_forward_blk(const SignMatrix& w1, const SignMatrix& w2, Activation act,
                        const double* xt, size_t nlane, double* logits_acc,
                        double* hidden_out) {
    const auto& k = kernels::active_kernels();
    std::vector<double> hbuf;
    double* hidden = hidden_out;
    if (hidden == nullptr) {
        hbuf.resize(w1.rows * nlane);
        hidden = hbuf.data();
    }
    k.sign_matvec_blk(w1.bits.data(), w1.rows, w1.cols, xt, nlane, hidden);
    for (size_t i = 0; i < w1.rows * nlane; ++i) hidden[i] = act_hidden(hidden[i], act);
    std::vector<double> part(w2.rows * nlane);
    k.sign_matvec_blk(w2.bits.data(), w2.rows, w2.cols, hidden, nlane, part.data());
    for (size_t i = 0; i < part.size(); ++i) logits_acc[i] += part[i];
}

void subnet_forward_blk_i64(const SignMatrix& w1, const SignMatrix& w2, Activation act,
                            const int32_t* xt, size_t nlane, int64_t* logits_acc,
                            int32_t* hidden_out) {
    const auto& k = kernels::active_kernels();
    const QFormat q = intermediate_format();
    std::vector<int64_t> acc(w1.rows * nlane);
    k.sign_matvec_blk_i64(w1.bits.data(), w1.rows, w1.cols, xt, nlane, acc.data());

    std::vector<int32_t> hbuf;
    int32_t* hidden = hidden_out;
    if (hidden == nullptr) {
        hbuf.resize(w1.rows * nlane);
        hidden = hbuf.data();
    }
    // Pre-activations saturate into Q8.24, the activation itself is evaluated
    // in wider precision and decimated back.
    for (size_t i = 0; i < acc.size(); ++i) {
        int64_t v = acc[i];
        if (v < q.raw_min()) v = q.raw_min();
        if (v > q.raw_max()) v = q.raw_max();
        const double pre = std::ldexp(static_cast<double>(v), -q.frac_bits);
        hidden[i] = quantize_raw(act_hidden(pre, act), q);
    }
    std::vector<int64_t> part(w2.rows * nlane);
    k.sign_matvec_blk_i64(w2.bits.data(), w2.rows, w2.cols, hidden, nlane, part.data());
    for (size_t i = 0; i < part.size(); ++i) logits_acc[i] += part[i];
}

ForwardResult forward(const RbnnModel& m, std::span<const double> x) {
    if (x.size() != m.input_dim)
        throw std::invalid_argument("forward: input has " + std::to_string(x.size()) +
                                    " values, model expects " + std::to_string(m.input_dim));

    ForwardResult r;
    r.logits.assign(m.output_dim, 0.0);

    auto run_subnet = [&](const SignMatrix& w1, const SignMatrix& w2) {
        std::vector<double> hidden(m.h0);
        std::vector<double> part(m.output_dim, 0.0);
        subnet_forward_blk(w1, w2, m.activation, x.data(), 1, part.data(), hidden.data());
        for (size_t c = 0; c < part.size(); ++c) r.logits[c] += part[c];
        r.hidden.push_back(std::move(hidden));
        r.subnet_logits.push_back(std::move(part));
    };

    for (const FrozenSubnet& fz : m.frozen) run_subnet(fz.w1, fz.w2);
    if (m.plastic)
        run_subnet(binarize_matrix(m.plastic->w1), binarize_matrix(m.plastic->w2));

    r.probs = softmax(r.logits);
    return r;
}

int argmax_lowest(std::span<const double> v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

int predict(const RbnnModel& m, std::span<const double> x) {
    return argmax_lowest(forward(m, x).logits);
}

Matrix batch_logits(const RbnnModel& m, const Matrix& x) {
    if (x.cols != m.input_dim)
        throw std::invalid_argument("batch_logits: dimension mismatch");
    Matrix out(x.rows, m.output_dim);

    SignMatrix p1, p2;
    if (m.plastic) {
        p1 = binarize_matrix(m.plastic->w1);
        p2 = binarize_matrix(m.plastic->w2);
    }

    constexpr size_t kBlock = 4;
    std::vector<double> xt(m.input_dim * kBlock);
    std::vector<double> logits(m.output_dim * kBlock);
    for (size_t r0 = 0; r0 < x.rows; r0 += kBlock) {
        const size_t nlane = std::min(kBlock, x.rows - r0);
        for (size_t j = 0; j < m.input_dim; ++j)
            for (size_t e = 0; e < nlane; ++e) xt[j * nlane + e] = x.at(r0 + e, j);
        std::fill(logits.begin(), logits.begin() + m.output_dim * nlane, 0.0);
        for (const FrozenSubnet& fz : m.frozen)
            subnet_forward_blk(fz.w1, fz.w2, m.activation, xt.data(), nlane, logits.data(),
                               nullptr);
        if (m.plastic)
            subnet_forward_blk(p1, p2, m.activation, xt.data(), nlane, logits.data(),
                               nullptr);
        for (size_t c = 0; c < m.output_dim; ++c)
            for (size_t e = 0; e < nlane; ++e) out.at(r0 + e, c) = logits[c * nlane + e];
    }
    return out;
}

Matrix batch_logits_fixed(const RbnnModel& m, const Matrix& x) {
    if (x.cols != m.input_dim)
        throw std::invalid_argument("batch_logits_fixed: dimension mismatch");
    const QFormat q = intermediate_format();
    Matrix out(x.rows, m.output_dim);

    SignMatrix p1, p2;
    if (m.plastic) {
        p1 = binarize_matrix(m.plastic->w1);
        p2 = binarize_matrix(m.plastic->w2);
    }

    constexpr size_t kBlock = 4;
    std::vector<int32_t> xt(m.input_dim * kBlock);
    std::vector<int64_t> logits(m.output_dim * kBlock);
    for (size_t r0 = 0; r0 < x.rows; r0 += kBlock) {
        const size_t nlane = std::min(kBlock, x.rows - r0);
        for (size_t j = 0; j < m.input_dim; ++j)
            for (size_t e = 0; e < nlane; ++e)
                xt[j * nlane + e] = quantize_raw(x.at(r0 + e, j), q);
        std::fill(logits.begin(), logits.begin() + m.output_dim * nlane, int64_t{0});
        for (const FrozenSubnet& fz : m.frozen)
            subnet_forward_blk_i64(fz.w1, fz.w2, m.activation, xt.data(), nlane,
                                   logits.data(), nullptr);
        if (m.plastic)
            subnet_forward_blk_i64(p1, p2, m.activation, xt.data(), nlane, logits.data(),
                                   nullptr);
        // One saturation point for the whole sum, then back to real values.
        for (size_t c = 0; c < m.output_dim; ++c)
            for (size_t e = 0; e < nlane; ++e) {
                int64_t v = logits[c * nlane + e];
                if (v < q.raw_min()) v = q.raw_min();
                if (v > q.raw_max()) v = q.raw_max();
                out.at(r0 + e, c) = std::ldexp(static_cast<double>(v), -q.frac_bits);
            }
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'R', 'B', 'N', 'N'};
constexpr uint8_t kVersion = 0x01;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_i16(std::vector<uint8_t>& out, int16_t v) {
    const uint16_t u = static_cast<uint16_t>(v);
    out.push_back(static_cast<uint8_t>(u));
    out.push_back(static_cast<uint8_t>(u >> 8));
}

struct Reader {
    std::span<const uint8_t> b;
    size_t pos = 0;

    void need(size_t n, const char* what) {
        if (pos + n > b.size())
            throw IoError(std::string("model file truncated while reading ") + what +
                          " at offset " + std::to_string(pos));
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = uint32_t(b[pos]) | (uint32_t(b[pos + 1]) << 8) |
                     (uint32_t(b[pos + 2]) << 16) | (uint32_t(b[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    int16_t i16(const char* what) {
        need(2, what);
        uint16_t v = uint16_t(b[pos]) | (uint16_t(b[pos + 1]) << 8);
        pos += 2;
        return static_cast<int16_t>(v);
    }
    void bytes(uint8_t* dst, size_t n, const char* what) {
        need(n, what);
        std::memcpy(dst, b.data() + pos, n);
        pos += n;
    }
};

}  // namespace

std::vector<uint8_t> serialize(const RbnnModel& m) {
    if (m.plastic && m.ledger.plastic_bits > 16)
        throw IoError("model file format stores plastic raws as 16-bit values; "
                      "plastic width " +
                      std::to_string(m.ledger.plastic_bits) + " does not fit");

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    put_u32(out, m.h0);
    put_u32(out, m.ledger.initial_bits);
    put_u32(out, m.ledger.recursion_index);
    put_u32(out, m.input_dim);
    put_u32(out, m.output_dim);
    put_u32(out, m.plastic ? 1u : 0u);
    put_u32(out, m.seed);
    for (const FrozenSubnet& fz : m.frozen) {
        out.insert(out.end(), fz.w1.bits.begin(), fz.w1.bits.end());
        out.insert(out.end(), fz.w2.bits.begin(), fz.w2.bits.end());
    }
    if (m.plastic) {
        for (int32_t raw : m.plastic->w1.data) put_i16(out, static_cast<int16_t>(raw));
        for (int32_t raw : m.plastic->w2.data) put_i16(out, static_cast<int16_t>(raw));
    }
    return out;
}

RbnnModel deserialize(std::span<const uint8_t> bytes) {
    Reader r{bytes};
    r.need(5, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("model file has bad magic (want \"RBNN\")");
    r.pos = 4;
    const uint8_t version = bytes[r.pos++];
    if (version != kVersion)
        throw IoError("model file version " + std::to_string(version) +
                      " not supported (want 1)");

    RbnnModel m;
    m.h0 = r.u32("h0");
    const uint32_t initial_bits = r.u32("initial_bits");
    const uint32_t recursions = r.u32("recursions");
    m.input_dim = r.u32("input_dim");
    m.output_dim = r.u32("output_dim");
    const uint32_t plastic_present = r.u32("plastic_present");
    m.seed = r.u32("seed");

    if (m.h0 < 1 || initial_bits < 2 || initial_bits > 32 || recursions >= initial_bits ||
        m.input_dim < 1 || m.output_dim < 2 || plastic_present > 1)
        throw IoError("model file header is inconsistent");

    m.ledger.slot_count = uint64_t(m.input_dim) * m.h0 + uint64_t(m.h0) * m.output_dim;
    m.ledger.initial_bits = initial_bits;
    m.ledger.recursion_index = recursions;
    m.ledger.plastic_bits = initial_bits - recursions;

    for (uint32_t s = 0; s < recursions; ++s) {
        FrozenSubnet fz;
        fz.w1 = SignMatrix(m.h0, m.input_dim);
        fz.w2 = SignMatrix(m.output_dim, m.h0);
        r.bytes(fz.w1.bits.data(), fz.w1.bits.size(), "frozen w1 bits");
        r.bytes(fz.w2.bits.data(), fz.w2.bits.size(), "frozen w2 bits");
        m.frozen.push_back(std::move(fz));
    }
    if (plastic_present) {
        PlasticSubnet p;
        p.bits = static_cast<int>(m.ledger.plastic_bits);
        p.w1 = IntMatrix(m.h0, m.input_dim);
        p.w2 = IntMatrix(m.output_dim, m.h0);
        const QFormat fmt = p.format();
        auto read_raws = [&](IntMatrix& w, const char* what) {
            for (int32_t& raw : w.data) {
                raw = r.i16(what);
                if (!fits(raw, fmt))
                    throw IoError(std::string("plastic raw out of range for ") + what +
                                  ": " + std::to_string(raw) + " does not fit " +
                                  std::to_string(fmt.total_bits) + " bits");
            }
        };
        read_raws(p.w1, "plastic w1");
        read_raws(p.w2, "plastic w2");
        m.plastic = std::move(p);
    }
    if (r.pos != bytes.size())
        throw IoError("model file has " + std::to_string(bytes.size() - r.pos) +
                      " trailing bytes");
    return m;
}

void save_model(const RbnnModel& m, const std::string& path) {
    const std::vector<uint8_t> bytes = serialize(m);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError(path + ": write failed");
}

RbnnModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace rbnn
