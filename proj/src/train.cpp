#include "rbnn/train.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rbnn/errors.hpp"
#include "rbnn/kernels.hpp"

namespace rbnn {

namespace {

constexpr size_t kBlock = 4;
constexpr double kLogClamp = 1e-12;

struct PassStats {
    size_t errors = 0;
    double loss_sum = 0.0;
    size_t count = 0;
    double error_rate() const { return count ? double(errors) / double(count) : 0.0; }
    double mean_loss() const { return count ? loss_sum / double(count) : 0.0; }
};

void tally_example(PassStats& st, std::span<const double> logits, uint8_t label) {
    const std::vector<double> p = softmax(logits);
    st.loss_sum += -std::log(std::max(p[label], kLogClamp));
    st.errors += argmax_lowest(logits) != int(label) ? 1u : 0u;
    st.count += 1;
}

// Gathers rows r0..r0+nlane of src into the lane-blocked layout.
void transpose_rows(const Matrix& src, size_t r0, size_t nlane, double* xt) {
    for (size_t j = 0; j < src.cols; ++j)
        for (size_t e = 0; e < nlane; ++e) xt[j * nlane + e] = src.at(r0 + e, j);
}

// Dense plastic forward used by BinarizeMode::identity (debug surrogate).
void dense_forward_blk(const Matrix& w1, const Matrix& w2, Activation act,
                       const double* xt, size_t nlane, double* logits_acc,
                       double* hidden_out) {
    for (size_t i = 0; i < w1.rows; ++i) {
        const double* wrow = w1.row(i);
        for (size_t e = 0; e < nlane; ++e) {
            double acc = 0.0;
            for (size_t j = 0; j < w1.cols; ++j) acc += wrow[j] * xt[j * nlane + e];
            hidden_out[i * nlane + e] = act_hidden(acc, act);
        }
    }
    for (size_t c = 0; c < w2.rows; ++c) {
        const double* wrow = w2.row(c);
        for (size_t e = 0; e < nlane; ++e) {
            double acc = 0.0;
            for (size_t j = 0; j < w2.cols; ++j) acc += wrow[j] * hidden_out[j * nlane + e];
            logits_acc[c * nlane + e] += acc;
        }
    }
}

// Adds one frozen sub-network's logit contribution for every row of x.
void accumulate_subnet_logits(const SignMatrix& w1, const SignMatrix& w2, Activation act,
                              const Matrix& x, Matrix& base) {
    std::vector<double> xt(x.cols * kBlock);
    std::vector<double> lblk(base.cols * kBlock);
    for (size_t r0 = 0; r0 < x.rows; r0 += kBlock) {
        const size_t nlane = std::min(kBlock, x.rows - r0);
        transpose_rows(x, r0, nlane, xt.data());
        std::fill(lblk.begin(), lblk.begin() + base.cols * nlane, 0.0);
        subnet_forward_blk(w1, w2, act, xt.data(), nlane, lblk.data(), nullptr);
        for (size_t c = 0; c < base.cols; ++c)
            for (size_t e = 0; e < nlane; ++e) base.at(r0 + e, c) += lblk[c * nlane + e];
    }
}

// Full-batch forward. When `base` is given it must hold the frozen logit
// contributions for the rows named by batch.indices; otherwise the frozen
// sub-networks are evaluated in place.
void batch_forward_real(const RbnnModel& m, const Batch& batch, BinarizeMode bm,
                        const Matrix* base, ForwardCache& out) {
    const size_t n = batch.size();
    const size_t h = m.h0, out_dim = m.output_dim, in = m.input_dim;
    out.hidden = Matrix(n, h);
    out.logits = Matrix(n, out_dim);

    SignMatrix p1, p2;
    Matrix r1, r2;
    if (bm == BinarizeMode::sign) {
        p1 = binarize_matrix(m.plastic->w1);
        p2 = binarize_matrix(m.plastic->w2);
    } else {
        r1 = m.plastic->real_w1();
        r2 = m.plastic->real_w2();
    }

    std::vector<double> xt(in * kBlock), hblk(h * kBlock), lblk(out_dim * kBlock);
    for (size_t r0 = 0; r0 < n; r0 += kBlock) {
        const size_t nlane = std::min(kBlock, n - r0);
        transpose_rows(batch.inputs, r0, nlane, xt.data());
        if (base != nullptr) {
            for (size_t c = 0; c < out_dim; ++c)
                for (size_t e = 0; e < nlane; ++e)
                    lblk[c * nlane + e] = base->at(batch.indices[r0 + e], c);
        } else {
            std::fill(lblk.begin(), lblk.begin() + out_dim * nlane, 0.0);
            for (const FrozenSubnet& fz : m.frozen)
                subnet_forward_blk(fz.w1, fz.w2, m.activation, xt.data(), nlane,
                                   lblk.data(), nullptr);
        }
        if (bm == BinarizeMode::sign)
            subnet_forward_blk(p1, p2, m.activation, xt.data(), nlane, lblk.data(),
                               hblk.data());
        else
            dense_forward_blk(r1, r2, m.activation, xt.data(), nlane, lblk.data(),
                              hblk.data());
        for (size_t i = 0; i < h; ++i)
            for (size_t e = 0; e < nlane; ++e)
                out.hidden.at(r0 + e, i) = hblk[i * nlane + e];
        for (size_t c = 0; c < out_dim; ++c)
            for (size_t e = 0; e < nlane; ++e)
                out.logits.at(r0 + e, c) = lblk[c * nlane + e];
    }
}

}  // namespace

TrainConfig TrainConfig::normalized(int initial_bits) const {
    TrainConfig c = *this;
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (c.min_plastic_bits < 2) throw ConfigError("min_plastic_bits must be >= 2");
    if (initial_bits < 2 || initial_bits > 32)
        throw ConfigError("initial_bits must be in 2..32");
    if (c.max_recursions < 0)
        c.max_recursions = std::max(0, initial_bits - c.min_plastic_bits);
    if (c.mode == RunMode::bnn_baseline) c.max_recursions = 0;
    c.patience = std::min(c.patience, c.max_epochs);
    return c;
}

LossGrad loss_and_output_grad(std::span<const double> probs,
                              std::span<const double> target, uint32_t batch_size) {
    assert(probs.size() == target.size());
    double sum = 0.0;
    for (double p : probs) sum += p;
    assert(std::abs(sum - 1.0) < 1e-6);
    (void)sum;

    LossGrad out;
    out.grad.resize(probs.size());
    const double inv = 1.0 / double(batch_size);
    for (size_t i = 0; i < probs.size(); ++i) {
        if (target[i] != 0.0) out.loss -= target[i] * std::log(std::max(probs[i], kLogClamp));
        out.grad[i] = (probs[i] - target[i]) * inv;
    }
    return out;
}

ForwardCache forward_incremental(const RbnnModel& m, const Batch& batch, BinarizeMode bm) {
    if (!m.plastic)
        throw std::invalid_argument("forward_incremental: model has no plastic sub-network");
    if (batch.inputs.cols != m.input_dim)
        throw std::invalid_argument("forward_incremental: dimension mismatch");
    ForwardCache cache;
    batch_forward_real(m, batch, bm, nullptr, cache);
    return cache;
}

PlasticGradients backward_incremental(const RbnnModel& m, const Batch& batch,
                                      const ForwardCache& cache, BinarizeMode bm) {
    if (!m.plastic)
        throw std::invalid_argument("backward_incremental: model has no plastic sub-network");
    const size_t n = batch.size();
    const size_t h = m.h0, out_dim = m.output_dim, in = m.input_dim;
    assert(cache.hidden.rows == n && cache.logits.rows == n);

    PlasticGradients g;
    g.g1 = Matrix(h, in);
    g.g2 = Matrix(out_dim, h);

    SignMatrix w2b;
    Matrix w2r;
    if (bm == BinarizeMode::sign)
        w2b = binarize_matrix(m.plastic->w2);
    else
        w2r = m.plastic->real_w2();

    const auto& kern = kernels::active_kernels();
    Matrix glog(kBlock, out_dim), ghid(kBlock, h);
    std::vector<double> tbuf(h);
    std::array<const double*, kBlock> gs{}, as{};

    for (size_t r0 = 0; r0 < n; r0 += kBlock) {
        const size_t nlane = std::min(kBlock, n - r0);
        for (size_t e = 0; e < nlane; ++e) {
            const double* lrow = cache.logits.row(r0 + e);
            const std::vector<double> probs = softmax({lrow, out_dim});
            const LossGrad lg = loss_and_output_grad(
                probs, {batch.targets.row(r0 + e), out_dim}, uint32_t(n));
            std::copy(lg.grad.begin(), lg.grad.end(), glog.row(e));
        }
        for (size_t e = 0; e < nlane; ++e) {
            gs[e] = glog.row(e);
            as[e] = cache.hidden.row(r0 + e);
        }
        kern.outer_acc_rank(g.g2.data.data(), out_dim, h, gs.data(), as.data(), nlane);

        for (size_t e = 0; e < nlane; ++e) {
            if (bm == BinarizeMode::sign) {
                kern.sign_matvec_t(w2b.bits.data(), out_dim, h, glog.row(e), tbuf.data());
            } else {
                std::fill(tbuf.begin(), tbuf.end(), 0.0);
                for (size_t i = 0; i < out_dim; ++i) {
                    const double gi = glog.at(e, i);
                    const double* wrow = w2r.row(i);
                    for (size_t j = 0; j < h; ++j) tbuf[j] += wrow[j] * gi;
                }
            }
            const double* hrow = cache.hidden.row(r0 + e);
            for (size_t j = 0; j < h; ++j)
                ghid.at(e, j) = tbuf[j] * act_hidden_deriv(hrow[j], m.activation);
        }
        for (size_t e = 0; e < nlane; ++e) {
            gs[e] = ghid.row(e);
            as[e] = batch.inputs.row(r0 + e);
        }
        kern.outer_acc_rank(g.g1.data.data(), h, in, gs.data(), as.data(), nlane);
    }
    return g;
}

void sgd_step(PlasticSubnet& p, const PlasticGradients& g, double learning_rate) {
    if (g.g1.rows != p.w1.rows || g.g1.cols != p.w1.cols || g.g2.rows != p.w2.rows ||
        g.g2.cols != p.w2.cols)
        throw std::invalid_argument("sgd_step: gradient shape mismatch");
    const QFormat fmt = p.format();
    for (size_t i = 0; i < p.w1.data.size(); ++i)
        p.w1.data[i] =
            saturating_update_raw(p.w1.data[i], -learning_rate * g.g1.data[i], fmt);
    for (size_t i = 0; i < p.w2.data.size(); ++i)
        p.w2.data[i] =
            saturating_update_raw(p.w2.data[i], -learning_rate * g.g2.data[i], fmt);
}

EvalStats evaluate_split(const RbnnModel& m, const Split& split, Backend backend) {
    if (split.size() == 0) throw DataError("evaluate_split: empty example set");
    const Matrix logits = backend == Backend::real ? batch_logits(m, split.x)
                                                   : batch_logits_fixed(m, split.x);
    PassStats st;
    for (size_t r = 0; r < logits.rows; ++r)
        tally_example(st, {logits.row(r), logits.cols}, split.y[r]);
    return EvalStats{st.errors, st.loss_sum, st.count};
}

namespace {

// Shared per-iteration driver: epochs of SGD, per-epoch evaluation, patience,
// and retention of the best-validation plastic weights.
template <typename Engine>
IterationRecord run_iteration(RbnnModel& m, const TrainConfig& cfg, Engine& eng) {
    IterationRecord rec;
    rec.recursion_index = m.ledger.recursion_index;
    rec.plastic_bits = int(m.ledger.plastic_bits);

    size_t best_errors = std::numeric_limits<size_t>::max();
    IntMatrix best_w1, best_w2;
    uint32_t stall = 0;

    for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const PassStats tr = eng.train_epoch(epoch);
        const PassStats va = eng.eval_validation();
        const PassStats te = eng.eval_test();

        EpochStats es;
        es.epoch = epoch;
        es.train_error = tr.error_rate();
        es.train_loss = tr.mean_loss();
        es.val_error = va.error_rate();
        es.val_loss = va.mean_loss();
        es.test_error = te.error_rate();
        es.test_loss = te.mean_loss();
        rec.epochs.push_back(es);

        if (va.errors < best_errors) {
            best_errors = va.errors;
            best_w1 = m.plastic->w1;
            best_w2 = m.plastic->w2;
            rec.best_epoch = epoch;
            rec.best_val_error = es.val_error;
            rec.train_error_at_best = es.train_error;
            rec.test_error_at_best = es.test_error;
            stall = 0;
        } else {
            ++stall;
        }
        if (stall >= cfg.patience) break;
    }

    m.plastic->w1 = std::move(best_w1);
    m.plastic->w2 = std::move(best_w2);
    return rec;
}

class RealEngine {
  public:
    RealEngine(RbnnModel& m, const DataSplit& data, const TrainConfig& cfg)
        : m_(m),
          data_(data),
          cfg_(cfg),
          train_base_(data.train.size(), m.output_dim),
          val_base_(data.validation.size(), m.output_dim),
          test_base_(data.test.size(), m.output_dim) {
        for (const FrozenSubnet& fz : m.frozen) on_freeze(fz);
    }

    void on_freeze(const FrozenSubnet& fz) {
        accumulate_subnet_logits(fz.w1, fz.w2, m_.activation, data_.train.x, train_base_);
        accumulate_subnet_logits(fz.w1, fz.w2, m_.activation, data_.validation.x,
                                 val_base_);
        accumulate_subnet_logits(fz.w1, fz.w2, m_.activation, data_.test.x, test_base_);
    }

    PassStats train_epoch(uint32_t epoch) {
        Batches batches(data_.train, m_.output_dim, cfg_.batch_size, cfg_.seed, epoch,
                        true);
        PassStats st;
        ForwardCache cache;
        for (size_t b = 0; b < batches.count(); ++b) {
            const Batch batch = batches.get(b);
            batch_forward_real(m_, batch, cfg_.binarize_mode, &train_base_, cache);
            for (size_t r = 0; r < batch.size(); ++r)
                tally_example(st, {cache.logits.row(r), m_.output_dim}, batch.labels[r]);
            const PlasticGradients g =
                backward_incremental(m_, batch, cache, cfg_.binarize_mode);
            sgd_step(*m_.plastic, g, cfg_.learning_rate);
        }
        return st;
    }

    PassStats eval_validation() { return eval(data_.validation, val_base_); }
    PassStats eval_test() { return eval(data_.test, test_base_); }

  private:
    // Binarized evaluation on top of the cached frozen logits.
    PassStats eval(const Split& split, const Matrix& base) {
        PassStats st;
        if (split.size() == 0) return st;
        const SignMatrix p1 = binarize_matrix(m_.plastic->w1);
        const SignMatrix p2 = binarize_matrix(m_.plastic->w2);
        const size_t out_dim = m_.output_dim;
        std::vector<double> xt(m_.input_dim * kBlock), lblk(out_dim * kBlock);
        std::vector<double> lrow(out_dim);
        for (size_t r0 = 0; r0 < split.size(); r0 += kBlock) {
            const size_t nlane = std::min(kBlock, split.size() - r0);
            transpose_rows(split.x, r0, nlane, xt.data());
            for (size_t c = 0; c < out_dim; ++c)
                for (size_t e = 0; e < nlane; ++e)
                    lblk[c * nlane + e] = base.at(r0 + e, c);
            subnet_forward_blk(p1, p2, m_.activation, xt.data(), nlane, lblk.data(),
                               nullptr);
            for (size_t e = 0; e < nlane; ++e) {
                for (size_t c = 0; c < out_dim; ++c) lrow[c] = lblk[c * nlane + e];
                tally_example(st, {lrow.data(), out_dim}, split.y[r0 + e]);
            }
        }
        return st;
    }

    RbnnModel& m_;
    const DataSplit& data_;
    TrainConfig cfg_;
    Matrix train_base_, val_base_, test_base_;
};

class FixedEngine {
  public:
    FixedEngine(RbnnModel& m, const DataSplit& data, const TrainConfig& cfg)
        : m_(m),
          data_(data),
          cfg_(cfg),
          q_(intermediate_format()),
          train_xq_(quantize_inputs(data.train.x)),
          val_xq_(quantize_inputs(data.validation.x)),
          test_xq_(quantize_inputs(data.test.x)),
          train_base_(data.train.size() * m.output_dim, 0),
          val_base_(data.validation.size() * m.output_dim, 0),
          test_base_(data.test.size() * m.output_dim, 0) {
        for (const FrozenSubnet& fz : m.frozen) on_freeze(fz);
    }

    void on_freeze(const FrozenSubnet& fz) {
        accumulate_base(fz, train_xq_, train_base_);
        accumulate_base(fz, val_xq_, val_base_);
        accumulate_base(fz, test_xq_, test_base_);
    }

    PassStats train_epoch(uint32_t epoch) {
        Batches batches(data_.train, m_.output_dim, cfg_.batch_size, cfg_.seed, epoch,
                        true);
        PassStats st;
        const size_t h = m_.h0, out_dim = m_.output_dim, in = m_.input_dim;
        std::vector<int64_t> g1acc(h * in), g2acc(out_dim * h);
        std::vector<int32_t> xt(in * kBlock), hblk(h * kBlock);
        std::vector<int64_t> lblk(out_dim * kBlock);
        std::vector<int32_t> glog(out_dim), ghid(h), hvec(h), xvec(in);
        std::vector<double> lrow(out_dim);
        std::vector<int64_t> tacc(h);

        for (size_t b = 0; b < batches.count(); ++b) {
            const Batch batch = batches.get(b);
            const size_t n = batch.size();
            const SignMatrix p1 = binarize_matrix(m_.plastic->w1);
            const SignMatrix p2 = binarize_matrix(m_.plastic->w2);
            std::fill(g1acc.begin(), g1acc.end(), int64_t{0});
            std::fill(g2acc.begin(), g2acc.end(), int64_t{0});

            for (size_t r0 = 0; r0 < n; r0 += kBlock) {
                const size_t nlane = std::min(kBlock, n - r0);
                for (size_t j = 0; j < in; ++j)
                    for (size_t e = 0; e < nlane; ++e)
                        xt[j * nlane + e] = train_xq_.at(batch.indices[r0 + e], j);
                for (size_t c = 0; c < out_dim; ++c)
                    for (size_t e = 0; e < nlane; ++e)
                        lblk[c * nlane + e] =
                            train_base_[size_t(batch.indices[r0 + e]) * out_dim + c];
                subnet_forward_blk_i64(p1, p2, m_.activation, xt.data(), nlane,
                                       lblk.data(), hblk.data());

                for (size_t e = 0; e < nlane; ++e) {
                    for (size_t c = 0; c < out_dim; ++c)
                        lrow[c] = saturated_real(lblk[c * nlane + e]);
                    tally_example(st, {lrow.data(), out_dim}, batch.labels[r0 + e]);

                    const std::vector<double> probs = softmax({lrow.data(), out_dim});
                    for (size_t c = 0; c < out_dim; ++c) {
                        const double t = batch.targets.at(r0 + e, c);
                        glog[c] = quantize_raw((probs[c] - t) / double(n), q_);
                    }
                    for (size_t j = 0; j < h; ++j) hvec[j] = hblk[j * nlane + e];

                    // g2 += glog (x) hidden, exact Q16.48 accumulation
                    for (size_t i = 0; i < out_dim; ++i) {
                        int64_t* grow = g2acc.data() + i * h;
                        const int64_t gi = glog[i];
                        for (size_t j = 0; j < h; ++j) grow[j] += gi * int64_t(hvec[j]);
                    }
                    // hidden gradient through the binarized output layer
                    std::fill(tacc.begin(), tacc.end(), int64_t{0});
                    for (size_t i = 0; i < out_dim; ++i) {
                        const int64_t gi = glog[i];
                        for (size_t j = 0; j < h; ++j)
                            tacc[j] += p2.get(i, j) > 0 ? gi : -gi;
                    }
                    for (size_t j = 0; j < h; ++j) {
                        const double hreal = std::ldexp(double(hvec[j]), -q_.frac_bits);
                        const double t = saturated_real(tacc[j]) *
                                         act_hidden_deriv(hreal, m_.activation);
                        ghid[j] = quantize_raw(t, q_);
                    }
                    for (size_t j = 0; j < in; ++j)
                        xvec[j] = train_xq_.at(batch.indices[r0 + e], j);
                    for (size_t i = 0; i < h; ++i) {
                        int64_t* grow = g1acc.data() + i * in;
                        const int64_t gi = ghid[i];
                        for (size_t j = 0; j < in; ++j) grow[j] += gi * int64_t(xvec[j]);
                    }
                }
            }
            apply_update(m_.plastic->w1, g1acc);
            apply_update(m_.plastic->w2, g2acc);
        }
        return st;
    }

    PassStats eval_validation() { return eval(data_.validation, val_xq_, val_base_); }
    PassStats eval_test() { return eval(data_.test, test_xq_, test_base_); }

  private:
    IntMatrix quantize_inputs(const Matrix& x) const {
        IntMatrix out(x.rows, x.cols);
        for (size_t i = 0; i < x.data.size(); ++i)
            out.data[i] = quantize_raw(x.data[i], q_);
        return out;
    }

    double saturated_real(int64_t raw) const {
        if (raw < q_.raw_min()) raw = q_.raw_min();
        if (raw > q_.raw_max()) raw = q_.raw_max();
        return std::ldexp(double(raw), -q_.frac_bits);
    }

    void accumulate_base(const FrozenSubnet& fz, const IntMatrix& xq,
                         std::vector<int64_t>& base) {
        const size_t out_dim = m_.output_dim;
        std::vector<int32_t> xt(xq.cols * kBlock);
        std::vector<int64_t> lblk(out_dim * kBlock);
        for (size_t r0 = 0; r0 < xq.rows; r0 += kBlock) {
            const size_t nlane = std::min(kBlock, xq.rows - r0);
            for (size_t j = 0; j < xq.cols; ++j)
                for (size_t e = 0; e < nlane; ++e) xt[j * nlane + e] = xq.at(r0 + e, j);
            std::fill(lblk.begin(), lblk.begin() + out_dim * nlane, int64_t{0});
            subnet_forward_blk_i64(fz.w1, fz.w2, m_.activation, xt.data(), nlane,
                                   lblk.data(), nullptr);
            for (size_t c = 0; c < out_dim; ++c)
                for (size_t e = 0; e < nlane; ++e)
                    base[(r0 + e) * out_dim + c] += lblk[c * nlane + e];
        }
    }

    // Batch gradient: narrow the exact Q16.48 sum to the Q8.24 intermediate
    // format by decimation, then apply the saturating weight update.
    void apply_update(IntMatrix& w, const std::vector<int64_t>& acc) {
        const QFormat fmt = m_.plastic->format();
        for (size_t i = 0; i < w.data.size(); ++i) {
            int64_t g = acc[i] >> q_.frac_bits;  // Q16.48 -> Q8.24 (arithmetic shift)
            if (g < q_.raw_min()) g = q_.raw_min();
            if (g > q_.raw_max()) g = q_.raw_max();
            const double delta =
                -cfg_.learning_rate * std::ldexp(double(g), -q_.frac_bits);
            w.data[i] = saturating_update_raw(w.data[i], delta, fmt);
        }
    }

    PassStats eval(const Split& split, const IntMatrix& xq, const std::vector<int64_t>& base) {
        PassStats st;
        if (split.size() == 0) return st;
        const SignMatrix p1 = binarize_matrix(m_.plastic->w1);
        const SignMatrix p2 = binarize_matrix(m_.plastic->w2);
        const size_t out_dim = m_.output_dim;
        std::vector<int32_t> xt(xq.cols * kBlock);
        std::vector<int64_t> lblk(out_dim * kBlock);
        std::vector<double> lrow(out_dim);
        for (size_t r0 = 0; r0 < split.size(); r0 += kBlock) {
            const size_t nlane = std::min(kBlock, split.size() - r0);
            for (size_t j = 0; j < xq.cols; ++j)
                for (size_t e = 0; e < nlane; ++e) xt[j * nlane + e] = xq.at(r0 + e, j);
            for (size_t c = 0; c < out_dim; ++c)
                for (size_t e = 0; e < nlane; ++e)
                    lblk[c * nlane + e] = base[(r0 + e) * out_dim + c];
            subnet_forward_blk_i64(p1, p2, m_.activation, xt.data(), nlane, lblk.data(),
                                   nullptr);
            for (size_t e = 0; e < nlane; ++e) {
                for (size_t c = 0; c < out_dim; ++c)
                    lrow[c] = saturated_real(lblk[c * nlane + e]);
                tally_example(st, {lrow.data(), out_dim}, split.y[r0 + e]);
            }
        }
        return st;
    }

    RbnnModel& m_;
    const DataSplit& data_;
    TrainConfig cfg_;
    QFormat q_;
    IntMatrix train_xq_, val_xq_, test_xq_;
    std::vector<int64_t> train_base_, val_base_, test_base_;
};

uint32_t class_count(const DataSplit& data) {
    uint8_t mx = 0;
    for (uint8_t y : data.train.y) mx = std::max(mx, y);
    for (uint8_t y : data.validation.y) mx = std::max(mx, y);
    for (uint8_t y : data.test.y) mx = std::max(mx, y);
    return std::max<uint32_t>(uint32_t(mx) + 1, 2);
}

template <typename Engine>
RunResult run_recursive_impl(const DataSplit& data, uint32_t h0, int initial_bits,
                             const TrainConfig& cfg, Activation activation,
                             bool verbose) {
    RunResult out;
    RbnnModel m = new_model(h0, initial_bits, cfg.seed, uint32_t(data.train.x.cols),
                            class_count(data), activation);
    Engine eng(m, data, cfg);
    std::vector<RbnnModel> snapshots;

    for (;;) {
        IterationRecord rec = run_iteration(m, cfg, eng);
        out.records.push_back(rec);
        snapshots.push_back(m);
        if (verbose) {
            std::printf(
                "iteration %u: plastic_bits=%d epochs=%zu best_val=%.4f "
                "(epoch %u) test@best=%.4f\n",
                rec.recursion_index, rec.plastic_bits, rec.epochs.size(),
                rec.best_val_error, rec.best_epoch, rec.test_error_at_best);
            std::fflush(stdout);
        }

        const size_t k = m.ledger.recursion_index;
        const bool under_cap = int(k) < cfg.max_recursions;
        const bool bits_left =
            int(m.ledger.plastic_bits) - 1 >= cfg.min_plastic_bits;
        const bool improved =
            out.records.size() < 2 ||
            rec.best_val_error < out.records[out.records.size() - 2].best_val_error;
        if (!under_cap || !bits_left || (cfg.plateau_stop && !improved)) break;

        freeze_and_recycle(m, cfg.min_plastic_bits);
        eng.on_freeze(m.frozen.back());
    }

    out.best_iteration = 0;
    for (size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].best_val_error < out.records[out.best_iteration].best_val_error)
            out.best_iteration = i;
    out.model = std::move(snapshots[out.best_iteration]);
    return out;
}

}  // namespace

IterationRecord train_iteration(RbnnModel& m, const DataSplit& data,
                                const TrainConfig& raw_cfg) {
    if (!m.plastic) throw ConfigError("train_iteration: model has no plastic sub-network");
    const TrainConfig cfg = raw_cfg.normalized(int(m.ledger.initial_bits));
    if (data.train.size() == 0) throw DataError("train_iteration: empty training split");
    if (data.validation.size() == 0)
        throw DataError("train_iteration: empty validation split");
    if (cfg.backend == Backend::real) {
        RealEngine eng(m, data, cfg);
        return run_iteration(m, cfg, eng);
    }
    FixedEngine eng(m, data, cfg);
    return run_iteration(m, cfg, eng);
}

RunResult run_recursive(const DataSplit& data, uint32_t h0, int initial_bits,
                        const TrainConfig& raw_cfg, Activation activation,
                        bool verbose) {
    const TrainConfig cfg = raw_cfg.normalized(initial_bits);
    if (data.train.size() == 0) throw DataError("run_recursive: empty training split");
    if (data.validation.size() == 0)
        throw DataError("run_recursive: empty validation split");
    if (cfg.backend == Backend::real)
        return run_recursive_impl<RealEngine>(data, h0, initial_bits, cfg, activation,
                                              verbose);
    return run_recursive_impl<FixedEngine>(data, h0, initial_bits, cfg, activation,
                                           verbose);
}

}  // namespace rbnn
