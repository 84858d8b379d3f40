#include "rbnn/linalg.hpp"

#include <bit>
#include <stdexcept>

#include "rbnn/fixedpoint.hpp"
#include "rbnn/kernels.hpp"

namespace rbnn {

size_t SignMatrix::count_positive() const {
    size_t used = rows * cols;
    size_t n = 0;
    for (size_t b = 0; b < bits.size(); ++b) {
        uint8_t byte = bits[b];
        if ((b + 1) * 8 > used) byte &= static_cast<uint8_t>((1u << (used - b * 8)) - 1);
        n += static_cast<size_t>(std::popcount(byte));
    }
    return n;
}

SignMatrix binarize_matrix(const IntMatrix& raws) {
    SignMatrix s(raws.rows, raws.cols);
    for (size_t i = 0; i < raws.rows; ++i)
        for (size_t j = 0; j < raws.cols; ++j)
            s.set(i, j, binarize_raw(raws.at(i, j)));
    return s;
}

Matrix dense(const SignMatrix& s) {
    Matrix m(s.rows, s.cols);
    for (size_t i = 0; i < s.rows; ++i)
        for (size_t j = 0; j < s.cols; ++j) m.at(i, j) = static_cast<double>(s.get(i, j));
    return m;
}

std::vector<double> matvec_sign(const SignMatrix& w, std::span<const double> x) {
    if (w.cols != x.size())
        throw std::invalid_argument("matvec_sign: dimension mismatch (" +
                                    std::to_string(w.cols) + " cols vs vector of " +
                                    std::to_string(x.size()) + ")");
    std::vector<double> y(w.rows);
    kernels::active_kernels().sign_matvec_blk(w.bits.data(), w.rows, w.cols, x.data(), 1,
                                              y.data());
    return y;
}

std::vector<double> matvec_sign_transpose(const SignMatrix& w, std::span<const double> g) {
    if (w.rows != g.size())
        throw std::invalid_argument("matvec_sign_transpose: dimension mismatch (" +
                                    std::to_string(w.rows) + " rows vs vector of " +
                                    std::to_string(g.size()) + ")");
    std::vector<double> y(w.cols);
    kernels::active_kernels().sign_matvec_t(w.bits.data(), w.rows, w.cols, g.data(),
                                            y.data());
    return y;
}

void outer_accumulate(Matrix& g_accum, std::span<const double> g, std::span<const double> a) {
    if (g_accum.rows != g.size() || g_accum.cols != a.size())
        throw std::invalid_argument("outer_accumulate: dimension mismatch");
    const double* gp = g.data();
    const double* ap = a.data();
    kernels::active_kernels().outer_acc_rank(g_accum.data.data(), g_accum.rows,
                                             g_accum.cols, &gp, &ap, 1);
}

Matrix outer(std::span<const double> g, std::span<const double> a) {
    Matrix m(g.size(), a.size());
    outer_accumulate(m, g, a);
    return m;
}

}  // namespace rbnn
