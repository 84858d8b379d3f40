#include "rbnn/kernels.hpp"

namespace rbnn::kernels {

namespace {

thread_local OpCounts g_counts;
thread_local bool g_counting = false;

inline void tally(uint64_t adds, uint64_t shifts, uint64_t multiplies) {
    if (g_counting) {
        g_counts.adds += adds;
        g_counts.shifts += shifts;
        g_counts.multiplies += multiplies;
    }
}

void sign_matvec_blk_scalar(const uint8_t* bits, size_t rows, size_t cols,
                            const double* xt, size_t nlane, double* y) {
    for (size_t i = 0; i < rows; ++i) {
        double* out = y + i * nlane;
        for (size_t lane = 0; lane < nlane; ++lane) out[lane] = 0.0;
        const size_t base = i * cols;
        for (size_t j = 0; j < cols; ++j) {
            const size_t k = base + j;
            const bool plus = (bits[k >> 3] >> (k & 7)) & 1;
            const double* xv = xt + j * nlane;
            if (plus) {
                for (size_t lane = 0; lane < nlane; ++lane) out[lane] += xv[lane];
            } else {
                for (size_t lane = 0; lane < nlane; ++lane) out[lane] += -xv[lane];
            }
        }
    }
    tally(rows * cols * nlane, rows * cols * nlane, 0);
}

void sign_matvec_t_scalar(const uint8_t* bits, size_t rows, size_t cols,
                          const double* g, double* y) {
    for (size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        const size_t base = i * cols;
        for (size_t j = 0; j < cols; ++j) {
            const size_t k = base + j;
            const bool plus = (bits[k >> 3] >> (k & 7)) & 1;
            y[j] += plus ? gi : -gi;
        }
    }
    tally(rows * cols, rows * cols, 0);
}

void outer_acc_rank_scalar(double* g_accum, size_t rows, size_t cols,
                           const double* const* gs, const double* const* as,
                           size_t nvec) {
    for (size_t i = 0; i < rows; ++i) {
        double* grow = g_accum + i * cols;
        for (size_t j = 0; j < cols; ++j) {
            double acc = grow[j];
            for (size_t e = 0; e < nvec; ++e) acc += gs[e][i] * as[e][j];
            grow[j] = acc;
        }
    }
    tally(rows * cols * nvec, 0, rows * cols * nvec);
}

void sign_matvec_blk_i64_scalar(const uint8_t* bits, size_t rows, size_t cols,
                                const int32_t* xt, size_t nlane, int64_t* y) {
    for (size_t i = 0; i < rows; ++i) {
        int64_t* out = y + i * nlane;
        for (size_t lane = 0; lane < nlane; ++lane) out[lane] = 0;
        const size_t base = i * cols;
        for (size_t j = 0; j < cols; ++j) {
            const size_t k = base + j;
            const bool plus = (bits[k >> 3] >> (k & 7)) & 1;
            const int32_t* xv = xt + j * nlane;
            if (plus) {
                for (size_t lane = 0; lane < nlane; ++lane) out[lane] += xv[lane];
            } else {
                for (size_t lane = 0; lane < nlane; ++lane) out[lane] -= xv[lane];
            }
        }
    }
    tally(rows * cols * nlane, rows * cols * nlane, 0);
}

}  // namespace

OpCounts& op_counts() { return g_counts; }
void reset_op_counts() { g_counts = OpCounts{}; }
void set_op_counting(bool on) { g_counting = on; }
bool op_counting() { return g_counting; }

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar",
        &sign_matvec_blk_scalar,
        &sign_matvec_t_scalar,
        &outer_acc_rank_scalar,
        &sign_matvec_blk_i64_scalar,
    };
    return k;
}

}  // namespace rbnn::kernels
