#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace rbnn::kernels {

// Abstract operation tally. The sign-product kernels report one shift and one
// add per synapse touched and must never report (or perform) a multiply; the
// outer-product kernel reports one multiply and one add per entry. Counting is
// off by default and is enabled by tests and the metrics module.
struct OpCounts {
    uint64_t adds = 0;
    uint64_t shifts = 0;
    uint64_t multiplies = 0;
};

OpCounts& op_counts();
void reset_op_counts();
void set_op_counting(bool on);
bool op_counting();

// One entry per implementation variant. All lane-blocked kernels take the
// input block transposed ("xt": element (j, lane) at xt[j*nlane + lane]) and
// write the output block in the same layout ("y": element (i, lane) at
// y[i*nlane + lane]), so layer outputs feed the next layer directly.
//
// Every variant must be bit-identical to the scalar reference. That holds by
// construction: lanes are distinct output elements, and per output element
// the accumulation order is fixed (ascending j / ascending i / ascending
// example), so no variant ever reassociates a floating-point sum.
struct Kernels {
    const char* name;

    // y[i,lane] = sum_j (bit ? +1 : -1) * xt[j,lane]
    void (*sign_matvec_blk)(const uint8_t* bits, size_t rows, size_t cols,
                            const double* xt, size_t nlane, double* y);

    // y[j] = sum_i (bit ? +1 : -1) * g[i]
    void (*sign_matvec_t)(const uint8_t* bits, size_t rows, size_t cols,
                          const double* g, double* y);

    // G[i,j] += sum_e gs[e][i] * as[e][j], e ascending per entry,
    // each term contributing one multiply and one add.
    void (*outer_acc_rank)(double* g_accum, size_t rows, size_t cols,
                           const double* const* gs, const double* const* as,
                           size_t nvec);

    // Fixed-point variant: int32 inputs, exact int64 accumulation.
    void (*sign_matvec_blk_i64)(const uint8_t* bits, size_t rows, size_t cols,
                                const int32_t* xt, size_t nlane, int64_t* y);
};

const Kernels& scalar_kernels();
bool avx2_available();
const Kernels* avx2_kernels();  // nullptr when not compiled in

// Active table: AVX2 when the CPU supports it, otherwise scalar. The
// RBNN_KERNELS environment variable ("scalar" | "avx2" | "auto") or
// force_kernels() overrides the choice; forcing "avx2" on an unsupported
// CPU throws.
const Kernels& active_kernels();
void force_kernels(const std::string& name);

}  // namespace rbnn::kernels
