// AVX2 variants of the inner kernels. This file is compiled with -mavx2 on
// x86-64 and degrades to a stub elsewhere; selection happens at runtime in
// kernels_dispatch.cpp. Lanes are distinct output elements and every per-
// element accumulation runs in the same order as the scalar reference, so the
// results are bit-identical (checked by the equivalence tests).

#include "rbnn/kernels.hpp"

#ifdef __AVX2__

#include <immintrin.h>

#include <algorithm>

namespace rbnn::kernels {

namespace {

constexpr uint64_t kSignBit = 0x8000000000000000ull;

// Nibble -> four per-lane xor masks (bit=1 keeps the value, bit=0 flips sign).
struct NibbleLut {
    alignas(32) uint64_t m[16][4];
    NibbleLut() {
        for (int n = 0; n < 16; ++n)
            for (int l = 0; l < 4; ++l) m[n][l] = ((n >> l) & 1) ? 0 : kSignBit;
    }
};
const NibbleLut g_lut;

inline __m256d flip_mask(uint8_t byte, unsigned bitpos) {
    const uint64_t m = (static_cast<uint64_t>((byte >> bitpos) & 1u) - 1u) & kSignBit;
    return _mm256_castsi256_pd(_mm256_set1_epi64x(static_cast<long long>(m)));
}

void sign_matvec_blk_avx2(const uint8_t* bits, size_t rows, size_t cols,
                          const double* xt, size_t nlane, double* y) {
    if (nlane != 4) {
        scalar_kernels().sign_matvec_blk(bits, rows, cols, xt, nlane, y);
        return;
    }
    for (size_t i = 0; i < rows; ++i) {
        __m256d acc = _mm256_setzero_pd();
        const size_t base = i * cols;
        size_t j = 0;
        // Whole bytes of the packed row first, then the ragged tail.
        while (j < cols) {
            const size_t k = base + j;
            const uint8_t byte = bits[k >> 3];
            const unsigned start = static_cast<unsigned>(k & 7);
            const size_t run = std::min<size_t>(8 - start, cols - j);
            for (unsigned t = 0; t < run; ++t) {
                const __m256d v = _mm256_loadu_pd(xt + (j + t) * 4);
                acc = _mm256_add_pd(acc, _mm256_xor_pd(v, flip_mask(byte, start + t)));
            }
            j += run;
        }
        _mm256_storeu_pd(y + i * 4, acc);
    }
    if (op_counting()) {
        op_counts().adds += rows * cols * nlane;
        op_counts().shifts += rows * cols * nlane;
    }
}

void sign_matvec_t_avx2(const uint8_t* bits, size_t rows, size_t cols,
                        const double* g, double* y) {
    for (size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (size_t i = 0; i < rows; ++i) {
        const __m256d gi = _mm256_set1_pd(g[i]);
        const size_t base = i * cols;
        size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            const size_t k = base + j;
            // Rows are byte-aligned only when cols % 8 == 0; gather the four
            // bits explicitly so any shape works.
            unsigned nib = 0;
            for (unsigned t = 0; t < 4; ++t) {
                const size_t kk = k + t;
                nib |= ((bits[kk >> 3] >> (kk & 7)) & 1u) << t;
            }
            const __m256d mask =
                _mm256_load_pd(reinterpret_cast<const double*>(g_lut.m[nib]));
            const __m256d cur = _mm256_loadu_pd(y + j);
            _mm256_storeu_pd(y + j, _mm256_add_pd(cur, _mm256_xor_pd(gi, mask)));
        }
        for (; j < cols; ++j) {
            const size_t k = base + j;
            const bool plus = (bits[k >> 3] >> (k & 7)) & 1;
            y[j] += plus ? g[i] : -g[i];
        }
    }
    if (op_counting()) {
        op_counts().adds += rows * cols;
        op_counts().shifts += rows * cols;
    }
}

void outer_acc_rank_avx2(double* g_accum, size_t rows, size_t cols,
                         const double* const* gs, const double* const* as,
                         size_t nvec) {
    for (size_t i = 0; i < rows; ++i) {
        double* grow = g_accum + i * cols;
        size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            __m256d acc = _mm256_loadu_pd(grow + j);
            for (size_t e = 0; e < nvec; ++e) {
                const __m256d gv = _mm256_set1_pd(gs[e][i]);
                const __m256d av = _mm256_loadu_pd(as[e] + j);
                acc = _mm256_add_pd(acc, _mm256_mul_pd(gv, av));
            }
            _mm256_storeu_pd(grow + j, acc);
        }
        for (; j < cols; ++j) {
            double acc = grow[j];
            for (size_t e = 0; e < nvec; ++e) acc += gs[e][i] * as[e][j];
            grow[j] = acc;
        }
    }
    if (op_counting()) {
        op_counts().adds += rows * cols * nvec;
        op_counts().multiplies += rows * cols * nvec;
    }
}

void sign_matvec_blk_i64_avx2(const uint8_t* bits, size_t rows, size_t cols,
                              const int32_t* xt, size_t nlane, int64_t* y) {
    if (nlane != 4) {
        scalar_kernels().sign_matvec_blk_i64(bits, rows, cols, xt, nlane, y);
        return;
    }
    for (size_t i = 0; i < rows; ++i) {
        __m256i acc = _mm256_setzero_si256();
        const size_t base = i * cols;
        for (size_t j = 0; j < cols; ++j) {
            const size_t k = base + j;
            const bool plus = (bits[k >> 3] >> (k & 7)) & 1;
            const __m256i v = _mm256_cvtepi32_epi64(
                _mm_loadu_si128(reinterpret_cast<const __m128i*>(xt + j * 4)));
            // (v ^ m) - m negates when m is all-ones; integer adds are exact,
            // so this matches the scalar subtraction bit for bit.
            const __m256i m = _mm256_set1_epi64x(plus ? 0 : -1);
            acc = _mm256_add_epi64(acc, _mm256_sub_epi64(_mm256_xor_si256(v, m), m));
        }
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(y + i * 4), acc);
    }
    if (op_counting()) {
        op_counts().adds += rows * cols * nlane;
        op_counts().shifts += rows * cols * nlane;
    }
}

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels k = {
        "avx2",
        &sign_matvec_blk_avx2,
        &sign_matvec_t_avx2,
        &outer_acc_rank_avx2,
        &sign_matvec_blk_i64_avx2,
    };
    return &k;
}

}  // namespace rbnn::kernels

#else  // !__AVX2__

namespace rbnn::kernels {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace rbnn::kernels

#endif
