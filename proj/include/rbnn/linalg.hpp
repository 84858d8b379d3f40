#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rbnn {

// Dense row-major matrix of doubles.
struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }
    void fill(double v) { data.assign(data.size(), v); }

    bool operator==(const Matrix&) const = default;
};

// Dense row-major matrix of fixed-point raws (format tracked by the owner).
struct IntMatrix {
    size_t rows = 0, cols = 0;
    std::vector<int32_t> data;

    IntMatrix() = default;
    IntMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0) {}

    int32_t& at(size_t i, size_t j) { return data[i * cols + j]; }
    int32_t at(size_t i, size_t j) const { return data[i * cols + j]; }
    int32_t* row(size_t i) { return data.data() + i * cols; }
    const int32_t* row(size_t i) const { return data.data() + i * cols; }

    bool operator==(const IntMatrix&) const = default;
};

// Packed +/-1 matrix: row-major, LSB-first within each byte, bit=1 means +1.
// The packing order matches the model file format so kernels can run directly
// on loaded bytes.
struct SignMatrix {
    size_t rows = 0, cols = 0;
    std::vector<uint8_t> bits;

    SignMatrix() = default;
    SignMatrix(size_t r, size_t c) : rows(r), cols(c), bits((r * c + 7) / 8, 0) {}

    int get(size_t i, size_t j) const {
        size_t k = i * cols + j;
        return ((bits[k >> 3] >> (k & 7)) & 1) ? +1 : -1;
    }
    void set(size_t i, size_t j, int sign) {
        size_t k = i * cols + j;
        uint8_t m = static_cast<uint8_t>(1u << (k & 7));
        if (sign >= 0)
            bits[k >> 3] |= m;
        else
            bits[k >> 3] &= static_cast<uint8_t>(~m);
    }
    size_t count_positive() const;

    bool operator==(const SignMatrix&) const = default;
};

// Entrywise signs of a raw matrix (zero maps to +1).
SignMatrix binarize_matrix(const IntMatrix& raws);

// Expand to a dense +/-1 matrix (test oracles, inspection).
Matrix dense(const SignMatrix& s);

// y_i = sum_j s_ij * x_j, evaluated as conditional add/subtract only.
// Accumulation is strict left-to-right in j for every output element.
std::vector<double> matvec_sign(const SignMatrix& w, std::span<const double> x);

// y_j = sum_i s_ij * g_i (transpose product), ascending i per output element.
std::vector<double> matvec_sign_transpose(const SignMatrix& w, std::span<const double> g);

// Rank-1 product G_ij = g_i * a_j.
Matrix outer(std::span<const double> g, std::span<const double> a);

// G += g (x) a, one multiply and one add per entry.
void outer_accumulate(Matrix& g_accum, std::span<const double> g, std::span<const double> a);

}  // namespace rbnn
