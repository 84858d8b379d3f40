#pragma once

#include <cmath>
#include <cstdint>

namespace rbnn {

// Two's-complement fixed-point format with frac_bits fractional bits.
// Every weight format is Q1.f (one sign/integer bit), range [-1, 1 - 2^-f].
struct QFormat {
    int total_bits = 16;
    int frac_bits = 15;

    bool valid() const {
        return total_bits >= 2 && total_bits <= 32 && frac_bits >= 0 &&
               frac_bits < total_bits;
    }
    int64_t raw_min() const { return -(int64_t{1} << (total_bits - 1)); }
    int64_t raw_max() const { return (int64_t{1} << (total_bits - 1)) - 1; }
    double step() const { return std::ldexp(1.0, -frac_bits); }
    double real_min() const { return std::ldexp(static_cast<double>(raw_min()), -frac_bits); }
    double real_max() const { return std::ldexp(static_cast<double>(raw_max()), -frac_bits); }

    bool operator==(const QFormat&) const = default;
};

// Weight storage format for a given bit budget: Q1.(bits-1).
inline QFormat weight_format(int total_bits) { return QFormat{total_bits, total_bits - 1}; }

// Wide intermediate format used by the fixed compute backend for activations
// and gradients: 32 bits with 24 fractional bits (Q8.24).
inline QFormat intermediate_format() { return QFormat{32, 24}; }

struct FixedValue {
    int32_t raw = 0;
    QFormat format;

    double real() const { return std::ldexp(static_cast<double>(raw), -format.frac_bits); }
    bool operator==(const FixedValue&) const = default;
};

// True when sign-extending the low total_bits of raw reproduces raw.
inline bool fits(int64_t raw, QFormat q) {
    return raw >= q.raw_min() && raw <= q.raw_max();
}

// Raw-level quantization: floor(x * 2^f) clamped to the representable range.
// Truncation toward -inf is the decimation rule used everywhere; the source
// material never fixes the rounding direction for negative values, so this
// follows the arithmetic-shift reading (documented in the README).
inline int32_t quantize_raw(double x, QFormat q) {
    double scaled = std::floor(std::ldexp(x, q.frac_bits));
    if (std::isnan(scaled)) scaled = 0.0;
    const double lo = static_cast<double>(q.raw_min());
    const double hi = static_cast<double>(q.raw_max());
    if (scaled < lo) scaled = lo;
    if (scaled > hi) scaled = hi;
    return static_cast<int32_t>(scaled);
}

inline FixedValue quantize(double x, QFormat q) { return FixedValue{quantize_raw(x, q), q}; }

// Drop (v.f - q2.f) least-significant bits by arithmetic right shift, then
// saturate to q2's range. Requires q2.frac_bits <= v.format.frac_bits.
int32_t narrow_raw(int32_t raw, QFormat from, QFormat to);
FixedValue narrow(FixedValue v, QFormat q2);

// Sign of the stored value: -1 if raw < 0, else +1 (zero keeps its two's-
// complement sign bit of 0, i.e. maps to +1).
inline int binarize_raw(int32_t raw) { return raw < 0 ? -1 : +1; }
inline int binarize(FixedValue v) { return binarize_raw(v.raw); }

// Saturating fixed-point update: quantize(real(w) + delta) in w's own format.
inline int32_t saturating_update_raw(int32_t raw, double delta, QFormat q) {
    return quantize_raw(std::ldexp(static_cast<double>(raw), -q.frac_bits) + delta, q);
}

inline FixedValue saturating_update(FixedValue w, double delta) {
    return FixedValue{saturating_update_raw(w.raw, delta, w.format), w.format};
}

}  // namespace rbnn
