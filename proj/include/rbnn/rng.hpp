#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rbnn {

// splitmix64 finalizer; spreads a small seed into independent stream seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b) ^ mix64(c)); }

// Uniform double in [0,1) from the top 53 bits of the raw engine output.
// std::uniform_real_distribution is implementation-defined, which would break
// the bit-reproducibility contract across toolchains; mt19937_64's raw stream
// is fully specified, so we build distributions by hand on top of it.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Unbiased integer in [0, n) by rejection.
inline uint64_t uniform_index(std::mt19937_64& g, uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return x % n;
}

// Fisher-Yates with the explicit bounded draw above (std::shuffle is
// implementation-defined as well).
template <typename T>
void shuffle_values(std::vector<T>& v, std::mt19937_64& g) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_index(g, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace rbnn
