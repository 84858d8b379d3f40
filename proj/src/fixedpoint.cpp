#include "rbnn/fixedpoint.hpp"

#include <cassert>

namespace rbnn {

int32_t narrow_raw(int32_t raw, QFormat from, QFormat to) {
    assert(from.valid() && to.valid());
    assert(to.frac_bits <= from.frac_bits);
    const int shift = from.frac_bits - to.frac_bits;
    int64_t r = static_cast<int64_t>(raw) >> shift;
    if (r < to.raw_min()) r = to.raw_min();
    if (r > to.raw_max()) r = to.raw_max();
    return static_cast<int32_t>(r);
}

FixedValue narrow(FixedValue v, QFormat q2) {
    return FixedValue{narrow_raw(v.raw, v.format, q2), q2};
}

}  // namespace rbnn
