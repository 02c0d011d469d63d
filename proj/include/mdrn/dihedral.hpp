#pragma once

#include <stdexcept>

#include "mdrn/tensor.hpp"

namespace mdrn {

/// The 8 symmetries of the square, indexed 0..7 as
/// (rotations-by-90-clockwise r = idx % 4, then horizontal flip if idx >= 4).
inline constexpr int kDihedralCount = 8;

namespace detail {

template <class T>
Tensor<T> rot90cw(const Tensor<T>& x) {
    const Shape s = x.shape();
    Tensor<T> out(s.b, s.c, s.w, s.h);
    for (std::int64_t b = 0; b < s.b; ++b)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.w; ++y)
                for (std::int64_t x2 = 0; x2 < s.h; ++x2) out.at(b, c, y, x2) = x.at(b, c, s.h - 1 - x2, y);
    return out;
}

template <class T>
Tensor<T> fliph(const Tensor<T>& x) {
    const Shape s = x.shape();
    Tensor<T> out(s);
    for (std::int64_t b = 0; b < s.b; ++b)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t x2 = 0; x2 < s.w; ++x2) out.at(b, c, y, x2) = x.at(b, c, y, s.w - 1 - x2);
    return out;
}

}  // namespace detail

template <class T>
Tensor<T> apply_dihedral(const Tensor<T>& x, int idx) {
    if (idx < 0 || idx >= kDihedralCount) throw std::invalid_argument("dihedral index must be 0..7");
    Tensor<T> out = x;
    for (int r = 0; r < idx % 4; ++r) out = detail::rot90cw(out);
    if (idx >= 4) out = detail::fliph(out);
    return out;
}

/// Exact inverse: apply_dihedral then invert_dihedral is the identity.
template <class T>
Tensor<T> invert_dihedral(const Tensor<T>& x, int idx) {
    if (idx < 0 || idx >= kDihedralCount) throw std::invalid_argument("dihedral index must be 0..7");
    Tensor<T> out = x;
    if (idx >= 4) out = detail::fliph(out);
    for (int r = 0; r < (4 - idx % 4) % 4; ++r) out = detail::rot90cw(out);
    return out;
}

}  // namespace mdrn
