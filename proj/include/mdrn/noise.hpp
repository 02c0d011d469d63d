#pragma once

#include <stdexcept>

#include "mdrn/rng.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

/// Gaussian noise level on the conventional 0..255 intensity scale.
struct NoiseSpec {
    double sigma = 25.0;

    void validate() const {
        if (sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
    }

    double std01() const { return sigma / 255.0; }
};

/// y = x + g, g ~ N(0, (sigma/255)^2) i.i.d. The result is NOT clipped;
/// clipping happens only when an image is finally written out.
template <class T>
Tensor<T> add_awgn(const Tensor<T>& x, const NoiseSpec& spec, RngStream& rng) {
    spec.validate();
    Tensor<T> y = x;
    const double s = spec.std01();
    if (s == 0.0) return y;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] += static_cast<T>(rng.normal() * s);
    return y;
}

}  // namespace mdrn
