#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mdrn/metrics.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/rng.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

namespace detail {

/// Catmull-Rom family cubic with a = -0.5.
inline double cubic_keys(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

struct ResampleTap {
    std::int64_t first = 0;       // source index of w[0], later taps follow consecutively
    std::vector<double> w;
};

/// Per-output-coordinate taps for one axis, edge-replicating. When the axis
/// shrinks, the kernel is stretched by the inverse ratio (antialiased
/// downsampling, the convention of common image resizers); upsampling uses
/// the plain 4-tap kernel. Weights are normalized to sum exactly 1.
inline std::vector<ResampleTap> resample_taps(std::int64_t in, std::int64_t out) {
    std::vector<ResampleTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(out) / static_cast<double>(in);
    const double stretch = scale < 1.0 ? 1.0 / scale : 1.0;
    const double support = 2.0 * stretch;
    for (std::int64_t o = 0; o < out; ++o) {
        const double src = (static_cast<double>(o) + 0.5) / scale - 0.5;
        const std::int64_t lo = static_cast<std::int64_t>(std::ceil(src - support));
        const std::int64_t hi = static_cast<std::int64_t>(std::floor(src + support));
        auto& t = taps[static_cast<std::size_t>(o)];
        t.first = lo;
        t.w.resize(static_cast<std::size_t>(hi - lo + 1));
        double sum = 0;
        for (std::int64_t p = lo; p <= hi; ++p) {
            const double w = cubic_keys((src - static_cast<double>(p)) / stretch);
            t.w[static_cast<std::size_t>(p - lo)] = w;
            sum += w;
        }
        for (auto& w : t.w) w /= sum;
    }
    return taps;
}

inline std::int64_t clamp_index(std::int64_t i, std::int64_t n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

}  // namespace detail

/// Separable bicubic resample to explicit output dims (Keys kernel a=-0.5,
/// edge-replicating boundaries).
template <class T>
Tensor<T> bicubic_resize_to(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic: output dims must be positive");
    const Shape s = x.shape();
    if (out_h == s.h && out_w == s.w) return x;
    const auto tx = detail::resample_taps(s.w, out_w);
    const auto ty = detail::resample_taps(s.h, out_h);

    Tensor<T> mid(s.b, s.c, s.h, out_w);
    for (std::int64_t b = 0; b < s.b; ++b)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.h; ++y) {
                const T* row = x.data() + ((b * s.c + c) * s.h + y) * s.w;
                T* dst = mid.data() + ((b * s.c + c) * s.h + y) * out_w;
                for (std::int64_t o = 0; o < out_w; ++o) {
                    const auto& t = tx[static_cast<std::size_t>(o)];
                    double acc = 0;
                    for (std::size_t k = 0; k < t.w.size(); ++k) {
                        acc += t.w[k] * row[detail::clamp_index(t.first + static_cast<std::int64_t>(k), s.w)];
                    }
                    dst[o] = static_cast<T>(acc);
                }
            }

    Tensor<T> out(s.b, s.c, out_h, out_w);
    for (std::int64_t b = 0; b < s.b; ++b)
        for (std::int64_t c = 0; c < s.c; ++c) {
            const T* plane = mid.data() + (b * s.c + c) * s.h * out_w;
            T* dplane = out.data() + (b * s.c + c) * out_h * out_w;
            for (std::int64_t o = 0; o < out_h; ++o) {
                const auto& t = ty[static_cast<std::size_t>(o)];
                T* dst = dplane + o * out_w;
                for (std::int64_t xo = 0; xo < out_w; ++xo) {
                    double acc = 0;
                    for (std::size_t k = 0; k < t.w.size(); ++k) {
                        acc += t.w[k] * plane[detail::clamp_index(t.first + static_cast<std::int64_t>(k), s.h) * out_w + xo];
                    }
                    dst[xo] = static_cast<T>(acc);
                }
            }
        }
    return out;
}

/// Scale-factor entry point. Allowed factors: 1, 2, 3, 4 and their
/// reciprocals; output dims round to nearest (at least 1).
template <class T>
Tensor<T> bicubic_resize(const Tensor<T>& x, double scale) {
    bool ok = false;
    for (double base : {1.0, 2.0, 3.0, 4.0}) {
        if (std::abs(scale - base) < 1e-9 || std::abs(scale - 1.0 / base) < 1e-9) ok = true;
    }
    if (!ok) throw std::invalid_argument("bicubic scale must be one of 1, 2, 3, 4, 1/2, 1/3, 1/4");
    if (std::abs(scale - 1.0) < 1e-9) return x;
    const Shape s = x.shape();
    const auto dim = [scale](std::int64_t d) {
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(static_cast<double>(d) * scale)));
    };
    return bicubic_resize_to(x, dim(s.h), dim(s.w));
}

/// Down-by-s then back up to the original dims.
template <class T>
Tensor<T> bicubic_roundtrip(const Tensor<T>& x, std::int64_t s) {
    if (s < 2 || s > 4) throw std::invalid_argument("roundtrip scale must be 2, 3 or 4");
    auto down = bicubic_resize(x, 1.0 / static_cast<double>(s));
    return bicubic_resize_to(down, x.shape().h, x.shape().w);
}

struct RoundtripRow {
    std::int64_t scale = 0;
    double psnr_noisy = 0;
    double psnr_roundtrip = 0;
};

/// For each scale: corrupt the clean image, push the noisy image down and
/// back up, and report both PSNRs against the clean reference. Larger scales
/// strip more noise at the cost of more blur.
template <class T>
std::vector<RoundtripRow> degradation_roundtrip_report(const Tensor<T>& clean, const NoiseSpec& spec,
                                                       const std::vector<std::int64_t>& scales, RngStream& rng) {
    std::vector<RoundtripRow> rows;
    const Tensor<T> noisy = add_awgn(clean, spec, rng);
    const double base = psnr(noisy, clean);
    for (std::int64_t s : scales) {
        RoundtripRow r;
        r.scale = s;
        r.psnr_noisy = base;
        r.psnr_roundtrip = psnr(bicubic_roundtrip(noisy, s), clean);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace mdrn
