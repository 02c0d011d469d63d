#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "mdrn/tensor.hpp"

namespace mdrn {

/// Peak signal-to-noise ratio in dB. Identical images give +infinity
/// (rendered as "inf" in text reports).
template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("psnr: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    double mse = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

inline std::string format_db(double v, int decimals = 4) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

namespace detail {

/// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
inline const double* ssim_window() {
    static const auto w = [] {
        std::array<double, 121> win{};
        double sum = 0;
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x) {
                const double dy = y - 5, dx = x - 5;
                win[static_cast<std::size_t>(y * 11 + x)] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
                sum += win[static_cast<std::size_t>(y * 11 + x)];
            }
        for (auto& v : win) v /= sum;
        return win;
    }();
    return w.data();
}

}  // namespace detail

/// Structural similarity with the standard 11x11 sigma-1.5 Gaussian window,
/// K1=0.01, K2=0.03, dynamic range 1.0. Windows are evaluated only where they
/// fit entirely inside the image; channels and batch entries are averaged.
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("ssim: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    const Shape s = a.shape();
    if (s.h < 11 || s.w < 11) {
        throw std::invalid_argument("ssim: image " + s.str() + " smaller than the 11x11 window");
    }
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const double* win = detail::ssim_window();
    double total = 0;
    std::int64_t windows = 0;
    for (std::int64_t bi = 0; bi < s.b; ++bi) {
        for (std::int64_t c = 0; c < s.c; ++c) {
            const T* pa = a.data() + (bi * s.c + c) * s.h * s.w;
            const T* pb = b.data() + (bi * s.c + c) * s.h * s.w;
            for (std::int64_t y = 0; y + 11 <= s.h; ++y) {
                for (std::int64_t x = 0; x + 11 <= s.w; ++x) {
                    double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                    for (int wy = 0; wy < 11; ++wy) {
                        const T* ra = pa + (y + wy) * s.w + x;
                        const T* rb = pb + (y + wy) * s.w + x;
                        const double* rw = win + wy * 11;
                        for (int wx = 0; wx < 11; ++wx) {
                            const double va = static_cast<double>(ra[wx]);
                            const double vb = static_cast<double>(rb[wx]);
                            const double wgt = rw[wx];
                            ma += wgt * va;
                            mb += wgt * vb;
                            saa += wgt * va * va;
                            sbb += wgt * vb * vb;
                            sab += wgt * va * vb;
                        }
                    }
                    const double va = saa - ma * ma;
                    const double vb = sbb - mb * mb;
                    const double cov = sab - ma * mb;
                    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    ++windows;
                }
            }
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace mdrn
