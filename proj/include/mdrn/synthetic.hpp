#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mdrn/bicubic.hpp"
#include "mdrn/rng.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

/// Procedural stand-in for a natural photograph: multi-octave smooth value
/// noise for texture, a slow illumination gradient, and a few soft-edged
/// plateaus so the image has both low- and high-frequency structure.
/// Values land in [0.05, 0.95].
inline Tensor<double> synthetic_natural_image(std::int64_t h, std::int64_t w, std::uint64_t seed,
                                              std::int64_t channels = 1) {
    if (h < 8 || w < 8) throw std::invalid_argument("synthetic image dims must be at least 8");
    if (channels != 1 && channels != 3) throw std::invalid_argument("synthetic image channels must be 1 or 3");
    auto rng = RngStream::derive(seed, {RngStream::hash_label("synthetic")});

    Tensor<double> luma(1, 1, h, w);
    // Texture octaves: coarse random grids blown up with the image resampler.
    double amp = 1.0;
    for (int oct = 0; oct < 4; ++oct) {
        const std::int64_t gh = std::max<std::int64_t>(2, h >> (5 - oct));
        const std::int64_t gw = std::max<std::int64_t>(2, w >> (5 - oct));
        Tensor<double> grid(1, 1, gh, gw);
        for (std::int64_t i = 0; i < grid.size(); ++i) grid[i] = rng.uniform() - 0.5;
        const auto up = bicubic_resize_to(grid, h, w);
        for (std::int64_t i = 0; i < luma.size(); ++i) luma[i] += amp * up[i];
        amp *= 0.55;
    }
    // Illumination ramp across a random direction.
    const double ang = rng.uniform() * 6.283185307179586;
    const double gx = std::cos(ang), gy = std::sin(ang);
    const double gstr = 0.3 + 0.4 * rng.uniform();
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const double u = (static_cast<double>(x) / static_cast<double>(w - 1) - 0.5) * gx +
                             (static_cast<double>(y) / static_cast<double>(h - 1) - 0.5) * gy;
            luma.at(0, 0, y, x) += gstr * u;
        }
    // Soft-edged plateaus: half-plane sigmoids give photographic edges.
    const int edges = 3;
    for (int e = 0; e < edges; ++e) {
        const double ea = rng.uniform() * 6.283185307179586;
        const double ex = std::cos(ea), ey = std::sin(ea);
        const double off = (rng.uniform() - 0.5) * 0.8;
        const double sharp = 12.0 + 36.0 * rng.uniform();
        const double height = (rng.uniform() - 0.5) * 0.9;
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                const double u = (static_cast<double>(x) / static_cast<double>(w - 1) - 0.5) * ex +
                                 (static_cast<double>(y) / static_cast<double>(h - 1) - 0.5) * ey - off;
                luma.at(0, 0, y, x) += height / (1.0 + std::exp(-sharp * u));
            }
    }
    // Normalize into [0.05, 0.95].
    double lo = luma[0], hi = luma[0];
    for (std::int64_t i = 0; i < luma.size(); ++i) {
        lo = std::min(lo, luma[i]);
        hi = std::max(hi, luma[i]);
    }
    const double span = std::max(hi - lo, 1e-12);
    for (std::int64_t i = 0; i < luma.size(); ++i) {
        luma[i] = std::clamp(0.05 + 0.9 * (luma[i] - lo) / span, 0.05, 0.95);
    }
    if (channels == 1) return luma;

    // Color: tint the luma with two more smooth fields, keep channels in range.
    Tensor<double> img(1, 3, h, w);
    Tensor<double> ca(1, 1, std::max<std::int64_t>(2, h / 16), std::max<std::int64_t>(2, w / 16));
    Tensor<double> cb(ca.shape());
    for (std::int64_t i = 0; i < ca.size(); ++i) ca[i] = rng.uniform() - 0.5;
    for (std::int64_t i = 0; i < cb.size(); ++i) cb[i] = rng.uniform() - 0.5;
    const auto ua = bicubic_resize_to(ca, h, w);
    const auto ub = bicubic_resize_to(cb, h, w);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const double l = luma.at(0, 0, y, x);
            const double a = 0.18 * ua.at(0, 0, y, x);
            const double b = 0.18 * ub.at(0, 0, y, x);
            img.at(0, 0, y, x) = std::clamp(l + a, 0.02, 0.98);
            img.at(0, 1, y, x) = std::clamp(l - 0.5 * a - 0.5 * b, 0.02, 0.98);
            img.at(0, 2, y, x) = std::clamp(l + b, 0.02, 0.98);
        }
    return img;
}

}  // namespace mdrn
