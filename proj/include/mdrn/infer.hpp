#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "mdrn/autograd.hpp"
#include "mdrn/dihedral.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/model.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

namespace detail {

/// Symmetric reflection of i into [0, n); the edge sample is not repeated
/// at the fold, so padding never duplicates the border row.
inline std::int64_t mirror_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace detail

/// Extends the bottom/right borders by mirror reflection.
template <typename T>
Tensor<T> reflect_pad_bottom_right(const Tensor<T>& x, std::int64_t ph, std::int64_t pw) {
    if (ph < 0 || pw < 0) throw std::invalid_argument("reflect_pad: negative padding");
    if (ph == 0 && pw == 0) return x;
    Tensor<T> out(x.b(), x.c(), x.h() + ph, x.w() + pw);
    for (std::int64_t b = 0; b < x.b(); ++b) {
        for (std::int64_t c = 0; c < x.c(); ++c) {
            for (std::int64_t y = 0; y < out.h(); ++y) {
                const std::int64_t sy = detail::mirror_index(y, x.h());
                for (std::int64_t w = 0; w < out.w(); ++w) {
                    out.at(b, c, y, w) = x.at(b, c, sy, detail::mirror_index(w, x.w()));
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_top_left(const Tensor<T>& x, std::int64_t h, std::int64_t w) {
    if (h < 1 || w < 1 || h > x.h() || w > x.w()) throw std::invalid_argument("crop: target exceeds source");
    if (h == x.h() && w == x.w()) return x;
    Tensor<T> out(x.b(), x.c(), h, w);
    for (std::int64_t b = 0; b < x.b(); ++b) {
        for (std::int64_t c = 0; c < x.c(); ++c) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t ww = 0; ww < w; ++ww) out.at(b, c, y, ww) = x.at(b, c, y, ww);
            }
        }
    }
    return out;
}

namespace detail {

/// Pad-forward-crop without the output clip; shared by single-pass and
/// ensemble paths so averaging happens on raw float values.
template <typename T>
Tensor<T> denoise_core(const Network<T>& model, const Tensor<T>& noisy) {
    const ModelConfig& cfg = model.config();
    if (noisy.c() != cfg.in_channels) {
        throw ConfigError("denoise: image has " + std::to_string(noisy.c()) + " channels, model expects " +
                          std::to_string(cfg.in_channels));
    }
    if (noisy.h() < 8 || noisy.w() < 8) throw std::invalid_argument("denoise: image must be at least 8x8");
    const std::int64_t m = cfg.spatial_multiple();
    const std::int64_t ph = (m - noisy.h() % m) % m;
    const std::int64_t pw = (m - noisy.w() % m) % m;
    const Var<T> in(reflect_pad_bottom_right(noisy, ph, pw), false);
    Tensor<T> out = model(in).value();
    if (ph != 0 || pw != 0) out = crop_top_left(out, noisy.h(), noisy.w());
    return out;
}

}  // namespace detail

/// Whole-image restoration. Pads to the model's spatial multiple, crops
/// back, and clips to [0,1]; nothing upstream of this call clips.
template <typename T>
Tensor<T> denoise_image(const Network<T>& model, const Tensor<T>& noisy) {
    return clamp01(detail::denoise_core(model, noisy));
}

/// Geometric self-ensemble: run every dihedral variant of the image through
/// the model, undo each transform, and average. Exactly eight forwards.
template <typename T>
Tensor<T> self_ensemble_denoise(const Network<T>& model, const Tensor<T>& noisy) {
    Tensor<T> acc;
    for (std::int64_t idx = 0; idx < kDihedralCount; ++idx) {
        const Tensor<T> branch =
            invert_dihedral(detail::denoise_core(model, apply_dihedral(noisy, idx)), idx);
        if (acc.empty()) {
            acc = branch;
        } else {
            for (std::size_t k = 0; k < acc.vec().size(); ++k) acc.vec()[k] += branch.vec()[k];
        }
    }
    for (auto& v : acc.vec()) v /= static_cast<T>(kDihedralCount);
    return clamp01(acc);
}

}  // namespace mdrn
