#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mdrn/autograd.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;
template <class T>
using CMapM = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
    std::int64_t in_c, in_h, in_w;
    std::int64_t kh, kw;
    std::int64_t stride, dilation, padding;
    std::int64_t out_h, out_w;

    static ConvGeom make(std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh, std::int64_t kw,
                         std::int64_t stride, std::int64_t dilation, std::int64_t padding) {
        ConvGeom g{c, h, w, kh, kw, stride, dilation, padding, 0, 0};
        g.out_h = (h + 2 * padding - dilation * (kh - 1) - 1) / stride + 1;
        g.out_w = (w + 2 * padding - dilation * (kw - 1) - 1) / stride + 1;
        if (g.out_h < 1 || g.out_w < 1) {
            throw std::invalid_argument("conv: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                                        " too small for kernel");
        }
        return g;
    }

    std::int64_t col_rows() const { return in_c * kh * kw; }
    std::int64_t col_cols() const { return out_h * out_w; }
};

/// Unfold one batch item (in_c, in_h, in_w) into a (C*Kh*Kw, Ho*Wo) matrix.
template <class T>
void im2col(const T* x, const ConvGeom& g, RowMat<T>& col) {
    col.resize(g.col_rows(), g.col_cols());
    for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
        const T* xc = x + ci * g.in_h * g.in_w;
        for (std::int64_t kh = 0; kh < g.kh; ++kh) {
            for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                T* row = col.data() + ((ci * g.kh + kh) * g.kw + kw) * g.col_cols();
                for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                    const std::int64_t ih = oh * g.stride - g.padding + kh * g.dilation;
                    T* dst = row + oh * g.out_w;
                    if (ih < 0 || ih >= g.in_h) {
                        for (std::int64_t ow = 0; ow < g.out_w; ++ow) dst[ow] = T(0);
                        continue;
                    }
                    const T* src = xc + ih * g.in_w;
                    for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                        const std::int64_t iw = ow * g.stride - g.padding + kw * g.dilation;
                        dst[ow] = (iw >= 0 && iw < g.in_w) ? src[iw] : T(0);
                    }
                }
            }
        }
    }
}

/// Scatter-add a (C*Kh*Kw, Ho*Wo) matrix back onto one batch item.
template <class T>
void col2im_add(const RowMat<T>& col, const ConvGeom& g, T* x) {
    for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
        T* xc = x + ci * g.in_h * g.in_w;
        for (std::int64_t kh = 0; kh < g.kh; ++kh) {
            for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                const T* row = col.data() + ((ci * g.kh + kh) * g.kw + kw) * g.col_cols();
                for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                    const std::int64_t ih = oh * g.stride - g.padding + kh * g.dilation;
                    if (ih < 0 || ih >= g.in_h) continue;
                    const T* src = row + oh * g.out_w;
                    T* dst = xc + ih * g.in_w;
                    for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                        const std::int64_t iw = ow * g.stride - g.padding + kw * g.dilation;
                        if (iw >= 0 && iw < g.in_w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

inline bool is_pointwise(const ConvGeom& g) {
    return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.padding == 0;
}

}  // namespace detail

/// 2-D convolution. x: (B, Ci, H, W); w: (Co, Ci, Kh, Kw); bias: (1, Co, 1, 1).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride, std::int64_t dilation,
              std::int64_t padding) {
    using detail::ConvGeom;
    using detail::RowMat;
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.c != ws.c) {
        throw ConfigError("conv2d: input has " + std::to_string(xs.c) + " channels but weights expect " +
                          std::to_string(ws.c));
    }
    if (bias.shape().c != ws.b || bias.shape().size() != ws.b) {
        throw ConfigError("conv2d: bias shape " + bias.shape().str() + " does not match " + std::to_string(ws.b) +
                          " output channels");
    }
    const ConvGeom g = ConvGeom::make(xs.c, xs.h, xs.w, ws.h, ws.w, stride, dilation, padding);
    const std::int64_t co = ws.b;

    Tensor<T> out(xs.b, co, g.out_h, g.out_w);
    detail::CMapM<T> wm(w.value().data(), co, g.col_rows());
    RowMat<T> col;
    for (std::int64_t b = 0; b < xs.b; ++b) {
        detail::MapM<T> om(out.data() + b * co * g.col_cols(), co, g.col_cols());
        if (detail::is_pointwise(g)) {
            detail::CMapM<T> xm(x.value().data() + b * g.in_c * g.col_cols(), g.in_c, g.col_cols());
            om.noalias() = wm * xm;
        } else {
            detail::im2col(x.value().data() + b * g.in_c * g.in_h * g.in_w, g, col);
            om.noalias() = wm * col;
        }
        for (std::int64_t c = 0; c < co; ++c) om.row(c).array() += bias.value()[c];
    }

    auto n = detail::make_result<T>(std::move(out), {x, w, bias});
    if (n->requires_grad) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = bias.node();
        n->backward = [xn, wn, bn, g, co](typename Var<T>::Node& node) {
            const std::int64_t batch = node.value.b();
            detail::CMapM<T> wm(wn->value.data(), co, g.col_rows());
            RowMat<T> col, dcol;
            const bool need_dx = xn->requires_grad;
            const bool need_dw = wn->requires_grad;
            const bool need_db = bn->requires_grad;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            if (need_db) bn->ensure_grad();
            detail::MapM<T> dwm(need_dw ? wn->grad.data() : nullptr, need_dw ? co : 0, need_dw ? g.col_rows() : 0);
            for (std::int64_t b = 0; b < batch; ++b) {
                detail::CMapM<T> gm(node.grad.data() + b * co * g.col_cols(), co, g.col_cols());
                if (need_db) {
                    for (std::int64_t c = 0; c < co; ++c) bn->grad[c] += gm.row(c).sum();
                }
                if (detail::is_pointwise(g)) {
                    detail::CMapM<T> xm(xn->value.data() + b * g.in_c * g.col_cols(), g.in_c, g.col_cols());
                    if (need_dw) dwm.noalias() += gm * xm.transpose();
                    if (need_dx) {
                        detail::MapM<T> dxm(xn->grad.data() + b * g.in_c * g.col_cols(), g.in_c, g.col_cols());
                        dxm.noalias() += wm.transpose() * gm;
                    }
                } else {
                    if (need_dw) {
                        detail::im2col(xn->value.data() + b * g.in_c * g.in_h * g.in_w, g, col);
                        dwm.noalias() += gm * col.transpose();
                    }
                    if (need_dx) {
                        dcol.noalias() = wm.transpose() * gm;
                        detail::col2im_add(dcol, g, xn->grad.data() + b * g.in_c * g.in_h * g.in_w);
                    }
                }
            }
        };
    }
    return Var<T>::from_node(n);
}

/// Transposed 2-D convolution (fractionally strided), padding 0.
/// x: (B, Ci, H, W); w: (Ci, Co, Kh, Kw); output (B, Co, (H-1)*s+Kh, (W-1)*s+Kw).
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride) {
    using detail::ConvGeom;
    using detail::RowMat;
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.c != ws.b) {
        throw ConfigError("conv_transpose2d: input has " + std::to_string(xs.c) + " channels but weights expect " +
                          std::to_string(ws.b));
    }
    const std::int64_t co = ws.c;
    if (bias.shape().c != co || bias.shape().size() != co) {
        throw ConfigError("conv_transpose2d: bias shape mismatch");
    }
    const std::int64_t out_h = (xs.h - 1) * stride + ws.h;
    const std::int64_t out_w = (xs.w - 1) * stride + ws.w;
    // Geometry of the conventional conv mapping (Co, out) -> (Ci, in); this op is its input-gradient.
    const ConvGeom g = ConvGeom::make(co, out_h, out_w, ws.h, ws.w, stride, /*dilation=*/1, /*padding=*/0);

    Tensor<T> out(xs.b, co, out_h, out_w);
    detail::CMapM<T> wm(w.value().data(), xs.c, g.col_rows());
    RowMat<T> colbuf;
    for (std::int64_t b = 0; b < xs.b; ++b) {
        detail::CMapM<T> xm(x.value().data() + b * xs.c * xs.h * xs.w, xs.c, xs.h * xs.w);
        colbuf.noalias() = wm.transpose() * xm;
        detail::col2im_add(colbuf, g, out.data() + b * co * out_h * out_w);
        for (std::int64_t c = 0; c < co; ++c) {
            T* oc = out.data() + (b * co + c) * out_h * out_w;
            for (std::int64_t i = 0; i < out_h * out_w; ++i) oc[i] += bias.value()[c];
        }
    }

    auto n = detail::make_result<T>(std::move(out), {x, w, bias});
    if (n->requires_grad) {
        auto xn = x.node();
        auto wn = w.node();
        auto bn = bias.node();
        n->backward = [xn, wn, bn, g, co](typename Var<T>::Node& node) {
            const auto& xs2 = xn->value.shape();
            const std::int64_t batch = node.value.b();
            detail::CMapM<T> wm(wn->value.data(), xs2.c, g.col_rows());
            RowMat<T> dcol;
            const bool need_dx = xn->requires_grad;
            const bool need_dw = wn->requires_grad;
            const bool need_db = bn->requires_grad;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            if (need_db) bn->ensure_grad();
            detail::MapM<T> dwm(need_dw ? wn->grad.data() : nullptr, need_dw ? xs2.c : 0, need_dw ? g.col_rows() : 0);
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* gout = node.grad.data() + b * co * g.in_h * g.in_w;
                if (need_db) {
                    for (std::int64_t c = 0; c < co; ++c) {
                        const T* gc = gout + c * g.in_h * g.in_w;
                        for (std::int64_t i = 0; i < g.in_h * g.in_w; ++i) bn->grad[c] += gc[i];
                    }
                }
                if (need_dx || need_dw) {
                    detail::im2col(gout, g, dcol);
                    if (need_dx) {
                        detail::MapM<T> dxm(xn->grad.data() + b * xs2.c * xs2.h * xs2.w, xs2.c, xs2.h * xs2.w);
                        dxm.noalias() += wm * dcol;
                    }
                    if (need_dw) {
                        detail::CMapM<T> xm(xn->value.data() + b * xs2.c * xs2.h * xs2.w, xs2.c, xs2.h * xs2.w);
                        dwm.noalias() += xm * dcol.transpose();
                    }
                }
            }
        };
    }
    return Var<T>::from_node(n);
}

template <class T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out = x.value();
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
    auto n = detail::make_result<T>(std::move(out), {x});
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward = [xn](typename Var<T>::Node& node) {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < node.grad.size(); ++i) {
                if (xn->value[i] > T(0)) xn->grad[i] += node.grad[i];
            }
        };
    }
    return Var<T>::from_node(n);
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor<T> out = a.value();
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    auto n = detail::make_result<T>(std::move(out), {a, b});
    if (n->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        n->backward = [an, bn](typename Var<T>::Node& node) {
            if (an->requires_grad) detail::accumulate<T>(*an, node.grad);
            if (bn->requires_grad) detail::accumulate<T>(*bn, node.grad);
        };
    }
    return Var<T>::from_node(n);
}

/// Concatenate along the channel axis. All inputs must agree on (B, H, W).
template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Shape s0 = xs[0].shape();
    std::int64_t ctot = 0;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.b != s0.b || s.h != s0.h || s.w != s0.w) {
            throw std::invalid_argument("concat_channels: spatial/batch mismatch " + s.str() + " vs " + s0.str());
        }
        ctot += s.c;
    }
    Tensor<T> out(s0.b, ctot, s0.h, s0.w);
    const std::int64_t hw = s0.h * s0.w;
    std::int64_t coff = 0;
    for (const auto& x : xs) {
        const std::int64_t ci = x.shape().c;
        for (std::int64_t b = 0; b < s0.b; ++b) {
            const T* src = x.value().data() + b * ci * hw;
            T* dst = out.data() + (b * ctot + coff) * hw;
            std::copy(src, src + ci * hw, dst);
        }
        coff += ci;
    }
    auto n = detail::make_result<T>(std::move(out), xs);
    if (n->requires_grad) {
        std::vector<std::shared_ptr<typename Var<T>::Node>> nodes;
        nodes.reserve(xs.size());
        for (const auto& x : xs) nodes.push_back(x.node());
        n->backward = [nodes, ctot, hw](typename Var<T>::Node& node) {
            const std::int64_t batch = node.value.b();
            std::int64_t coff2 = 0;
            for (const auto& xn : nodes) {
                const std::int64_t ci = xn->value.c();
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    for (std::int64_t b = 0; b < batch; ++b) {
                        const T* src = node.grad.data() + (b * ctot + coff2) * hw;
                        T* dst = xn->grad.data() + b * ci * hw;
                        for (std::int64_t i = 0; i < ci * hw; ++i) dst[i] += src[i];
                    }
                }
                coff2 += ci;
            }
        };
    }
    return Var<T>::from_node(n);
}

/// Channel slice [start, start+len).
template <class T>
Var<T> slice_channels(const Var<T>& x, std::int64_t start, std::int64_t len) {
    const Shape s = x.shape();
    if (start < 0 || len < 1 || start + len > s.c) {
        throw std::invalid_argument("slice_channels: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") out of " + std::to_string(s.c) + " channels");
    }
    const std::int64_t hw = s.h * s.w;
    Tensor<T> out(s.b, len, s.h, s.w);
    for (std::int64_t b = 0; b < s.b; ++b) {
        const T* src = x.value().data() + (b * s.c + start) * hw;
        std::copy(src, src + len * hw, out.data() + b * len * hw);
    }
    auto n = detail::make_result<T>(std::move(out), {x});
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward = [xn, start, len, hw](typename Var<T>::Node& node) {
            xn->ensure_grad();
            const std::int64_t batch = node.value.b();
            const std::int64_t c_in = xn->value.c();
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* src = node.grad.data() + b * len * hw;
                T* dst = xn->grad.data() + (b * c_in + start) * hw;
                for (std::int64_t i = 0; i < len * hw; ++i) dst[i] += src[i];
            }
        };
    }
    return Var<T>::from_node(n);
}

/// Permutation used by channel shuffle: output channel o reads input
/// channel (o % groups) * (C/groups) + o / groups.
inline std::vector<std::int64_t> shuffle_permutation(std::int64_t channels, std::int64_t groups) {
    if (groups < 1 || channels % groups != 0) {
        throw std::invalid_argument("channel_shuffle: " + std::to_string(channels) + " channels not divisible by " +
                                    std::to_string(groups) + " groups");
    }
    const std::int64_t per = channels / groups;
    std::vector<std::int64_t> perm(static_cast<std::size_t>(channels));
    for (std::int64_t o = 0; o < channels; ++o) perm[o] = (o % groups) * per + o / groups;
    return perm;
}

/// Pure channel permutation; values untouched.
template <class T>
Var<T> channel_shuffle(const Var<T>& x, std::int64_t groups) {
    const Shape s = x.shape();
    const auto perm = shuffle_permutation(s.c, groups);
    const std::int64_t hw = s.h * s.w;
    Tensor<T> out(s.b, s.c, s.h, s.w);
    for (std::int64_t b = 0; b < s.b; ++b) {
        for (std::int64_t o = 0; o < s.c; ++o) {
            const T* src = x.value().data() + (b * s.c + perm[o]) * hw;
            std::copy(src, src + hw, out.data() + (b * s.c + o) * hw);
        }
    }
    auto n = detail::make_result<T>(std::move(out), {x});
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward = [xn, perm, hw](typename Var<T>::Node& node) {
            xn->ensure_grad();
            const std::int64_t batch = node.value.b();
            const std::int64_t c = xn->value.c();
            for (std::int64_t b = 0; b < batch; ++b) {
                for (std::int64_t o = 0; o < c; ++o) {
                    const T* src = node.grad.data() + (b * c + o) * hw;
                    T* dst = xn->grad.data() + (b * c + perm[o]) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) dst[i] += src[i];
                }
            }
        };
    }
    return Var<T>::from_node(n);
}

/// Mean absolute difference, reduced over all elements. Scalar result.
template <class T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument("mean_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    const std::int64_t count = a.value().size();
    double s = 0;
    for (std::int64_t i = 0; i < count; ++i) s += std::abs(static_cast<double>(a.value()[i]) - static_cast<double>(b.value()[i]));
    auto n = detail::make_result<T>(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(count))), {a, b});
    if (n->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        n->backward = [an, bn, count](typename Var<T>::Node& node) {
            const T g = node.grad[0] / static_cast<T>(count);
            const bool need_a = an->requires_grad;
            const bool need_b = bn->requires_grad;
            if (need_a) an->ensure_grad();
            if (need_b) bn->ensure_grad();
            for (std::int64_t i = 0; i < count; ++i) {
                const T d = an->value[i] - bn->value[i];
                const T sg = d > T(0) ? g : (d < T(0) ? -g : T(0));
                if (need_a) an->grad[i] += sg;
                if (need_b) bn->grad[i] -= sg;
            }
        };
    }
    return Var<T>::from_node(n);
}

/// Sum of scalar Vars.
template <class T>
Var<T> scalar_sum(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("scalar_sum: no inputs");
    double s = 0;
    for (const auto& x : xs) s += static_cast<double>(x.value().item());
    auto n = detail::make_result<T>(Tensor<T>::scalar(static_cast<T>(s)), xs);
    if (n->requires_grad) {
        std::vector<std::shared_ptr<typename Var<T>::Node>> nodes;
        for (const auto& x : xs) nodes.push_back(x.node());
        n->backward = [nodes](typename Var<T>::Node& node) {
            for (const auto& xn : nodes) {
                if (!xn->requires_grad) continue;
                xn->ensure_grad();
                xn->grad[0] += node.grad[0];
            }
        };
    }
    return Var<T>::from_node(n);
}

template <class T>
Var<T> scalar_scale(const Var<T>& x, T k) {
    auto n = detail::make_result<T>(Tensor<T>::scalar(x.value().item() * k), {x});
    if (n->requires_grad) {
        auto xn = x.node();
        n->backward = [xn, k](typename Var<T>::Node& node) {
            xn->ensure_grad();
            xn->grad[0] += node.grad[0] * k;
        };
    }
    return Var<T>::from_node(n);
}

}  // namespace mdrn
