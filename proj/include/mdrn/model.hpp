#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mdrn/autograd.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/ops.hpp"
#include "mdrn/rng.hpp"

namespace mdrn {

/// Architecture hyperparameters. Defaults give the full-size grayscale network.
struct ModelConfig {
    std::int64_t in_channels = 1;
    std::int64_t channels = 64;
    std::int64_t num_msabs = 8;
    std::int64_t levels = 3;
    /// Level-0 reconstruction nodes whose activations are exposed as
    /// supervision taps (1-based node index on the finest level).
    std::vector<std::int64_t> tap_indices{1, 2, 3};

    void validate() const {
        if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
        if (channels < 2 || channels % 2 != 0) {
            throw ConfigError("model.channels must be even and >= 2 (the block splits channels in half)");
        }
        if (num_msabs < 1) throw ConfigError("model.num_msabs must be >= 1");
        if (levels < 1) throw ConfigError("model.levels must be >= 1");
        if (tap_indices.empty()) throw ConfigError("model.tap_indices must name at least one node");
        std::int64_t prev = 0;
        for (std::int64_t t : tap_indices) {
            if (t < 1 || t > levels) {
                throw ConfigError("model.tap_indices entry " + std::to_string(t) + " outside [1, " +
                                  std::to_string(levels) + "]");
            }
            if (t <= prev) throw ConfigError("model.tap_indices must be strictly increasing");
            prev = t;
        }
    }

    /// Input spatial dims must be divisible by this for the grid to align.
    std::int64_t spatial_multiple() const { return std::int64_t(1) << levels; }
};

template <class T>
struct NamedParam {
    std::string name;
    Var<T> var;
};

namespace detail {

template <class T>
Tensor<T> normal_tensor(Shape s, double std, RngStream& rng) {
    Tensor<T> t(s);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.normal() * std);
    return t;
}

inline RngStream init_stream(std::uint64_t seed, const std::string& name) {
    return RngStream::derive(seed, {RngStream::hash_label("init"), RngStream::hash_label(name)});
}

}  // namespace detail

template <class T>
struct Conv2d {
    Var<T> weight;  // (Co, Ci, K, K)
    Var<T> bias;    // (1, Co, 1, 1)
    std::int64_t stride = 1;
    std::int64_t dilation = 1;
    std::int64_t padding = 0;
    bool activated = false;

    static Conv2d make(std::int64_t ci, std::int64_t co, std::int64_t k, std::int64_t stride, std::int64_t dilation,
                       std::int64_t padding, bool activated, std::uint64_t seed, const std::string& name,
                       std::vector<NamedParam<T>>& reg) {
        Conv2d m;
        m.stride = stride;
        m.dilation = dilation;
        m.padding = padding;
        m.activated = activated;
        auto rng = detail::init_stream(seed, name);
        const double std = std::sqrt(2.0 / static_cast<double>(ci * k * k));
        m.weight = Var<T>(detail::normal_tensor<T>({co, ci, k, k}, std, rng), true);
        m.bias = Var<T>(Tensor<T>(1, co, 1, 1), true);
        reg.push_back({name + ".weight", m.weight});
        reg.push_back({name + ".bias", m.bias});
        return m;
    }

    Var<T> operator()(const Var<T>& x) const {
        auto y = conv2d(x, weight, bias, stride, dilation, padding);
        return activated ? relu(y) : y;
    }
};

template <class T>
struct ConvTranspose2d {
    Var<T> weight;  // (Ci, Co, K, K)
    Var<T> bias;    // (1, Co, 1, 1)
    std::int64_t stride = 2;
    bool activated = true;

    static ConvTranspose2d make(std::int64_t ci, std::int64_t co, std::int64_t k, std::int64_t stride, bool activated,
                                std::uint64_t seed, const std::string& name, std::vector<NamedParam<T>>& reg) {
        ConvTranspose2d m;
        m.stride = stride;
        m.activated = activated;
        auto rng = detail::init_stream(seed, name);
        const double std = std::sqrt(2.0 / static_cast<double>(ci));
        m.weight = Var<T>(detail::normal_tensor<T>({ci, co, k, k}, std, rng), true);
        m.bias = Var<T>(Tensor<T>(1, co, 1, 1), true);
        reg.push_back({name + ".weight", m.weight});
        reg.push_back({name + ".bias", m.bias});
        return m;
    }

    Var<T> operator()(const Var<T>& x) const {
        auto y = conv_transpose2d(x, weight, bias, stride);
        return activated ? relu(y) : y;
    }
};

/// Two-branch block: 1x1 remap, split halves through parallel 3x3 convs with
/// dilations 1 and 2, shuffle the halves back together, 1x1 linear merge,
/// residual add of the block input.
template <class T>
struct Msab {
    Conv2d<T> conv1;
    Conv2d<T> branch_d1;
    Conv2d<T> branch_d2;
    Conv2d<T> fuse;
    std::int64_t half = 0;

    static Msab make(std::int64_t c, std::uint64_t seed, const std::string& name, std::vector<NamedParam<T>>& reg) {
        Msab m;
        m.half = c / 2;
        m.conv1 = Conv2d<T>::make(c, c, 1, 1, 1, 0, true, seed, name + ".conv1", reg);
        m.branch_d1 = Conv2d<T>::make(m.half, m.half, 3, 1, 1, 1, true, seed, name + ".branch_d1", reg);
        m.branch_d2 = Conv2d<T>::make(m.half, m.half, 3, 1, 2, 2, true, seed, name + ".branch_d2", reg);
        m.fuse = Conv2d<T>::make(c, c, 1, 1, 1, 0, false, seed, name + ".fuse", reg);
        return m;
    }

    Var<T> operator()(const Var<T>& x) const {
        auto h = conv1(x);
        auto a = branch_d1(slice_channels(h, 0, half));
        auto b = branch_d2(slice_channels(h, half, half));
        auto mixed = channel_shuffle(concat_channels<T>({a, b}), 2);
        return add(fuse(mixed), x);
    }
};

/// Attention group: concat inputs, 1x1 linear fusion down to C, a chain of
/// Msab blocks, then a long skip adding the fused projection back.
template <class T>
struct Msag {
    Conv2d<T> fuse_in;
    std::vector<Msab<T>> blocks;

    static Msag make(std::int64_t fan_in, std::int64_t c, std::int64_t num_blocks, std::uint64_t seed,
                     const std::string& name, std::vector<NamedParam<T>>& reg) {
        Msag m;
        m.fuse_in = Conv2d<T>::make(fan_in * c, c, 1, 1, 1, 0, false, seed, name + ".fuse", reg);
        m.blocks.reserve(static_cast<std::size_t>(num_blocks));
        for (std::int64_t k = 0; k < num_blocks; ++k) {
            m.blocks.push_back(Msab<T>::make(c, seed, name + ".msab." + std::to_string(k), reg));
        }
        return m;
    }

    Var<T> operator()(const std::vector<Var<T>>& inputs) const {
        auto fused = fuse_in(concat_channels(inputs));
        auto h = fused;
        for (const auto& blk : blocks) h = blk(h);
        return add(h, fused);
    }
};

/// The denoising network: a triangular grid of Msag nodes. Column 0 is the
/// encoder path (strided 2x2 convs between levels); node (j, i>=1) rebuilds
/// detail from every earlier node on its level plus a 2x upsampling of node
/// (j+1, i-1). The finest-level chain ends in a 3x3 tail conv whose output is
/// added to the network input.
template <class T>
class Network {
public:
    struct ForwardTrace {
        Var<T> output;
        std::vector<Var<T>> taps;  // level-0 nodes listed in tap_indices, in order
    };

    struct NodeDesc {
        std::int64_t level = 0;
        std::int64_t index = 0;
        std::int64_t fan_in = 0;  // tensors concatenated at the node's fusion conv
    };

    Network(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const std::int64_t L = cfg_.levels;
        const std::int64_t C = cfg_.channels;
        head_ = Conv2d<T>::make(cfg_.in_channels, C, 3, 1, 1, 1, true, seed, "head", params_);
        downs_.clear();
        for (std::int64_t j = 1; j <= L; ++j) {
            downs_.push_back(Conv2d<T>::make(C, C, 2, 2, 1, 0, true, seed, "down." + std::to_string(j), params_));
        }
        nodes_.resize(static_cast<std::size_t>(L + 1));
        ups_.resize(static_cast<std::size_t>(L + 1));
        for (std::int64_t j = 0; j <= L; ++j) {
            const std::string lvl = std::to_string(j);
            for (std::int64_t i = 0; i <= L - j; ++i) {
                const std::string tag = "node." + lvl + "." + std::to_string(i);
                if (i >= 1) {
                    ups_[static_cast<std::size_t>(j)].push_back(ConvTranspose2d<T>::make(
                        C, C, 2, 2, true, seed, "up." + lvl + "." + std::to_string(i), params_));
                }
                const std::int64_t fan = (i == 0) ? 1 : i + 1;
                nodes_[static_cast<std::size_t>(j)].push_back(
                    Msag<T>::make(fan, C, cfg_.num_msabs, seed, tag, params_));
            }
        }
        tail_ = Conv2d<T>::make(C, cfg_.in_channels, 3, 1, 1, 1, false, seed, "tail", params_);
    }

    const ModelConfig& config() const { return cfg_; }

    ForwardTrace forward(const Var<T>& y) const {
        const Shape s = y.shape();
        if (s.c != cfg_.in_channels) {
            throw std::invalid_argument("forward: input has " + std::to_string(s.c) + " channels, model expects " +
                                        std::to_string(cfg_.in_channels));
        }
        const std::int64_t m = cfg_.spatial_multiple();
        if (s.h % m != 0 || s.w % m != 0) {
            throw std::invalid_argument("forward: spatial dims " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                        " not divisible by " + std::to_string(m));
        }
        ++forward_count_;
        const std::int64_t L = cfg_.levels;
        std::vector<std::vector<Var<T>>> x(static_cast<std::size_t>(L + 1));
        for (std::int64_t j = 0; j <= L; ++j) x[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(L - j + 1));

        x[0][0] = node(0, 0)({head_(y)});
        for (std::int64_t j = 1; j <= L; ++j) {
            x[static_cast<std::size_t>(j)][0] = node(j, 0)({downs_[static_cast<std::size_t>(j - 1)](
                x[static_cast<std::size_t>(j - 1)][0])});
        }
        for (std::int64_t i = 1; i <= L; ++i) {
            for (std::int64_t j = 0; j <= L - i; ++j) {
                std::vector<Var<T>> in;
                in.reserve(static_cast<std::size_t>(i + 1));
                for (std::int64_t k = 0; k < i; ++k) in.push_back(x[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
                in.push_back(ups_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i - 1)](
                    x[static_cast<std::size_t>(j + 1)][static_cast<std::size_t>(i - 1)]));
                x[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = node(j, i)(in);
            }
        }

        ForwardTrace tr;
        tr.output = add(y, tail_(x[0][static_cast<std::size_t>(L)]));
        tr.taps.reserve(cfg_.tap_indices.size());
        for (std::int64_t t : cfg_.tap_indices) tr.taps.push_back(x[0][static_cast<std::size_t>(t)]);
        return tr;
    }

    Var<T> operator()(const Var<T>& y) const { return forward(y).output; }

    std::vector<NamedParam<T>>& parameters() { return params_; }
    const std::vector<NamedParam<T>>& parameters() const { return params_; }

    std::int64_t count_parameters() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += p.var.value().size();
        return n;
    }

    void freeze() {
        for (auto& p : params_) p.var.set_requires_grad(false);
    }

    void zero_grad() {
        for (auto& p : params_) p.var.zero_grad();
    }

    /// Copy values from a same-architecture network (names and shapes must match).
    void copy_parameters_from(const Network& other) {
        if (params_.size() != other.params_.size()) {
            throw ConfigError("copy_parameters_from: parameter lists differ in length");
        }
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& src = other.params_[i];
            auto& dst = params_[i];
            if (dst.name != src.name || !(dst.var.shape() == src.var.shape())) {
                throw ConfigError("copy_parameters_from: mismatch at " + dst.name + " vs " + src.name);
            }
            dst.var.value() = src.var.value();
        }
    }

    std::int64_t forward_count() const { return forward_count_; }
    void reset_forward_count() const { forward_count_ = 0; }

    std::vector<NodeDesc> node_grid() const {
        std::vector<NodeDesc> out;
        for (std::int64_t j = 0; j <= cfg_.levels; ++j) {
            for (std::int64_t i = 0; i <= cfg_.levels - j; ++i) {
                out.push_back({j, i, (i == 0) ? 1 : i + 1});
            }
        }
        return out;
    }

private:
    const Msag<T>& node(std::int64_t j, std::int64_t i) const {
        return nodes_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }

    ModelConfig cfg_;
    Conv2d<T> head_, tail_;
    std::vector<Conv2d<T>> downs_;
    std::vector<std::vector<Msag<T>>> nodes_;
    std::vector<std::vector<ConvTranspose2d<T>>> ups_;
    std::vector<NamedParam<T>> params_;
    mutable std::int64_t forward_count_ = 0;
};

}  // namespace mdrn
