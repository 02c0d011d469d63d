#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mdrn/model.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a fixed parameter registry. Moment buffers are exposed so a
/// checkpoint can persist and restore the full optimizer state.
template <typename T>
class Adam {
public:
    struct Slot {
        Tensor<T> m;
        Tensor<T> v;
    };

    explicit Adam(std::vector<NamedParam<T>> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        slots_.reserve(params_.size());
        for (const auto& p : params_) {
            const Shape& s = p.var.value().shape();
            slots_.push_back(Slot{Tensor<T>(s), Tensor<T>(s)});
        }
    }

    /// One update using the gradients currently stored on the parameters.
    void step(double lr) {
        if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("adam: lr must be positive and finite");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& value = params_[i].var.value();
            const auto& grad = params_[i].var.grad();
            auto& m = slots_[i].m.vec();
            auto& v = slots_[i].v.vec();
            const auto& g = grad.vec();
            auto& w = value.vec();
            for (std::size_t k = 0; k < w.size(); ++k) {
                const double gk = static_cast<double>(g[k]);
                m[k] = static_cast<T>(cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk);
                v[k] = static_cast<T>(cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk);
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                w[k] = static_cast<T>(w[k] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.var.zero_grad();
    }

    const std::vector<NamedParam<T>>& params() const { return params_; }
    const AdamConfig& config() const { return cfg_; }

    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) {
        if (t < 0) throw std::invalid_argument("adam: step count must be non-negative");
        t_ = t;
    }

    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    std::vector<NamedParam<T>> params_;
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace mdrn
