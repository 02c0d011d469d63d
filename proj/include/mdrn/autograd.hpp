#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mdrn/tensor.hpp"

namespace mdrn {

/// Reverse-mode automatic differentiation over a dynamically built tape.
///
/// A Var is a shared handle to a graph node holding a value, an optional
/// gradient, and a backward closure that scatters the node's gradient into
/// its inputs. Graphs are one-shot: build, call backward() on a scalar
/// root, read leaf gradients. Nodes that do not require gradients record
/// neither inputs nor a backward closure, so frozen networks (teachers)
/// evaluate without retaining any graph.
template <class T>
class Var {
public:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // empty until first accumulation
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> inputs;  // grad-requiring parents, for traversal
        std::function<void(Node&)> backward;        // reads this->grad, accumulates into parents

        void ensure_grad() {
            if (grad.empty()) grad = Tensor<T>::zeros_like(value);
        }
    };

    Var() = default;

    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Var from_node(std::shared_ptr<Node> n) {
        Var v;
        v.node_ = std::move(n);
        return v;
    }

    bool defined() const { return node_ != nullptr; }

    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& value() { return node_->value; }

    const Shape& shape() const { return node_->value.shape(); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    /// Gradient accumulated by the last backward(); zero tensor if untouched.
    const Tensor<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    Tensor<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    void zero_grad() {
        if (node_ && !node_->grad.empty()) node_->grad.fill(T(0));
    }

    /// Same value, detached from the graph (no gradient flows through).
    Var detach() const {
        return Var(node_->value, false);
    }

    std::shared_ptr<Node> node() const { return node_; }

    /// Backpropagate from a scalar root. Accumulates into leaf gradients
    /// (so independent losses can be summed by repeated calls; use
    /// zero_grad between optimizer steps).
    void backward() const {
        if (!node_) throw std::invalid_argument("backward: undefined Var");
        if (node_->value.size() != 1) {
            throw std::invalid_argument("backward: root must be scalar, shape " + node_->value.shape().str());
        }
        if (!node_->requires_grad) return;

        // Reverse post-order DFS = consumers before producers.
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->inputs.size()) {
                Node* parent = n->inputs[idx].get();
                ++idx;
                if (parent->requires_grad && seen.insert(parent).second) {
                    stack.emplace_back(parent, 0);
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }

        node_->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward) n->backward(*n);
        }
    }

private:
    std::shared_ptr<Node> node_;
};

namespace detail {

/// Accumulate g into node's gradient (allocating on first touch).
template <class T>
void accumulate(typename Var<T>::Node& n, const Tensor<T>& g) {
    n.ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <class T>
std::shared_ptr<typename Var<T>::Node> make_result(Tensor<T> value, std::vector<Var<T>> grad_inputs) {
    auto n = std::make_shared<typename Var<T>::Node>();
    n->value = std::move(value);
    for (const auto& v : grad_inputs) {
        if (v.requires_grad()) {
            n->requires_grad = true;
            n->inputs.push_back(v.node());
        }
    }
    return n;
}

}  // namespace detail

}  // namespace mdrn
