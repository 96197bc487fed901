#pragma once

// Dense tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node. Ops create new nodes that
// remember their inputs and a backward closure; Tensor::backward() walks the
// graph in reverse topological order from a scalar root. Values are never
// mutated by ops, only gradient buffers are.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "obda/error.hpp"

namespace obda {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until something is accumulated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    std::vector<T>& grad_buffer()
    {
        if (grad.empty()) {
            grad.assign(value.size(), T(0));
        }
        return grad;
    }
};

}  // namespace detail

// Thread-local switch: while a NoGradGuard is alive, ops record no graph.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
public:
    NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
    ~NoGradGuard() { GradMode::set_enabled(previous_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename T>
class Tensor {
public:
    using value_type = T;
    using NodeType = detail::Node<T>;
    using BackwardFn = std::function<void(NodeType&)>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
        : node_(std::make_shared<NodeType>())
    {
        node_->value.assign(shape_numel(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<NodeType>())
    {
        require(values.size() == shape_numel(shape), ErrorKind::config,
                "tensor value count does not match shape " + shape_str(shape));
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
    }

    // Builds an op result. Graph edges are recorded only when grad mode is on
    // and at least one input tracks gradients.
    static Tensor from_op(Shape shape, std::vector<T> values, const std::vector<Tensor>& inputs,
                          BackwardFn backward, const char* op_name);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const T> values() const { return node_->value; }
    // In-place writes are reserved for leaves: parameters, optimizers, tests.
    std::span<T> values_mut() { return node_->value; }
    T operator[](std::size_t i) const { return node_->value[i]; }
    T item() const
    {
        require(numel() == 1, ErrorKind::config, "item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> grad_mut() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    // Seeds d(self)/d(self) = 1 and propagates to every reachable leaf.
    void backward() const;

    Tensor detach() const { return Tensor(shape(), node_->value, false); }

    // Handles compare by identity.
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    NodeType& node() const { return *node_; }
    const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

private:
    std::shared_ptr<NodeType> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

// Copies values across precisions; the result is a fresh leaf.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x)
{
    std::vector<To> v(x.values().begin(), x.values().end());
    return Tensor<To>(x.shape(), std::move(v), false);
}

}  // namespace obda
