#include "obda/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace obda {

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (int extent : shape) {
        require(extent > 0, ErrorKind::config, "non-positive extent in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(extent);
    }
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ')';
    return out.str();
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> values, const std::vector<Tensor>& inputs,
                             BackwardFn backward, const char* op_name)
{
    for (const T& v : values) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::numeric, std::string("non-finite value produced by ") + op_name);
        }
    }
    Tensor out(std::move(shape), std::move(values), false);
    if (!GradMode::enabled()) {
        return out;
    }
    bool tracked = false;
    for (const auto& in : inputs) {
        tracked = tracked || in.requires_grad();
    }
    if (tracked) {
        out.node_->requires_grad = true;
        out.node_->backward = std::move(backward);
        out.node_->inputs.reserve(inputs.size());
        for (const auto& in : inputs) {
            out.node_->inputs.push_back(in.node_);
        }
    }
    return out;
}

template <typename T>
void Tensor<T>::backward() const
{
    require(numel() == 1, ErrorKind::config, "backward() requires a scalar root, got " + shape_str(shape()));
    if (!node_->requires_grad) {
        return;
    }

    // Iterative post-order DFS gives a topological order without recursion
    // depth limits on long graphs.
    std::vector<NodeType*> order;
    std::unordered_set<NodeType*> visited;
    std::vector<std::pair<NodeType*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            NodeType* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeType* node = *it;
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
        }
    }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace obda
