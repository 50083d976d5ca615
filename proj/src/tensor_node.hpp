#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nde/tensor.hpp"

namespace nde::detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;

    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into inputs' grads.
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

struct NodeAccess {
    static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
    static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

// Builds a result node. If grad recording is on and any input requires grad,
// the node keeps its inputs and `backward_fn`; otherwise it is a plain leaf.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<std::shared_ptr<Node>> inputs,
                   std::function<void(Node&)> backward_fn);

}  // namespace nde::detail
