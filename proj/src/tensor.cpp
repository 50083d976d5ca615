#include "nde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "nde/errors.hpp"
#include "tensor_node.hpp"

namespace nde {

namespace {
thread_local bool g_grad_enabled = true;

const detail::Node& require(const std::shared_ptr<detail::Node>& n) {
    if (!n) throw UsageError("operation on an undefined tensor");
    return *n;
}
}  // namespace

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : Tensor(shape, std::vector<double>(element_count(shape)), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t extent : shape)
        if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    if (element_count(shape) != values.size())
        throw DimensionError("shape " + to_string(shape) + " needs " + std::to_string(element_count(shape)) +
                             " values, got " + std::to_string(values.size()));
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return require(node_).data.size(); }

std::span<double> Tensor::data() {
    require(node_);
    return node_->data;
}

std::span<const double> Tensor::data() const { return require(node_).data; }

double Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return require(node_).requires_grad; }
bool Tensor::is_leaf() const { return require(node_).leaf; }
bool Tensor::has_grad() const { return !require(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    require(node_);
    return node_->ensure_grad();
}

void Tensor::zero_grad() {
    require(node_);
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
    const detail::Node& root = require(node_);
    if (root.data.size() != 1) throw UsageError("backward() needs a scalar root, got " + to_string(root.shape));
    if (root.consumed) throw UsageError("backward() already ran on this graph; rebuild it with a new forward pass");
    if (!root.requires_grad) throw UsageError("backward() on a tensor that does not require grad");

    // Iterative post-order DFS gives a topological order (inputs before outputs).
    // `order` owns the nodes: releasing a node's inputs below must not free ones still queued.
    std::vector<std::shared_ptr<detail::Node>> order;
    std::unordered_set<const detail::Node*> seen;
    std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{node_, 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->inputs.size()) {
            std::shared_ptr<detail::Node> child = top.first->inputs[top.second++];
            if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
        } else {
            order.push_back(std::move(top.first));
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node& n = **it;
        if (n.leaf) continue;
        n.backward_fn(n);
        n.backward_fn = nullptr;
        n.inputs.clear();
        n.consumed = true;
    }
    node_->consumed = true;
}

Tensor Tensor::detach() const {
    const detail::Node& n = require(node_);
    return Tensor(n.shape, n.data, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

bool all_finite(const Tensor& t) {
    const auto d = t.data();
    return std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); });
}

namespace detail {

Tensor make_result(Shape shape, std::vector<double> data, std::vector<std::shared_ptr<Node>> inputs,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    const bool track = g_grad_enabled &&
                       std::any_of(inputs.begin(), inputs.end(), [](const auto& n) { return n->requires_grad; });
    if (track) {
        node->requires_grad = true;
        node->leaf = false;
        node->inputs = std::move(inputs);
        node->backward_fn = std::move(backward_fn);
    }
    return NodeAccess::wrap(std::move(node));
}

}  // namespace detail

}  // namespace nde
