#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nde {

using Shape = std::vector<std::size_t>;
using ClassId = std::int32_t;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
struct NodeAccess;
}  // namespace detail

/// Dense row-major tensor of doubles with an optional gradient buffer.
///
/// A Tensor is a handle: copies share storage and graph position. Operations
/// in ops.hpp record how their result was produced, and `backward()` on a
/// scalar result walks that record in reverse topological order, accumulating
/// into the `grad()` of every leaf created with `requires_grad = true`.
///
/// The graph is rebuilt by every forward pass. After `backward()` the
/// intermediate records are released, so a second `backward()` on the same
/// result throws UsageError.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<double> data();
    std::span<const double> data() const;
    double item() const;

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    void backward() const;

    /// Copy of the values with no graph history and no gradient.
    Tensor detach() const;

private:
    friend struct detail::NodeAccess;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// While alive, operations on this thread do not record a graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

bool all_finite(const Tensor& t);

}  // namespace nde
