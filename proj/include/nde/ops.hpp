#pragma once

#include <cstddef>
#include <span>

#include "nde/tensor.hpp"

namespace nde {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// [B x N] + bias[N], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// [N x C x H x W] + bias[C], broadcast over batch and spatial positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor relu(const Tensor& x);

// Along the last axis, with max subtraction.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

// Mean over the batch of -log_softmax(logits)[label]. logits is [B x C].
Tensor cross_entropy(const Tensor& logits, std::span<const ClassId> labels);

// Cross-correlation. x: [N x C x H x W], weight: [F x C x kh x kw].
Tensor conv2d(const Tensor& x, const Tensor& weight, std::size_t stride = 1, std::size_t padding = 0);

// Non-overlapping max pooling with a square window; H and W must be multiples of `window`.
Tensor max_pool2d(const Tensor& x, std::size_t window);

Tensor reshape(const Tensor& x, Shape shape);

}  // namespace nde
