#include "nde/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nde/errors.hpp"
#include "nde/kernels.hpp"
#include "tensor_node.hpp"

namespace nde {

using detail::make_result;
using detail::Node;
using detail::NodeAccess;

namespace {

const std::shared_ptr<Node>& node_of(const Tensor& t) {
    const auto& n = NodeAccess::node(t);
    if (!n) throw UsageError("operation on an undefined tensor");
    return n;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
}

// Row-wise log-sum-exp over the last axis.
std::vector<double> row_logsumexp(std::span<const double> x, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = x.data() + r * cols;
        const double peak = *std::max_element(row, row + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - peak);
        out[r] = peak + std::log(total);
    }
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " * " + to_string(b.shape()));
    std::vector<double> out(m * n);
    kernels::gemm(a.data(), b.data(), out, m, n, k);
    return make_result({m, n}, std::move(out), {node_of(a), node_of(b)}, [m, n, k](Node& self) {
        Node& lhs = *self.inputs[0];
        Node& rhs = *self.inputs[1];
        if (lhs.requires_grad)  // dA = dC * B^T
            kernels::gemm(self.grad, rhs.data, lhs.ensure_grad(), m, k, n, kernels::Trans::No, kernels::Trans::Yes, true);
        if (rhs.requires_grad)  // dB = A^T * dC
            kernels::gemm(lhs.data, self.grad, rhs.ensure_grad(), k, n, m, kernels::Trans::Yes, kernels::Trans::No, true);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(), std::plus<>());
    return make_result(a.shape(), std::move(out), {node_of(a), node_of(b)}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            auto& g = in->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(), std::multiplies<>());
    return make_result(a.shape(), std::move(out), {node_of(a), node_of(b)}, [](Node& self) {
        Node& lhs = *self.inputs[0];
        Node& rhs = *self.inputs[1];
        if (lhs.requires_grad) {
            auto& g = lhs.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * rhs.data[i];
        }
        if (rhs.requires_grad) {
            auto& g = rhs.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * lhs.data[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.numel());
    std::transform(x.data().begin(), x.data().end(), out.begin(), [factor](double v) { return v * factor; });
    return make_result(x.shape(), std::move(out), {node_of(x)}, [factor](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    require_rank(x, 2, "add_bias");
    require_rank(bias, 1, "add_bias");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (bias.dim(0) != cols)
        throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match " + to_string(x.shape()));
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto b = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b[c];
    return make_result(x.shape(), std::move(out), {node_of(x), node_of(bias)}, [rows, cols](Node& self) {
        Node& in = *self.inputs[0];
        Node& bn = *self.inputs[1];
        if (in.requires_grad) {
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
        }
    });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require_rank(x, 4, "add_channel_bias");
    require_rank(bias, 1, "add_channel_bias");
    const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
    if (bias.dim(0) != channels)
        throw DimensionError("add_channel_bias: bias " + to_string(bias.shape()) + " does not match " +
                             to_string(x.shape()));
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto b = bias.data();
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) out[(n * channels + c) * plane + p] += b[c];
    return make_result(x.shape(), std::move(out), {node_of(x), node_of(bias)}, [batch, channels, plane](Node& self) {
        Node& in = *self.inputs[0];
        Node& bn = *self.inputs[1];
        if (in.requires_grad) {
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t c = 0; c < channels; ++c)
                    for (std::size_t p = 0; p < plane; ++p) g[c] += self.grad[(n * channels + c) * plane + p];
        }
    });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    return make_result({1}, {total}, {node_of(x)}, [](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (double& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    std::transform(x.data().begin(), x.data().end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
    return make_result(x.shape(), std::move(out), {node_of(x)}, [](Node& self) {
        Node& in = *self.inputs[0];
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (in.data[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor softmax(const Tensor& x) {
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.numel() / cols;
    const auto lse = row_logsumexp(x.data(), rows, cols);
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = std::exp(x.data()[r * cols + c] - lse[r]);
    return make_result(x.shape(), out, {node_of(x)}, [rows, cols, probs = out](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += self.grad[r * cols + c] * probs[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c)
                g[r * cols + c] += probs[r * cols + c] * (self.grad[r * cols + c] - dot);
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.numel() / cols;
    const auto lse = row_logsumexp(x.data(), rows, cols);
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] - lse[r];
    return make_result(x.shape(), out, {node_of(x)}, [rows, cols, logp = out](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) total += self.grad[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c)
                g[r * cols + c] += self.grad[r * cols + c] - std::exp(logp[r * cols + c]) * total;
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const ClassId> labels) {
    require_rank(logits, 2, "cross_entropy");
    const std::size_t batch = logits.dim(0), classes = logits.dim(1);
    if (labels.size() != batch)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(batch));
    for (std::size_t i = 0; i < batch; ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw InputError("cross_entropy: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                             " outside [0, " + std::to_string(classes) + ")");
    const auto lse = row_logsumexp(logits.data(), batch, classes);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i)
        total += lse[i] - logits.data()[i * classes + static_cast<std::size_t>(labels[i])];
    std::vector<ClassId> saved(labels.begin(), labels.end());
    return make_result({1}, {total / static_cast<double>(batch)}, {node_of(logits)},
                       [batch, classes, lse, saved = std::move(saved)](Node& self) {
                           Node& in = *self.inputs[0];
                           auto& g = in.ensure_grad();
                           const double coef = self.grad[0] / static_cast<double>(batch);
                           for (std::size_t i = 0; i < batch; ++i) {
                               for (std::size_t c = 0; c < classes; ++c)
                                   g[i * classes + c] += coef * std::exp(in.data[i * classes + c] - lse[i]);
                               g[i * classes + static_cast<std::size_t>(saved[i])] -= coef;
                           }
                       });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d");
    if (stride == 0) throw DimensionError("conv2d: stride must be positive");
    const std::size_t batch = x.dim(0), filters = weight.dim(0);
    const kernels::ConvGeometry geo{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3), stride, padding};
    if (weight.dim(1) != geo.channels)
        throw DimensionError("conv2d: weight " + to_string(weight.shape()) + " expects " +
                             std::to_string(weight.dim(1)) + " channels, input " + to_string(x.shape()));
    const std::size_t padded_h = geo.height + 2 * padding, padded_w = geo.width + 2 * padding;
    if (geo.kernel_h > padded_h || geo.kernel_w > padded_w)
        throw DimensionError("conv2d: kernel larger than padded input");
    if ((padded_h - geo.kernel_h) % stride != 0 || (padded_w - geo.kernel_w) % stride != 0)
        throw DimensionError("conv2d: stride " + std::to_string(stride) + " does not tile padded input " +
                             std::to_string(padded_h) + "x" + std::to_string(padded_w));

    const std::size_t oh = geo.out_h(), ow = geo.out_w(), spatial = oh * ow, patch = geo.patch_size();
    const std::size_t in_size = geo.channels * geo.height * geo.width;
    std::vector<double> out(batch * filters * spatial);
    std::vector<double> cols(patch * spatial);
    for (std::size_t n = 0; n < batch; ++n) {
        kernels::im2col(x.data().subspan(n * in_size, in_size), cols, geo);
        kernels::gemm(weight.data(), cols, std::span(out).subspan(n * filters * spatial, filters * spatial), filters,
                      spatial, patch);
    }
    return make_result({batch, filters, oh, ow}, std::move(out), {node_of(x), node_of(weight)},
                       [geo, batch, filters, spatial, patch, in_size](Node& self) {
                           Node& in = *self.inputs[0];
                           Node& w = *self.inputs[1];
                           std::vector<double> cols(patch * spatial);
                           std::vector<double> dcols(patch * spatial);
                           for (std::size_t n = 0; n < batch; ++n) {
                               const auto g = std::span<const double>(self.grad).subspan(n * filters * spatial,
                                                                                         filters * spatial);
                               if (w.requires_grad) {
                                   kernels::im2col(std::span<const double>(in.data).subspan(n * in_size, in_size),
                                                   cols, geo);
                                   kernels::gemm(g, cols, w.ensure_grad(), filters, patch, spatial, kernels::Trans::No,
                                                 kernels::Trans::Yes, true);
                               }
                               if (in.requires_grad) {
                                   kernels::gemm(w.data, g, dcols, patch, spatial, filters, kernels::Trans::Yes,
                                                 kernels::Trans::No);
                                   kernels::col2im(dcols, std::span(in.ensure_grad()).subspan(n * in_size, in_size),
                                                   geo);
                               }
                           }
                       });
}

Tensor max_pool2d(const Tensor& x, std::size_t window) {
    require_rank(x, 4, "max_pool2d");
    const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (window == 0 || h % window != 0 || w % window != 0)
        throw DimensionError("max_pool2d: window " + std::to_string(window) + " does not tile " + to_string(x.shape()));
    const std::size_t oh = h / window, ow = w / window;
    std::vector<double> out(batch * channels * oh * ow);
    std::vector<std::size_t> argmax(out.size());
    const auto in = x.data();
    for (std::size_t plane = 0; plane < batch * channels; ++plane)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xo = 0; xo < ow; ++xo) {
                std::size_t best = plane * h * w + (y * window) * w + xo * window;
                for (std::size_t dy = 0; dy < window; ++dy)
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        const std::size_t idx = plane * h * w + (y * window + dy) * w + xo * window + dx;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = (plane * oh + y) * ow + xo;
                out[o] = in[best];
                argmax[o] = best;
            }
    return make_result({batch, channels, oh, ow}, std::move(out), {node_of(x)}, [argmax = std::move(argmax)](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (element_count(shape) != x.numel())
        throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {node_of(x)}, [](Node& self) {
        auto& g = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

}  // namespace nde
