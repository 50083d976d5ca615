#pragma once

// Finite-difference checks for every differentiable op, on randomly sized instances.

#include <string>
#include <vector>

#include "check.hpp"
#include "nde/models.hpp"
#include "nde/ops.hpp"

namespace nde::testing {

struct GradCase {
    std::string op;
    std::function<Tensor(const std::vector<Tensor>&)> loss;
    std::vector<Tensor> inputs;
};

inline GradCase make_grad_case(const std::string& op, Gen& g) {
    const std::size_t a = g.index(1, 4), b = g.index(1, 5), c = g.index(2, 5);
    if (op == "matmul") {
        auto w = g.tensor({a, c}, false);
        return {op, [w](const auto& in) { return project(matmul(in[0], in[1]), w); },
                {g.tensor({a, b}), g.tensor({b, c})}};
    }
    if (op == "add") {
        auto w = g.tensor({a, b}, false);
        return {op, [w](const auto& in) { return project(add(in[0], in[1]), w); },
                {g.tensor({a, b}), g.tensor({a, b})}};
    }
    if (op == "mul") {
        auto w = g.tensor({a, b}, false);
        return {op, [w](const auto& in) { return project(mul(in[0], in[1]), w); },
                {g.tensor({a, b}), g.tensor({a, b})}};
    }
    if (op == "scale") {
        const double f = g.uniform(-3.0, 3.0);
        auto w = g.tensor({a, b, c}, false);
        return {op, [w, f](const auto& in) { return project(scale(in[0], f), w); }, {g.tensor({a, b, c})}};
    }
    if (op == "add_bias") {
        auto w = g.tensor({a, c}, false);
        return {op, [w](const auto& in) { return project(add_bias(in[0], in[1]), w); },
                {g.tensor({a, c}), g.tensor({c})}};
    }
    if (op == "add_channel_bias") {
        auto w = g.tensor({a, c, 2, 3}, false);
        return {op, [w](const auto& in) { return project(add_channel_bias(in[0], in[1]), w); },
                {g.tensor({a, c, 2, 3}), g.tensor({c})}};
    }
    if (op == "sum") {
        return {op, [](const auto& in) { return sum(mul(in[0], in[0])); }, {g.tensor({a, b})}};
    }
    if (op == "mean") {
        return {op, [](const auto& in) { return mean(mul(in[0], in[0])); }, {g.tensor({a, b, c})}};
    }
    if (op == "relu") {
        const Shape s{a, b, c};
        auto w = g.tensor(s, false);
        return {op, [w](const auto& in) { return project(relu(in[0]), w); },
                {Tensor(s, g.away_from_zero(element_count(s)), true)}};
    }
    if (op == "softmax") {
        auto w = g.tensor({a, c}, false);
        return {op, [w](const auto& in) { return project(softmax(in[0]), w); }, {g.tensor({a, c}, true, -3, 3)}};
    }
    if (op == "log_softmax") {
        auto w = g.tensor({a, c}, false);
        return {op, [w](const auto& in) { return project(log_softmax(in[0]), w); },
                {g.tensor({a, c}, true, -3, 3)}};
    }
    if (op == "cross_entropy") {
        std::vector<ClassId> labels(a);
        for (auto& l : labels) l = static_cast<ClassId>(g.index(0, c - 1));
        return {op, [labels](const auto& in) { return cross_entropy(in[0], labels); },
                {g.tensor({a, c}, true, -3, 3)}};
    }
    if (op == "conv2d") {
        const std::size_t n = g.index(1, 2), ch = g.index(1, 3), f = g.index(1, 3);
        const std::size_t k = g.index(1, 3), pad = g.index(0, 1);
        const std::size_t stride = g.index(1, 2);
        // Pick H, W so the stride tiles the padded input exactly.
        const std::size_t h = k - 2 * pad + stride * g.index(1 + pad, 3), w = k - 2 * pad + stride * g.index(1 + pad, 3);
        const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
        auto proj = g.tensor({n, f, oh, ow}, false);
        return {op,
                [proj, stride, pad](const auto& in) { return project(conv2d(in[0], in[1], stride, pad), proj); },
                {g.tensor({n, ch, h, w}), g.tensor({f, ch, k, k})}};
    }
    if (op == "max_pool2d") {
        const std::size_t win = g.index(1, 3), n = g.index(1, 2), ch = g.index(1, 2);
        const std::size_t h = win * g.index(1, 3), w = win * g.index(1, 3);
        const Shape s{n, ch, h, w};
        auto proj = g.tensor({n, ch, h / win, w / win}, false);
        return {op, [proj, win](const auto& in) { return project(max_pool2d(in[0], win), proj); },
                {Tensor(s, g.distinct(element_count(s)), true)}};
    }
    if (op == "reshape") {
        auto w = g.tensor({a * b, c}, false);
        return {op, [w, a, b, c](const auto& in) { return project(reshape(in[0], {a * b, c}), w); },
                {g.tensor({a, b, c})}};
    }
    if (op == "mlp") {
        const std::size_t in_dim = g.index(2, 6), hidden = g.index(2, 6), classes = g.index(2, 4);
        std::vector<ClassId> labels(a);
        for (auto& l : labels) l = static_cast<ClassId>(g.index(0, classes - 1));
        return {op,
                [labels](const auto& in) {
                    return cross_entropy(add_bias(matmul(relu(add_bias(matmul(in[0], in[1]), in[2])), in[3]), in[4]),
                                         labels);
                },
                {g.tensor({a, in_dim}, false), g.tensor({in_dim, hidden}), g.tensor({hidden}), g.tensor({hidden, classes}),
                 g.tensor({classes})}};
    }
    if (op == "cnn") {
        std::vector<ClassId> labels(2);
        for (auto& l : labels) l = static_cast<ClassId>(g.index(0, 2));
        return {op,
                [labels](const auto& in) {
                    Tensor h = max_pool2d(relu(add_channel_bias(conv2d(in[0], in[1], 1, 1), in[2])), 2);
                    return cross_entropy(add_bias(matmul(reshape(h, {2, 2 * 2 * 2}), in[3]), in[4]), labels);
                },
                {Tensor({2, 1, 4, 4}, g.distinct(32, 0.1), false), g.tensor({2, 1, 3, 3}), g.tensor({2}),
                 g.tensor({8, 3}), g.tensor({3})}};
    }
    throw std::invalid_argument("unknown op " + op);
}

inline const std::vector<std::string>& differentiable_ops() {
    static const std::vector<std::string> ops = {"matmul",  "add",         "mul",           "scale",  "add_bias",
                                                 "add_channel_bias", "sum", "mean",         "relu",   "softmax",
                                                 "log_softmax", "cross_entropy", "conv2d", "max_pool2d", "reshape",
                                                 "mlp",     "cnn"};
    return ops;
}

struct OpGradResult {
    std::string op;
    std::size_t instances = 0;
    double worst = 0.0;
};

inline OpGradResult check_op(const std::string& op, std::size_t instances, std::uint64_t seed) {
    Gen g(seed);
    OpGradResult r{op, 0, 0.0};
    for (std::size_t i = 0; i < instances; ++i) {
        GradCase gc = make_grad_case(op, g);
        const GradCheck check = check_gradients(gc.loss, gc.inputs);
        r.worst = std::max(r.worst, check.worst_relative_error);
        ++r.instances;
    }
    return r;
}

}  // namespace nde::testing
