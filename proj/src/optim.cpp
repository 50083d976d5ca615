#include "nde/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nde/errors.hpp"

namespace nde {

void SgdConfig::validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum", "must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be non-negative");
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              const SgdConfig& config) {
    if (grads.size() != params.size() || velocity.size() != params.size())
        throw DimensionError("sgd_step: params " + std::to_string(params.size()) + ", grads " +
                             std::to_string(grads.size()) + ", velocity " + std::to_string(velocity.size()));
    if (lr < 0.0) throw UsageError("sgd_step: negative learning rate");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] + grads[i] + config.weight_decay * params[i];
        params[i] -= lr * velocity[i];
    }
}

Sgd::Sgd(const Model& model, SgdConfig config) : config_(config) {
    config_.validate();
    for (const auto& p : model.parameters()) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Sgd::step(Model& model, double lr) {
    const auto& params = model.parameters();
    if (params.size() != velocity_.size()) throw DimensionError("Sgd::step: model does not match optimizer state");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].tensor;
        if (!t.has_grad()) continue;
        sgd_step(t.data(), t.grad(), velocity_[i], lr, config_);
    }
}

CosineSchedule::CosineSchedule(double lr_max, double lr_min, std::size_t total_steps)
    : lr_max_(lr_max), lr_min_(lr_min), total_(total_steps) {
    if (total_steps == 0) throw ConfigError("schedule.total_steps", "must be positive");
    if (lr_min < 0.0 || lr_max < lr_min) throw ConfigError("train.lr_max", "need 0 <= lr_min <= lr_max");
}

double CosineSchedule::lr_at(std::size_t step) const {
    if (step > total_)
        throw UsageError("lr_at: step " + std::to_string(step) + " beyond schedule length " + std::to_string(total_));
    const double progress = static_cast<double>(step) / static_cast<double>(total_);
    return lr_min_ + 0.5 * (lr_max_ - lr_min_) * (1.0 + std::cos(std::numbers::pi * progress));
}

CyclicCosineSchedule::CyclicCosineSchedule(double lr_max, double lr_min, std::size_t cycle_length,
                                           std::size_t num_cycles)
    : cycle_(lr_max, lr_min, cycle_length), cycles_(num_cycles) {
    if (num_cycles == 0) throw ConfigError("train.members", "snapshot schedule needs at least one cycle");
}

double CyclicCosineSchedule::lr_at(std::size_t step) const {
    if (step > total_steps())
        throw UsageError("lr_at: step " + std::to_string(step) + " beyond schedule length " +
                         std::to_string(total_steps()));
    if (step == total_steps()) return lr_at_cycle_end();
    return cycle_.lr_at(step % cycle_length());
}

}  // namespace nde
