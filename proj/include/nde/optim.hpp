#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nde/models.hpp"

namespace nde {

struct SgdConfig {
    double momentum = 0.9;
    double weight_decay = 0.0005;

    void validate() const;
};

// v <- momentum * v + grad + weight_decay * theta;  theta <- theta - lr * v
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              const SgdConfig& config);

/// Momentum SGD over every parameter of one model. Velocity starts at zero.
class Sgd {
public:
    Sgd(const Model& model, SgdConfig config);

    // Applies one update from the gradients currently stored on the model.
    void step(Model& model, double lr);
    const SgdConfig& config() const { return config_; }

private:
    SgdConfig config_;
    std::vector<std::vector<double>> velocity_;
};

/// lr(step) = lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2, step in [0, total].
class CosineSchedule {
public:
    CosineSchedule(double lr_max, double lr_min, std::size_t total_steps);

    double lr_at(std::size_t step) const;
    double lr_max() const { return lr_max_; }
    double lr_min() const { return lr_min_; }
    std::size_t total_steps() const { return total_; }

private:
    double lr_max_;
    double lr_min_;
    std::size_t total_;
};

/// Cosine annealing restarted every `cycle_length` steps for `num_cycles` cycles.
/// Steps that land on a cycle boundary start the next cycle at lr_max, except the
/// final step (cycle_length * num_cycles) which closes the last cycle at lr_min.
class CyclicCosineSchedule {
public:
    CyclicCosineSchedule(double lr_max, double lr_min, std::size_t cycle_length, std::size_t num_cycles);

    double lr_at(std::size_t step) const;
    // Learning rate at the end of any cycle; equals lr_min.
    double lr_at_cycle_end() const { return cycle_.lr_at(cycle_.total_steps()); }
    std::size_t cycle_length() const { return cycle_.total_steps(); }
    std::size_t num_cycles() const { return cycles_; }
    std::size_t total_steps() const { return cycle_.total_steps() * cycles_; }

private:
    CosineSchedule cycle_;
    std::size_t cycles_;
};

}  // namespace nde
