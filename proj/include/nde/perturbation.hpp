#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nde/models.hpp"
#include "nde/random.hpp"

namespace nde {

enum class NoiseDistribution { Uniform, Gaussian };

std::string to_string(NoiseDistribution d);
NoiseDistribution parse_noise_distribution(const std::string& name);

/// One-shot weight perturbation: theta' = theta + xi (.) m with
/// m_i ~ Bernoulli(alpha) and xi_i ~ U(-beta, beta) or N(0, beta^2).
struct NoiseSpec {
    NoiseDistribution distribution = NoiseDistribution::Uniform;
    double alpha = 1.0;  // mask rate
    double beta = 0.0;   // scale: half-width (uniform) or standard deviation (gaussian)
    std::uint64_t seed = 0;

    void validate() const;
    NoiseSpec with_seed(std::uint64_t s) const {
        NoiseSpec copy = *this;
        copy.seed = s;
        return copy;
    }
};

struct MaskVector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    double rate() const;
};


/// Seed for ensemble member `index` derived from a run's base seed.
std::uint64_t child_seed(std::uint64_t base_seed, std::size_t index);

std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t dim);
MaskVector sample_mask(double alpha, std::size_t dim, std::uint64_t seed);

/// theta_i + noise_i where mask_i is set; other entries are copied bit-for-bit.
std::vector<double> apply_masked_noise(std::span<const double> theta, std::span<const double> noise,
                                       const MaskVector& mask);

/// Samples a mask and noise from `spec` and applies them. The input is not modified.
ParamVector perturb(const ParamVector& theta, const NoiseSpec& spec);

namespace serial {
std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t dim);
MaskVector sample_mask(double alpha, std::size_t dim, std::uint64_t seed);
}  // namespace serial

}  // namespace nde
