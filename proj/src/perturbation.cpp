#include "nde/perturbation.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "nde/errors.hpp"

namespace nde {

namespace {

// Distinct streams for mask and noise drawn from the same spec seed.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365000001ULL;
constexpr std::uint64_t kMaskStream = 0x6d61736b00000002ULL;

double noise_value(const CounterRng& rng, const NoiseSpec& spec, std::size_t i) {
    if (spec.distribution == NoiseDistribution::Uniform) return spec.beta * (2.0 * rng.uniform(i) - 1.0);
    return spec.beta * rng.normal(i);
}

}  // namespace

std::string to_string(NoiseDistribution d) { return d == NoiseDistribution::Uniform ? "uniform" : "gaussian"; }

NoiseDistribution parse_noise_distribution(const std::string& name) {
    if (name == "uniform" || name == "uni") return NoiseDistribution::Uniform;
    if (name == "gaussian" || name == "normal" || name == "norm") return NoiseDistribution::Gaussian;
    throw ConfigError("noise.dist", "unknown distribution '" + name + "' (expected uniform or gaussian)");
}

void NoiseSpec::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("noise.alpha", "must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("noise.beta", "must be finite and non-negative");
}

double MaskVector::rate() const {
    if (bits.empty()) return 0.0;
    return static_cast<double>(std::accumulate(bits.begin(), bits.end(), std::size_t{0})) /
           static_cast<double>(bits.size());
}

std::uint64_t child_seed(std::uint64_t base_seed, std::size_t index) {
    return base_seed ^ mix64(static_cast<std::uint64_t>(index) + 1);
}

std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t dim) {
    spec.validate();
    std::vector<double> out(dim, 0.0);
    if (spec.beta == 0.0) return out;
    const CounterRng rng(mix64(spec.seed ^ kNoiseStream));
    const auto n = static_cast<std::ptrdiff_t>(dim);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = noise_value(rng, spec, static_cast<std::size_t>(i));
    return out;
}

MaskVector sample_mask(double alpha, std::size_t dim, std::uint64_t seed) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("noise.alpha", "must lie in [0, 1]");
    MaskVector mask{std::vector<std::uint8_t>(dim)};
    const CounterRng rng(mix64(seed ^ kMaskStream));
    const auto n = static_cast<std::ptrdiff_t>(dim);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) mask.bits[static_cast<std::size_t>(i)] = rng.uniform(static_cast<std::size_t>(i)) < alpha;
    return mask;
}

std::vector<double> apply_masked_noise(std::span<const double> theta, std::span<const double> noise,
                                       const MaskVector& mask) {
    if (noise.size() != theta.size() || mask.size() != theta.size())
        throw DimensionError("apply_masked_noise: theta " + std::to_string(theta.size()) + ", noise " +
                             std::to_string(noise.size()) + ", mask " + std::to_string(mask.size()));
    std::vector<double> out(theta.begin(), theta.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (mask.bits[i] && noise[i] != 0.0) out[i] = theta[i] + noise[i];
    return out;
}

ParamVector perturb(const ParamVector& theta, const NoiseSpec& spec) {
    spec.validate();
    ParamVector out{{}, theta.layout};
    const MaskVector mask = sample_mask(spec.alpha, theta.size(), spec.seed);
    const std::vector<double> noise = sample_noise(spec, theta.size());
    out.values = apply_masked_noise(theta.values, noise, mask);
    return out;
}

namespace serial {

std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t dim) {
    spec.validate();
    std::vector<double> out(dim, 0.0);
    if (spec.beta == 0.0) return out;
    const CounterRng rng(mix64(spec.seed ^ kNoiseStream));
    for (std::size_t i = 0; i < dim; ++i) out[i] = noise_value(rng, spec, i);
    return out;
}

MaskVector sample_mask(double alpha, std::size_t dim, std::uint64_t seed) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("noise.alpha", "must lie in [0, 1]");
    MaskVector mask{std::vector<std::uint8_t>(dim)};
    const CounterRng rng(mix64(seed ^ kMaskStream));
    for (std::size_t i = 0; i < dim; ++i) mask.bits[i] = rng.uniform(i) < alpha;
    return mask;
}

}  // namespace serial

}  // namespace nde
