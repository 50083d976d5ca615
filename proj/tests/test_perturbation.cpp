#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "nde/errors.hpp"
#include "nde/perturbation.hpp"
#include "nde/random.hpp"
#include "support/check.hpp"

using namespace nde;
using nde::testing::Gen;

namespace {

ParamVector random_theta(Gen& g, std::size_t dim) {
    ParamVector v;
    v.values = g.values(dim, -2, 2);
    v.layout = {{"all", 0, dim}};
    return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_SUITE("perturbation") {

TEST_CASE("counter rng is stateless and in range") {
    const CounterRng rng(42);
    CHECK(rng.bits(7) == rng.bits(7));
    CHECK(rng.bits(7) != rng.bits(8));
    CHECK(CounterRng(43).bits(7) != rng.bits(7));
    for (std::uint64_t c = 0; c < 10000; ++c) {
        const double u = rng.uniform(c);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("zero scale gives zero noise") {
    for (auto dist : {NoiseDistribution::Uniform, NoiseDistribution::Gaussian}) {
        for (double v : sample_noise({dist, 1.0, 0.0, 9}, 1000)) CHECK(v == 0.0);
    }
}

TEST_CASE("uniform noise stays within beta and is centered") {
    const std::size_t dim = 100000;
    const auto xi = sample_noise({NoiseDistribution::Uniform, 1.0, 1.6, 3}, dim);
    double total = 0.0, max_abs = 0.0;
    for (double v : xi) {
        total += v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    const double sigma = 1.6 / std::sqrt(3.0) / std::sqrt(static_cast<double>(dim));
    CHECK(max_abs <= 1.6);
    CHECK(std::abs(total / dim) <= 3.0 * sigma);
}

TEST_CASE("gaussian beta is the standard deviation") {
    const std::size_t dim = 100000;
    const auto xi = sample_noise({NoiseDistribution::Gaussian, 1.0, 0.1, 4}, dim);
    double mean = 0.0;
    for (double v : xi) mean += v;
    mean /= dim;
    double var = 0.0;
    for (double v : xi) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (dim - 1));
    CHECK(sd >= 0.097);
    CHECK(sd <= 0.103);
}

TEST_CASE("mask examples") {
    for (auto b : sample_mask(0.0, 5000, 1).bits) CHECK(b == 0);
    for (auto b : sample_mask(1.0, 5000, 1).bits) CHECK(b == 1);
    const double rate = sample_mask(0.8, 100000, 2).rate();
    CHECK(rate >= 0.79);
    CHECK(rate <= 0.81);
    CHECK(sample_mask(0.5, 1000, 3).bits == sample_mask(0.5, 1000, 3).bits);
}

TEST_CASE("parallel sampling matches the serial reference") {
    for (auto dist : {NoiseDistribution::Uniform, NoiseDistribution::Gaussian}) {
        const NoiseSpec spec{dist, 0.7, 0.3, 11};
        CHECK(sample_noise(spec, 50000) == serial::sample_noise(spec, 50000));
    }
    CHECK(sample_mask(0.3, 50000, 12).bits == serial::sample_mask(0.3, 50000, 12).bits);
}

TEST_CASE("masked perturbation hand example") {
    const std::vector<double> theta{1, 1, 1, 1}, xi{0.5, -0.5, 0.2, 0.1};
    const MaskVector m{{1, 0, 1, 0}};
    CHECK(apply_masked_noise(theta, xi, m) == std::vector<double>{1.5, 1, 1.2, 1});
}

TEST_CASE("degenerate noise is a bitwise identity") {
    Gen g(51);
    const ParamVector theta = random_theta(g, 10000);
    for (const NoiseSpec& spec : {NoiseSpec{NoiseDistribution::Uniform, 0.8, 0.0, 1},
                                  NoiseSpec{NoiseDistribution::Gaussian, 0.0, 1.0, 2}}) {
        const ParamVector out = perturb(theta, spec);
        for (std::size_t i = 0; i < theta.size(); ++i) CHECK(same_bits(out.values[i], theta.values[i]));
    }
}

TEST_CASE("full mask adds the noise vector exactly") {
    Gen g(52);
    const ParamVector theta = random_theta(g, 5000);
    const NoiseSpec spec{NoiseDistribution::Uniform, 1.0, 0.4, 5};
    const ParamVector out = perturb(theta, spec);
    const auto xi = sample_noise(spec, theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(out.values[i] == theta.values[i] + xi[i]);
}

TEST_CASE("property: perturb is pure and bounded") {
    Gen g(53);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t dim = g.index(1, 20000);
        const ParamVector theta = random_theta(g, dim);
        const ParamVector copy = theta;
        const NoiseSpec spec{NoiseDistribution::Uniform, g.uniform(0, 1), g.uniform(0, 2), g.index(0, 1u << 30)};
        const ParamVector a = perturb(theta, spec);
        const ParamVector b = perturb(theta, spec);
        CHECK(theta.values == copy.values);
        CHECK(a.values == b.values);
        CHECK(a.layout.size() == theta.layout.size());

        std::size_t changed = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            if (!same_bits(a.values[i], theta.values[i])) ++changed;
            // float rounding in θ + ξ can overshoot β by an ulp of |θ|
            CHECK(std::abs(a.values[i] - theta.values[i]) <= spec.beta * (1 + 1e-12) + 4e-16);
        }
        const double bound = spec.alpha * dim + 4.0 * std::sqrt(dim * spec.alpha * (1 - spec.alpha));
        CHECK(static_cast<double>(changed) <= bound);
    }
}

TEST_CASE("property: distinct child seeds give distinct noise and masks") {
    std::set<std::uint64_t> seeds;
    for (std::size_t i = 0; i < 64; ++i) seeds.insert(child_seed(1234, i));
    CHECK(seeds.size() == 64);
    const NoiseSpec base{NoiseDistribution::Uniform, 0.5, 1.0, 0};
    const auto s0 = child_seed(7, 0), s1 = child_seed(7, 1);
    CHECK(sample_noise(base.with_seed(s0), 1000) != sample_noise(base.with_seed(s1), 1000));
    CHECK(sample_mask(0.5, 1000, s0).bits != sample_mask(0.5, 1000, s1).bits);
}

TEST_CASE("noise spec validation") {
    CHECK_THROWS_AS(NoiseSpec({NoiseDistribution::Uniform, 1.5, 0.1, 0}).validate(), ConfigError);
    CHECK_THROWS_AS(NoiseSpec({NoiseDistribution::Uniform, 0.5, -0.1, 0}).validate(), ConfigError);
    CHECK(parse_noise_distribution("gaussian") == NoiseDistribution::Gaussian);
    CHECK(parse_noise_distribution("uniform") == NoiseDistribution::Uniform);
    CHECK_THROWS_AS(parse_noise_distribution("laplace"), ConfigError);
}

}  // TEST_SUITE
