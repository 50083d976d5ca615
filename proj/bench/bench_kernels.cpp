// Serial reference kernels versus their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nde/kernels.hpp"
#include "nde/perturbation.hpp"

namespace {

using nde::kernels::ConvGeometry;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel) nde::kernels::gemm(a, b, c, n, n, n);
        else nde::kernels::serial::gemm(a, b, c, n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_Im2col(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    const ConvGeometry g{16, size, size, 3, 3, 1, 1};
    const auto image = random_values(g.channels * size * size, 3);
    std::vector<double> cols(g.patch_size() * g.out_h() * g.out_w());
    for (auto _ : state) {
        if constexpr (Parallel) nde::kernels::im2col(image, cols, g);
        else nde::kernels::serial::im2col(image, cols, g);
        benchmark::DoNotOptimize(cols.data());
    }
}

template <bool Parallel>
void BM_SampleNoise(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const nde::NoiseSpec spec{nde::NoiseDistribution::Gaussian, 0.8, 0.1, 42};
    for (auto _ : state) {
        auto xi = Parallel ? nde::sample_noise(spec, dim) : nde::serial::sample_noise(spec, dim);
        auto m = Parallel ? nde::sample_mask(spec.alpha, dim, spec.seed)
                          : nde::serial::sample_mask(spec.alpha, dim, spec.seed);
        benchmark::DoNotOptimize(xi.data());
        benchmark::DoNotOptimize(m.bits.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(dim));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_Im2col<false>)->Name("im2col/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_Im2col<true>)->Name("im2col/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_SampleNoise<false>)->Name("perturb_sampling/serial")->Arg(203530);
BENCHMARK(BM_SampleNoise<true>)->Name("perturb_sampling/openmp")->Arg(203530);

BENCHMARK_MAIN();
