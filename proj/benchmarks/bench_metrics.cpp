#include <benchmark/benchmark.h>

#include <random>

#include "rgns/metrics.hpp"
#include "rgns/pinv.hpp"

namespace {

std::vector<double> random_points(int n, int dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(static_cast<std::size_t>(n) * dims);
    for (auto& v : p) v = u(rng);
    return p;
}

void BM_ot_exact(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = random_points(n, 2, 1), b = random_points(n, 2, 2);
    for (auto _ : state) benchmark::DoNotOptimize(rgns::ot_distance(a, b, 2));
}
BENCHMARK(BM_ot_exact)->Arg(64)->Arg(256)->Arg(512);

void BM_mmd(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = random_points(n, 2, 1), b = random_points(n, 2, 2);
    for (auto _ : state) benchmark::DoNotOptimize(rgns::mmd(a, b, 2));
}
BENCHMARK(BM_mmd)->Arg(150)->Arg(500);

void BM_pinv(benchmark::State& state) {
    std::mt19937_64 rng(5);
    const auto W = rgns::gaussian_mat<double>(128, static_cast<int>(state.range(0)), 1.0, rng);
    for (auto _ : state) {
        auto P = rgns::pseudo_inverse(W);
        benchmark::DoNotOptimize(P.a.data());
    }
}
BENCHMARK(BM_pinv)->Arg(15)->Arg(32);

}  // namespace
