#include <benchmark/benchmark.h>

#include <random>

#include "rgns/graph.hpp"

namespace {

std::vector<double> random_positions(int n, int dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pos(static_cast<std::size_t>(n) * dims);
    for (auto& p : pos) p = u(rng);
    return pos;
}

void BM_cell_list(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int dims = 2;
    const auto pos = random_positions(n, dims, 7);
    const std::vector<double> lo = {0.0, 0.0}, hi = {1.0, 1.0};
    // radius tuned for ~10 neighbors regardless of n
    const double r = std::sqrt(10.0 / (3.14159 * n));
    for (auto _ : state) {
        auto g = rgns::build_radius_graph(pos, n, dims, r, lo, hi);
        benchmark::DoNotOptimize(g.edges.data());
    }
}
BENCHMARK(BM_cell_list)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_all_pairs(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int dims = 2;
    const auto pos = random_positions(n, dims, 7);
    const double r = std::sqrt(10.0 / (3.14159 * n));
    for (auto _ : state) {
        std::vector<rgns::Edge> edges;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && rgns::dist2(pos.data() + static_cast<std::size_t>(i) * dims,
                                          pos.data() + static_cast<std::size_t>(j) * dims,
                                          dims) <= r * r)
                    edges.push_back({i, j});
        benchmark::DoNotOptimize(edges.data());
    }
}
BENCHMARK(BM_all_pairs)->Arg(1000)->Arg(4000);

}  // namespace
