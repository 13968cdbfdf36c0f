#include <benchmark/benchmark.h>

#include <random>

#include "rgns/rrmp.hpp"

namespace {

struct Fixture {
    rgns::RadiusGraph graph;
    rgns::RrmpStack<float> stack;
    rgns::StackState<float> x;
};

Fixture make_fixture(int n, int half, int depth) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pos(static_cast<std::size_t>(n) * 2);
    for (auto& p : pos) p = u(rng);
    const std::vector<double> lo = {0.0, 0.0}, hi = {1.0, 1.0};
    Fixture f;
    f.graph = rgns::build_radius_graph(pos, n, 2, std::sqrt(10.0 / (3.14159 * n)), lo, hi);
    f.stack = rgns::make_rrmp_stack<float>(depth, half, 2 * half, rgns::EdgeMode::fixed, rng);
    f.x.n1 = rgns::gaussian_mat<float>(n, half, 1.0, rng);
    f.x.n2 = rgns::gaussian_mat<float>(n, half, 1.0, rng);
    f.x.e1 = rgns::gaussian_mat<float>(f.graph.n_edges(), half, 1.0, rng);
    f.x.e2 = rgns::gaussian_mat<float>(f.graph.n_edges(), half, 1.0, rng);
    return f;
}

void BM_stack_forward(benchmark::State& state) {
    auto f = make_fixture(static_cast<int>(state.range(0)), 64, 10);
    for (auto _ : state) {
        auto y = rgns::stack_forward(f.stack, f.x, f.graph);
        benchmark::DoNotOptimize(y.n1.a.data());
    }
}
BENCHMARK(BM_stack_forward)->Arg(200)->Arg(1000);

void BM_stack_backward_recompute(benchmark::State& state) {
    auto f = make_fixture(200, 64, static_cast<int>(state.range(0)));
    const auto y = rgns::stack_forward(f.stack, f.x, f.graph);
    rgns::StackState<float> dy = y;
    for (auto _ : state) {
        auto grads = rgns::zeros_like(f.stack);
        auto dx = rgns::stack_backward(f.stack, y, dy, f.graph, grads);
        benchmark::DoNotOptimize(dx.n1.a.data());
    }
}
BENCHMARK(BM_stack_backward_recompute)->Arg(2)->Arg(10);

void BM_stack_backward_stored(benchmark::State& state) {
    auto f = make_fixture(200, 64, static_cast<int>(state.range(0)));
    const auto y = rgns::stack_forward(f.stack, f.x, f.graph);
    rgns::StackState<float> dy = y;
    for (auto _ : state) {
        auto grads = rgns::zeros_like(f.stack);
        auto dx = rgns::stack_backward_stored(f.stack, f.x, dy, f.graph, grads);
        benchmark::DoNotOptimize(dx.n1.a.data());
    }
}
BENCHMARK(BM_stack_backward_stored)->Arg(2)->Arg(10);

}  // namespace
