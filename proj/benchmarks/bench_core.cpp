#include <benchmark/benchmark.h>

#include <cmath>

#include "habit/hjb.hpp"
#include "habit/model.hpp"
#include "habit/philox.hpp"
#include "habit/sde.hpp"

using namespace habit;

namespace {

ModelParams baseline() {
    return {0.02, 0.3, 0.1, 0.1, 0.05, 2.0, 0.5, 1.0};
}

void BM_optimal_consumption(benchmark::State& state) {
    const ModelParams p = baseline();
    double pk = 1.7, ph = -0.4;
    for (auto _ : state) {
        benchmark::DoNotOptimize(optimal_consumption({1.3, 0.7}, pk, ph, p));
        pk += 1e-9;  // defeat value caching
    }
}
BENCHMARK(BM_optimal_consumption);

void BM_hamiltonian_G(benchmark::State& state) {
    const ModelParams p = baseline();
    double pk = 1.7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(hamiltonian_G({1.3, 0.7}, pk, -0.4, p));
        pk += 1e-9;
    }
}
BENCHMARK(BM_hamiltonian_G);

void BM_normal_pair(benchmark::State& state) {
    std::uint64_t step = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(normal_pair(42, 1, ++step));
    }
}
BENCHMARK(BM_normal_pair);

void BM_exact_path(benchmark::State& state) {
    const ModelParams p = baseline();
    const TimeGrid grid{1.0, std::size_t(state.range(0))};
    std::uint64_t path = 0;
    for (auto _ : state) {
        auto noise = make_brownian_pair(grid, 7, ++path);
        auto lb = lower_bound_strategy(1.0, noise, grid, p);
        auto bundle = make_bundle(1.0, 1.0, std::move(lb), std::move(noise), p);
        benchmark::DoNotOptimize(bundle.k.back());
    }
    state.SetItemsProcessed(state.iterations() * grid.n_steps);
}
BENCHMARK(BM_exact_path)->Arg(1000)->Arg(10000);

void BM_policy_evaluation(benchmark::State& state) {
    const ModelParams p = baseline();
    GridSpec g = GridSpec::standard();
    g.n_x = std::size_t(state.range(0));
    g.n_y = g.n_x;
    ValueField v;
    v.grid = g;
    v.v.resize(g.size());
    for (std::size_t i = 0; i < g.n_x; ++i)
        for (std::size_t j = 0; j < g.n_y; ++j)
            v.v[g.index(i, j)] =
                lower_bound_rhs(std::exp(g.x(i)), std::exp(g.y(j)), 1.0, p);
    const PolicyField pol = policy_improvement(v, p);
    for (auto _ : state) {
        auto out = policy_evaluation(pol, p, 1e-8);
        benchmark::DoNotOptimize(out.v[0]);
    }
}
BENCHMARK(BM_policy_evaluation)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

void BM_solve_hjb(benchmark::State& state) {
    const ModelParams p = baseline();
    GridSpec g = GridSpec::standard();
    g.n_x = std::size_t(state.range(0));
    g.n_y = g.n_x;
    for (auto _ : state) {
        auto sol = solve_hjb(g, p, {1e-6, 100});
        benchmark::DoNotOptimize(sol.residual);
    }
}
BENCHMARK(BM_solve_hjb)->Arg(65)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
