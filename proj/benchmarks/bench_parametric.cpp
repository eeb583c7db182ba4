#include "quantvar/parametric.hpp"
#include "quantvar/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

const std::vector<double>& returns() {
    static const auto s = qv::sim::simulate_garch({}, 1000, false, 7);
    return s.returns;
}

void BM_QuantileRegression(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto& r = returns();
    std::vector<double> x, y;
    for (std::size_t t = 1; t <= n; ++t) {
        x.push_back(r[t - 1]);
        x.push_back(std::abs(r[t - 1]));
        y.push_back(r[t]);
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(qv::parametric::fit_quantile_regression(x, 2, y, {"lag", "abs_lag"}, 0.05));
}
BENCHMARK(BM_QuantileRegression)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Garch(benchmark::State& state) {
    const std::span<const double> r(returns().data(), 500);
    for (auto _ : state) benchmark::DoNotOptimize(qv::parametric::fit_garch(r, qv::parametric::GarchKind::kGjr));
}
BENCHMARK(BM_Garch)->Unit(benchmark::kMillisecond);

void BM_CaviarSav(benchmark::State& state) {
    const std::span<const double> r(returns().data(), 500);
    for (auto _ : state) benchmark::DoNotOptimize(qv::parametric::fit_caviar_sav(r, 0.05));
}
BENCHMARK(BM_CaviarSav)->Unit(benchmark::kMillisecond);

}  // namespace
