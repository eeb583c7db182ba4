#include "quantvar/forest.hpp"
#include "quantvar/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Data {
    std::vector<double> x, y;
    std::vector<std::string> names{"ret_lag1", "sd_3", "sd_7", "sd_30", "sd_60"};
};

Data make_data(std::size_t n) {
    auto rng = qv::make_engine(1, {});
    std::normal_distribution<double> z;
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 5; ++j) d.x.push_back(z(rng));
        d.y.push_back((0.5 + std::abs(d.x[i * 5 + 1])) * z(rng));
    }
    return d;
}

void BM_FitGrf(benchmark::State& state) {
    const auto d = make_data(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto f = qv::forest::fit_forest(d.x, 5, d.y, d.names, qv::forest::ForestConfig::grf(0.05, 100, 3));
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_FitGrf)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FitQrf(benchmark::State& state) {
    const auto d = make_data(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto f = qv::forest::fit_forest(d.x, 5, d.y, d.names, qv::forest::ForestConfig::qrf(100, 3));
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_FitQrf)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_PredictQuantile(benchmark::State& state) {
    const auto d = make_data(500);
    const auto f = qv::forest::fit_forest(d.x, 5, d.y, d.names, qv::forest::ForestConfig::grf(0.05, 100, 3));
    const std::vector<double> q{0.1, -0.3, 1.2, 0.0, 0.4};
    for (auto _ : state) benchmark::DoNotOptimize(qv::forest::predict_quantile(f, q, 0.05));
}
BENCHMARK(BM_PredictQuantile)->Unit(benchmark::kMicrosecond);

}  // namespace
