#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qv::backtest {

struct HitSeries {
    std::vector<int> hits;  // g_t in {0, 1}
    double alpha = 0.05;

    [[nodiscard]] std::size_t size() const noexcept { return hits.size(); }
    [[nodiscard]] std::size_t count() const noexcept;
};

struct BacktestResult {
    std::string test_name;
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
    // DQ only: regressors dropped as constant-zero or collinear.
    std::vector<std::string> dropped;
};

/// g_t = 1{r_t < VaR_t}; ties are not hits.
[[nodiscard]] HitSeries hit_sequence(std::span<const double> returns, std::span<const double> forecasts, double alpha);

/// Actual over expected exceedances.
[[nodiscard]] double aoe(const HitSeries& hits);

/// Unconditional coverage likelihood ratio, chi^2_1.
[[nodiscard]] BacktestResult kupiec_test(const HitSeries& hits);

/// First-order Markov independence LR.
[[nodiscard]] double christoffersen_independence_lr(const HitSeries& hits);

/// Conditional coverage LR_uc + LR_ind, chi^2_2.
[[nodiscard]] BacktestResult christoffersen_test(const HitSeries& hits);

/// Dynamic quantile test: (g_t - alpha) on [1, g_{t-1..t-lags}, VaR_t, r_{t-1}^2].
[[nodiscard]] BacktestResult dq_test(const HitSeries& hits, std::span<const double> forecasts,
                                     std::span<const double> returns, int lags = 4);

/// Everything the evaluation tables need for one forecast series.
struct EvalSummary {
    std::size_t n = 0;
    std::size_t exceedances = 0;
    double aoe = 0.0;
    BacktestResult kupiec;
    BacktestResult christoffersen;
    BacktestResult dq;
};

[[nodiscard]] EvalSummary evaluate(std::span<const double> returns, std::span<const double> forecasts, double alpha);

}  // namespace qv::backtest
