#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qv::cpa {

enum class Instruments {
    kConstantAndLag,  // h_{t-1} = (1, dL_{t-1}), q = 2
    kConstant,        // h = 1, q = 1 (diagnostic)
};

struct CpaResult {
    double wald = 0.0;
    double p_value = 1.0;
    int q = 2;
    std::size_t n = 0;           // observations entering the statistic
    std::vector<double> beta;    // OLS of dL_t on h_{t-1}
    std::vector<double> fitted;  // h_{t-1} beta, aligned with the last n loss differences
    // Share of predicted loss differences below zero: how often model 1 is
    // expected to beat model 2. Exact zeros count for neither model.
    double performance_share = 0.0;
    // Share of realised loss differences below zero, over all T dates.
    double loss_win_share = 0.0;
    double mean_difference = 0.0;
    bool degenerate = false;
};

/// Giacomini-White conditional predictive ability test on two loss series
/// (model 1 minus model 2). Requires T >= 30.
[[nodiscard]] CpaResult cpa_test(std::span<const double> loss1, std::span<const double> loss2,
                                 Instruments instruments = Instruments::kConstantAndLag);

/// Same test on a precomputed loss-difference series.
[[nodiscard]] CpaResult cpa_test(std::span<const double> loss_difference,
                                 Instruments instruments = Instruments::kConstantAndLag);

/// Trailing mean; the first window - 1 entries are kMissing.
[[nodiscard]] std::vector<double> rolling_mean(std::span<const double> series, std::size_t window);

/// "Significantly better" rule for summary tables.
[[nodiscard]] inline bool significantly_better(const CpaResult& r, double level = 0.1) noexcept {
    return !r.degenerate && r.p_value < level && r.performance_share > 0.5;
}

}  // namespace qv::cpa
