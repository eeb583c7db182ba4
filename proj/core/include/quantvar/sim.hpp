#pragma once

#include "quantvar/data.hpp"
#include "quantvar/engine.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qv::sim {

enum class DgpKind { kGarchNormal, kGarchT5, kSavRegime, kGarchAssetFit };

[[nodiscard]] std::string to_string(DgpKind kind);
[[nodiscard]] DgpKind parse_dgp(std::string_view text);

struct GarchSimParams {
    double omega = 1e-4;
    double a = 0.1;
    double b = 0.8;
};

/// VaR_{t+1} = g0 + g1 VaR_t + g2 |r0_t - g3| driven by a regime-switching
/// normal series r0 whose standard deviation is chi2_2 / sigma_divisor,
/// redrawn every regime_length observations. Returns are then drawn as
/// N(0, sd = VaR_t / Phi^{-1}(alpha)).
struct SavSimParams {
    double g0 = -0.001;
    double g1 = 0.9;
    double g2 = -0.2;
    double g3 = 0.0;
    double alpha = 0.05;
    std::size_t regime_length = 100;
    double sigma_divisor = 65.0;
};

struct DgpSpec {
    DgpKind kind = DgpKind::kGarchNormal;
    GarchSimParams garch;
    SavSimParams sav;
    std::string label;
};

struct SimSeries {
    std::vector<double> returns;
    std::vector<double> sigma;     // conditional SD (GARCH) or implied SD (SAV)
    std::vector<double> true_var;  // SAV only: VaR_t at sav.alpha
};

inline constexpr std::size_t kBurnIn = 500;

/// r_t = z_t sigma_t after a burn-in from the stationary variance; t5
/// innovations are rescaled to unit variance.
[[nodiscard]] SimSeries simulate_garch(const GarchSimParams& params, std::size_t n, bool student_t5,
                                       std::uint64_t seed);

/// The regime-driven pre-sample r0 used by the SAV DGP.
[[nodiscard]] std::vector<double> simulate_regime_normal(std::size_t n, std::size_t regime_length,
                                                         double sigma_divisor, std::uint64_t seed);

[[nodiscard]] SimSeries simulate_sav(const SavSimParams& params, std::size_t n, std::uint64_t seed);

/// gamma fixture: a SAV fit to a pilot regime series (fixed seed).
[[nodiscard]] SavSimParams sav_fixture_params(double alpha, std::uint64_t seed = 20150822, std::size_t n = 2000);

[[nodiscard]] SimSeries simulate(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

/// True conditional alpha-quantile of each simulated return.
[[nodiscard]] std::vector<double> oracle_var(const DgpSpec& spec, const SimSeries& series, double alpha);

/// GARCH(1,1) QMLE on a full asset history as a simulation DGP.
[[nodiscard]] DgpSpec fit_asset_garch_for_sim(const data::AssetSeries& asset);

// ---------------------------------------------------------------- Monte Carlo

struct McProtocol {
    DgpSpec dgp;
    std::size_t reps = 50;
    std::size_t n = 2000;  // returns entering the feature matrix
    std::vector<std::size_t> windows = {500};
    std::vector<double> levels = {0.05};
    std::vector<std::string> models = {"GRF", "QRF"};
    bool include_oracle = true;
    std::vector<std::pair<std::string, std::string>> cpa_pairs;
    double significance = 0.05;
    std::size_t num_trees = 100;
    std::size_t refit_stride = 1;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

struct McRepRecord {
    std::size_t rep = 0;
    std::string model;
    std::size_t window = 0;
    double alpha = 0.0;
    bool failed = false;
    std::size_t failed_steps = 0;
    double aoe = 0.0;
    double p_dq = 1.0;
    double p_kupiec = 1.0;
    double p_christoffersen = 1.0;
};

struct McCell {
    std::string model;
    std::size_t window = 0;
    double alpha = 0.0;
    std::size_t reps = 0;         // reps entering the averages
    std::size_t failed_reps = 0;  // excluded because of estimation failures
    double mean_aoe = 0.0;
    double reject_dq = 0.0;
    double reject_kupiec = 0.0;
    double reject_christoffersen = 0.0;
    double mean_p_dq = 0.0;
    double mean_p_kupiec = 0.0;
    double mean_p_christoffersen = 0.0;
};

struct McCpaRecord {
    std::size_t rep = 0;
    std::string model1;
    std::string model2;
    std::size_t window = 0;
    double alpha = 0.0;
    double p_value = 1.0;
    double performance_share = 0.0;
    double loss_win_share = 0.0;
};

struct McCpaCell {
    std::string model1;
    std::string model2;
    std::size_t window = 0;
    double alpha = 0.0;
    std::size_t reps = 0;
    double mean_p = 0.0;
    std::size_t significant = 0;  // p < 0.1
    double mean_share = 0.0;
    double mean_loss_win_share = 0.0;
};

struct McResult {
    std::vector<McRepRecord> records;
    std::vector<McCell> cells;
    std::vector<McCpaRecord> cpa_records;
    std::vector<McCpaCell> cpa_cells;
};

/// Model name reserved for the DGP's true conditional VaR.
inline constexpr std::string_view kOracleModel = "Oracle";

[[nodiscard]] McResult run_monte_carlo(const McProtocol& protocol);

// ---------------------------------------------------------------- covariate study

struct CovariateStudy {
    SavSimParams params;
    std::size_t reps = 20;
    std::size_t n = 2000;
    std::size_t window = 500;
    std::size_t num_trees = 100;
    std::size_t refit_stride = 1;
    std::vector<std::vector<int>> sets = default_covariate_sets();
    std::uint64_t seed = 1;
    std::size_t jobs = 1;

    [[nodiscard]] static std::vector<std::vector<int>> default_covariate_sets();
};

struct CovariateRow {
    std::vector<int> set;
    std::string label;  // e.g. "{3,7,30}"
    double mean_mse = 0.0;
    std::vector<double> rep_mse;
};

/// GRF on lagged-SD covariate sets against the true SAV VaR.
[[nodiscard]] std::vector<CovariateRow> covariate_selection_study(const CovariateStudy& study);

[[nodiscard]] std::string set_label(const std::vector<int>& set);

}  // namespace qv::sim
