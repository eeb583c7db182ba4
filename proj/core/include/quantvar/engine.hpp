#pragma once

#include "quantvar/backtest.hpp"
#include "quantvar/cpa.hpp"
#include "quantvar/data.hpp"
#include "quantvar/forest.hpp"
#include "quantvar/parametric.hpp"
#include "quantvar/stats.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qv::engine {

enum class ModelKind { kGrf, kQrf, kQr, kCav, kGarch, kGjr, kHist, kNormFit, kGrfX, kQrfX, kQrX, kGarchX };

enum class CovariateSet { kNone, kBaseline, kExtended };

struct ModelSpec {
    std::string name;
    ModelKind kind = ModelKind::kGrf;
    CovariateSet covariates = CovariateSet::kBaseline;
    // Explicit column list; overrides `covariates` when nonempty (used by
    // the covariate-selection study).
    std::vector<std::string> columns;
    std::size_t num_trees = 500;
    std::size_t min_node_size = 5;
    parametric::SavOptions sav;
    parametric::GarchOptions garch;
};

/// Parses one of GRF, QRF, QR, CAV, GARCH, GJR-GARCH, Hist, NormFit,
/// GRF-X, QRF-X, QR-X, GARCH-X.
[[nodiscard]] ModelSpec model_spec(std::string_view name);
[[nodiscard]] const std::vector<std::string>& all_model_names();
[[nodiscard]] bool is_forest(ModelKind kind) noexcept;

/// Baseline covariate names: ret_lag1 and the lagged SDs.
[[nodiscard]] std::vector<std::string> baseline_columns();

/// Columns of `matrix` a model consumes (empty for returns-only models).
/// Throws MissingCovariate when an -X model meets a matrix without externals.
[[nodiscard]] std::vector<std::string> model_columns(const ModelSpec& spec, const data::FeatureMatrix& matrix);

struct RollingConfig {
    std::size_t window = 500;
    std::size_t refit_stride = 1;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t num_threads = 1;  // forest tree parallelism
    // Importance trace for forest models: every `importance_stride` forecasts
    // (0 disables), with d_max and decay as in the importance report.
    std::size_t importance_stride = 0;
    std::size_t importance_depth = 5;
    double importance_decay = 2.0;
    // Where to save the last fitted forest (empty disables).
    std::string forest_cache_path;

    void validate() const;
};

struct ImportanceSnapshot {
    std::size_t index = 0;  // forecast position
    std::vector<double> importance;
};

struct ForecastSeries {
    std::string asset;
    std::string model;
    double alpha = 0.05;
    std::vector<Date> dates;
    std::vector<double> forecasts;
    std::vector<double> realized;
    std::vector<std::uint8_t> failed;  // estimation failed; forecast carried forward
    std::vector<std::uint8_t> refit;   // parameters re-estimated at this step
    std::vector<std::string> importance_names;
    std::vector<ImportanceSnapshot> importance;

    [[nodiscard]] std::size_t size() const noexcept { return forecasts.size(); }
    [[nodiscard]] std::size_t failures() const noexcept;
    [[nodiscard]] std::vector<int> hits() const;
};

/// One-step-ahead forecasts for rows [begin, end) of `matrix`; each forecast
/// at row t is fitted on rows t - window .. t - 1 only. begin defaults to
/// `window`, end to the number of rows.
[[nodiscard]] ForecastSeries rolling_forecast(const data::FeatureMatrix& matrix, const ModelSpec& spec,
                                              const RollingConfig& config, std::optional<std::size_t> begin = {},
                                              std::optional<std::size_t> end = {});

/// Rolling forecasts of a pure return series (feature rows built with the
/// given spec first).
[[nodiscard]] ForecastSeries rolling_forecast(std::span<const double> returns, const data::FeatureSpec& features,
                                              const ModelSpec& spec, const RollingConfig& config);

[[nodiscard]] std::vector<double> check_losses(const ForecastSeries& series);

// ---------------------------------------------------------------- evaluation

struct EvalReport {
    std::string asset;
    std::string period;
    std::string model;
    double alpha = 0.05;
    std::size_t window = 0;
    backtest::EvalSummary summary;
    std::size_t failures = 0;
    double mean_check_loss = 0.0;
};

[[nodiscard]] EvalReport evaluate_series(const ForecastSeries& series, std::string period, std::size_t window);

struct PairReport {
    std::string asset;
    std::string period;
    std::string model1;
    std::string model2;
    double alpha = 0.05;
    cpa::CpaResult result;
};

[[nodiscard]] PairReport compare_series(const ForecastSeries& a, const ForecastSeries& b, std::string period);

// ---------------------------------------------------------------- aggregates

/// Median of each (group key) cell; empty cells are absent from the map.
[[nodiscard]] double median_or_missing(std::vector<double> values);

struct DqMedianRow {
    std::string period;
    std::string group;  // empty when ungrouped
    std::string model;
    double alpha = 0.05;
    std::size_t assets = 0;
    double median_p = 0.0;
};

/// Median DQ p-value per (period, group, model, alpha). `group_of` maps an
/// asset to its group label; pass nullptr for a single group.
[[nodiscard]] std::vector<DqMedianRow> summarize_dq_medians(
    const std::vector<EvalReport>& reports,
    const std::function<std::string(const std::string& period, const std::string& asset)>& group_of = nullptr);

struct Split {
    std::vector<std::size_t> high;  // indices into the input, descending value
    std::vector<std::size_t> low;
    double threshold = 0.0;         // smallest value of the high set
};

/// Sort descending and cut at the largest consecutive gap (earliest wins).
[[nodiscard]] Split split_steepest_decay(std::span<const double> values);

/// An asset joins the low group when at least `min_wins` of `rivals` beat
/// GRF (performance share of GRF below one half).
[[nodiscard]] bool grf_outperformed(const std::vector<PairReport>& pairs, const std::string& asset,
                                    const std::string& period, double alpha,
                                    const std::vector<std::string>& rivals = {"QR", "CAV", "GJR-GARCH"},
                                    std::size_t min_wins = 2);

struct RatioRow {
    std::string covariate;
    double low_mean = kMissing;
    double high_mean = kMissing;
    double ratio = kMissing;  // missing when either group is empty or the high mean is zero
    bool defined = false;
};

/// Per covariate, mean over the low group of each asset's median covariate
/// value divided by the same mean over the high group.
[[nodiscard]] std::vector<RatioRow> group_covariate_ratio(
    const std::map<std::string, std::map<std::string, double>>& asset_medians,
    const std::vector<std::string>& low, const std::vector<std::string>& high);

}  // namespace qv::engine
