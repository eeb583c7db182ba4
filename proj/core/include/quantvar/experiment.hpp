#pragma once

#include "quantvar/data.hpp"
#include "quantvar/engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qv::engine {

struct AssetSource {
    std::string id;
    std::string path;  // resolved against the manifest directory
};

/// Parsed experiment configuration (schema version 1).
struct Manifest {
    int schema_version = 1;
    std::vector<AssetSource> assets;
    std::vector<std::string> models;
    std::vector<double> levels = {0.05};
    std::vector<std::size_t> windows = {500};
    std::vector<data::PeriodSpec> periods = data::default_periods();
    std::uint64_t seed = 1;
    std::string output_dir = "results";
    std::size_t num_trees = 500;
    std::size_t min_node_size = 5;
    std::size_t refit_stride = 1;
    std::size_t importance_stride = 30;
    std::vector<std::size_t> loss_windows = {30, 180};
    std::string reference_model = "GRF";
    std::vector<std::string> group_rivals = {"QR", "CAV", "GJR-GARCH"};
};

/// Parses and validates; unknown keys, bad values and missing files are
/// collected and raised together as one Validation error. Relative paths are
/// resolved against `base_dir`.
[[nodiscard]] Manifest parse_manifest(std::string_view json_text, const std::string& base_dir);
[[nodiscard]] Manifest load_manifest(const std::string& path);

struct RunOptions {
    bool resume = false;
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<std::size_t> window;
    std::string cache_dir;  // forest serialization; empty disables
    std::ostream* log = nullptr;
};

struct RunSummary {
    std::size_t tasks = 0;
    std::size_t computed = 0;
    std::size_t resumed = 0;
    std::size_t skipped = 0;  // asset/period/model combinations without data
    std::vector<std::string> notes;
};

/// Runs every (period, asset, level, window, model) task, evaluates and
/// compares the forecasts, and writes the report tables.
RunSummary run_experiment(const Manifest& manifest, const RunOptions& options);

enum class ReportKind { kDqMedian, kCpaGrid, kLossSeries, kImportance };

[[nodiscard]] ReportKind parse_report_kind(std::string_view text);

/// Rebuilds one family of report tables from a results directory. Returns
/// the files written.
std::vector<std::string> write_report(const std::string& results_dir, ReportKind kind,
                                      const std::vector<std::size_t>& loss_windows = {30, 180});

/// Forecast CSV round trip (used by --resume and the report builders).
void write_forecast_csv(const std::string& path, const ForecastSeries& series);
[[nodiscard]] ForecastSeries read_forecast_csv(const std::string& path);

/// Stars for a p-value: *** < 0.01, ** < 0.05, * < 0.1.
[[nodiscard]] std::string significance_stars(double p);

}  // namespace qv::engine
