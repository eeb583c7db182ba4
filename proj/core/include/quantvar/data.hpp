#pragma once

#include "quantvar/date.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qv::data {

/// Canonical names of the seven on-chain covariates, in table order.
inline constexpr std::array<std::string_view, 7> kExternalNames = {
    "Active_Users", "Total_Users", "Total_Users_USD100", "Total_Users_USD10", "SER", "Transactions", "Velocity"};

inline constexpr std::array<int, 4> kDefaultSdWindows = {3, 7, 30, 60};

/// Maps canonical fields to the header names accepted for them. The first
/// alias present in a file wins.
struct ColumnMap {
    std::vector<std::string> date = {"time", "date"};
    std::vector<std::string> price = {"PriceUSD", "price"};
    std::vector<std::string> market_cap = {"CapMrktCurUSD"};
    std::map<std::string, std::vector<std::string>> externals;

    /// Defaults matching coinmetrics community-data codings; canonical names
    /// are also accepted so normalized files load with the same map.
    [[nodiscard]] static ColumnMap coinmetrics();
};

struct AssetSeries {
    std::string asset_id;
    std::vector<Date> dates;    // one per price
    std::vector<double> prices;
    std::vector<double> returns;  // returns[i] = ln(p[i+1]) - ln(p[i]), dated dates[i+1]
    std::map<std::string, std::vector<double>> externals;  // aligned to dates, kMissing where absent
    std::vector<double> market_cap;  // aligned to dates; grouping only, never a covariate

    [[nodiscard]] Date return_date(std::size_t i) const { return dates.at(i + 1); }
    [[nodiscard]] std::size_t external_count() const noexcept { return externals.size(); }
};

/// Reads a coinmetrics-style CSV. Rows with a missing or non-positive price
/// are dropped; the remaining rows are treated as consecutive observations.
[[nodiscard]] AssetSeries load_coinmetrics_csv(const std::string& path, const std::string& asset_id,
                                               const ColumnMap& columns = ColumnMap::coinmetrics());
[[nodiscard]] AssetSeries load_coinmetrics_csv(std::istream& in, const std::string& source,
                                               const std::string& asset_id,
                                               const ColumnMap& columns = ColumnMap::coinmetrics());

/// Builds an AssetSeries from in-memory prices (validates and computes returns).
[[nodiscard]] AssetSeries make_series(std::string asset_id, std::vector<Date> dates, std::vector<double> prices,
                                      std::map<std::string, std::vector<double>> externals = {},
                                      std::vector<double> market_cap = {});

/// Writes the normalized form (date, price, market cap, canonical external names).
void write_asset_csv(std::ostream& out, const AssetSeries& series);

[[nodiscard]] std::vector<double> log_returns(std::span<const double> prices);

/// Trailing sample standard deviation (n - 1 denominator); the first
/// window - 1 entries are kMissing, as is any window touching a missing value.
[[nodiscard]] std::vector<double> rolling_sd(std::span<const double> returns, int window);

class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::vector<std::string> names, std::vector<Date> dates, std::vector<double> target,
                  std::vector<double> values);

    [[nodiscard]] std::size_t rows() const noexcept { return target_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return names_.size(); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
    [[nodiscard]] const std::vector<double>& target() const noexcept { return target_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * cols(), cols()};
    }
    [[nodiscard]] std::vector<double> column(std::string_view name) const;
    [[nodiscard]] std::size_t column_index(std::string_view name) const;
    [[nodiscard]] bool has_column(std::string_view name) const noexcept;

    [[nodiscard]] FeatureMatrix select_columns(const std::vector<std::string>& names) const;
    [[nodiscard]] FeatureMatrix slice_rows(std::size_t begin, std::size_t end) const;

private:
    std::vector<std::string> names_;
    std::vector<Date> dates_;
    std::vector<double> target_;
    std::vector<double> values_;  // row-major rows() x cols()
};

struct FeatureSpec {
    bool include_lagged_return = true;
    std::vector<int> sd_windows = {kDefaultSdWindows.begin(), kDefaultSdWindows.end()};
    bool include_externals = false;
};

/// Pairs each return r_t with covariates observable at t-1: ret_lag1,
/// sd_k over the k returns ending at t-1, and optionally the seven
/// externals as of t-1. Rows with any missing value are dropped.
[[nodiscard]] FeatureMatrix build_feature_matrix(const AssetSeries& series, bool use_externals);
[[nodiscard]] FeatureMatrix build_feature_matrix(const AssetSeries& series, const FeatureSpec& spec);

/// Same construction for a bare return series (simulations). `dates` may be
/// empty, in which case consecutive synthetic dates from 2000-01-01 are used.
[[nodiscard]] FeatureMatrix build_feature_matrix(std::span<const double> returns, const FeatureSpec& spec,
                                                 std::span<const Date> dates = {});

void write_feature_matrix_csv(std::ostream& out, const FeatureMatrix& matrix);

struct PeriodSpec {
    std::string label;
    Date start;
    Date end;
};

/// The three market regimes analysed in the empirical study.
[[nodiscard]] std::vector<PeriodSpec> default_periods();

struct SliceBounds {
    std::size_t begin = 0;      // first training row
    std::size_t oos_begin = 0;  // first forecast row (first date >= start)
    std::size_t end = 0;        // one past the last forecast row
};

/// Locates rows whose date lies in [start, end] plus the train_len rows
/// preceding them. Throws InsufficientHistory when fewer than train_len rows
/// precede start or the data stop before the period ends.
[[nodiscard]] SliceBounds slice_bounds(std::span<const Date> dates, const PeriodSpec& period, std::size_t train_len);

struct PeriodSlice {
    FeatureMatrix matrix;
    std::size_t train_rows = 0;  // forecasts start at this row
};

[[nodiscard]] PeriodSlice slice_period(const FeatureMatrix& matrix, const PeriodSpec& period, std::size_t train_len);

}  // namespace qv::data
