#include "quantvar/data.hpp"

#include "quantvar/csv.hpp"
#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace qv::data {
namespace {

double parse_value(const std::string& text, bool& ok) {
    ok = true;
    std::string_view s = text;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null") return kMissing;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        ok = false;
        return kMissing;
    }
    return v;
}

std::size_t find_column(const csv::Table& t, const std::vector<std::string>& aliases) {
    for (const auto& a : aliases) {
        const std::size_t c = t.column(a);
        if (c != csv::npos) return c;
    }
    return csv::npos;
}

std::string covariate_name(int window) { return "sd_" + std::to_string(window); }

}  // namespace

ColumnMap ColumnMap::coinmetrics() {
    ColumnMap m;
    m.externals = {
        {"Active_Users", {"AdrActCnt", "Active_Users"}},
        {"Total_Users", {"AdrBalCnt", "Total_Users"}},
        {"Total_Users_USD100", {"AdrBalUSD100Cnt", "Total_Users_USD100"}},
        {"Total_Users_USD10", {"AdrBalUSD10Cnt", "Total_Users_USD10"}},
        {"SER", {"SER"}},
        {"Transactions", {"TxCnt", "Transactions"}},
        {"Velocity", {"VelCur1yr", "Velocity"}},
    };
    return m;
}

std::vector<double> log_returns(std::span<const double> prices) {
    std::vector<double> r;
    if (prices.size() < 2) return r;
    r.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i) r.push_back(std::log(prices[i]) - std::log(prices[i - 1]));
    return r;
}

AssetSeries make_series(std::string asset_id, std::vector<Date> dates, std::vector<double> prices,
                        std::map<std::string, std::vector<double>> externals, std::vector<double> market_cap) {
    if (dates.size() != prices.size()) throw Error(ErrorKind::kInvalidArgument, "dates and prices differ in length");
    if (prices.size() < 2) {
        throw Error(ErrorKind::kInsufficientData, asset_id + ": fewer than 2 valid prices");
    }
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i])) {
            throw Error(ErrorKind::kInvalidArgument, asset_id + ": prices must be positive");
        }
        if (i > 0 && !(dates[i - 1] < dates[i])) {
            throw Error(ErrorKind::kInvalidArgument, asset_id + ": dates must be strictly increasing");
        }
    }
    for (const auto& [name, col] : externals) {
        if (col.size() != dates.size()) {
            throw Error(ErrorKind::kInvalidArgument, asset_id + ": external '" + name + "' misaligned with dates");
        }
    }
    if (!market_cap.empty() && market_cap.size() != dates.size()) {
        throw Error(ErrorKind::kInvalidArgument, asset_id + ": market cap misaligned with dates");
    }
    AssetSeries s;
    s.asset_id = std::move(asset_id);
    s.returns = log_returns(prices);
    s.dates = std::move(dates);
    s.prices = std::move(prices);
    s.externals = std::move(externals);
    s.market_cap = std::move(market_cap);
    return s;
}

AssetSeries load_coinmetrics_csv(std::istream& in, const std::string& source, const std::string& asset_id,
                                 const ColumnMap& columns) {
    const csv::Table table = csv::read(in, source);
    const std::size_t date_col = find_column(table, columns.date);
    const std::size_t price_col = find_column(table, columns.price);
    if (date_col == csv::npos) throw ParseError(source, 1, "no date column");
    if (price_col == csv::npos) throw ParseError(source, 1, "no price column");
    const std::size_t cap_col = find_column(table, columns.market_cap);

    std::vector<std::pair<std::string, std::size_t>> ext_cols;
    for (const auto& [name, aliases] : columns.externals) {
        const std::size_t c = find_column(table, aliases);
        if (c != csv::npos) ext_cols.emplace_back(name, c);
    }

    std::vector<Date> dates;
    std::vector<double> prices;
    std::vector<double> caps;
    std::map<std::string, std::vector<double>> externals;
    for (const auto& [name, c] : ext_cols) externals[name];

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        const auto date = Date::parse(row[date_col]);
        if (!date) throw ParseError(source, line, "invalid date '" + row[date_col] + "'");
        bool ok = true;
        const double price = parse_value(row[price_col], ok);
        if (!ok) throw ParseError(source, line, "invalid price '" + row[price_col] + "'");
        if (is_missing(price) || !(price > 0.0)) continue;
        if (!dates.empty() && !(dates.back() < *date)) {
            throw ParseError(source, line, "dates not strictly increasing at " + date->to_string());
        }
        dates.push_back(*date);
        prices.push_back(price);
        if (cap_col != csv::npos) {
            const double cap = parse_value(row[cap_col], ok);
            if (!ok) throw ParseError(source, line, "invalid market cap '" + row[cap_col] + "'");
            caps.push_back(cap);
        }
        for (const auto& [name, c] : ext_cols) {
            const double v = parse_value(row[c], ok);
            if (!ok) throw ParseError(source, line, "invalid value '" + row[c] + "' in column " + table.header[c]);
            externals[name].push_back(v);
        }
    }
    if (prices.size() < 2) {
        throw Error(ErrorKind::kInsufficientData, source + ": fewer than 2 valid prices");
    }
    // A column with no observed value carries no information.
    std::erase_if(externals, [](const auto& kv) {
        return std::all_of(kv.second.begin(), kv.second.end(), [](double v) { return is_missing(v); });
    });
    if (std::all_of(caps.begin(), caps.end(), [](double v) { return is_missing(v); })) caps.clear();
    return make_series(asset_id, std::move(dates), std::move(prices), std::move(externals), std::move(caps));
}

AssetSeries load_coinmetrics_csv(const std::string& path, const std::string& asset_id, const ColumnMap& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
    return load_coinmetrics_csv(in, path, asset_id, columns);
}

void write_asset_csv(std::ostream& out, const AssetSeries& series) {
    std::vector<std::string> header = {"date", "price"};
    if (!series.market_cap.empty()) header.emplace_back("CapMrktCurUSD");
    for (const auto& [name, col] : series.externals) header.push_back(name);
    csv::write_row(out, header);
    for (std::size_t i = 0; i < series.dates.size(); ++i) {
        std::vector<std::string> row = {series.dates[i].to_string(), csv::format_number(series.prices[i])};
        if (!series.market_cap.empty()) row.push_back(csv::format_number(series.market_cap[i]));
        for (const auto& [name, col] : series.externals) row.push_back(csv::format_number(col[i]));
        csv::write_row(out, row);
    }
}

std::vector<double> rolling_sd(std::span<const double> returns, int window) {
    if (window < 2) throw Error(ErrorKind::kInvalidArgument, "rolling_sd window must be >= 2");
    const auto w = static_cast<std::size_t>(window);
    if (returns.size() < w) throw Error(ErrorKind::kInvalidArgument, "rolling_sd window longer than series");
    std::vector<double> out(returns.size(), kMissing);
    for (std::size_t t = w - 1; t < returns.size(); ++t) {
        const auto win = returns.subspan(t + 1 - w, w);
        if (std::any_of(win.begin(), win.end(), [](double v) { return is_missing(v); })) continue;
        out[t] = stats::sample_sd(win);
    }
    return out;
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> names, std::vector<Date> dates, std::vector<double> target,
                             std::vector<double> values)
    : names_(std::move(names)), dates_(std::move(dates)), target_(std::move(target)), values_(std::move(values)) {
    if (dates_.size() != target_.size() || values_.size() != target_.size() * names_.size()) {
        throw Error(ErrorKind::kInvalidArgument, "feature matrix dimensions inconsistent");
    }
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    throw Error(ErrorKind::kMissingCovariate, "no covariate column '" + std::string(name) + "'");
}

bool FeatureMatrix::has_column(std::string_view name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<double> FeatureMatrix::column(std::string_view name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(column_index(n));
    std::vector<double> vals;
    vals.reserve(rows() * idx.size());
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c : idx) vals.push_back(at(r, c));
    }
    return FeatureMatrix(names, dates_, target_, std::move(vals));
}

FeatureMatrix FeatureMatrix::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows()) throw Error(ErrorKind::kInvalidArgument, "row slice out of range");
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(end);
    const auto p = static_cast<std::ptrdiff_t>(cols());
    return FeatureMatrix(names_, {dates_.begin() + b, dates_.begin() + e}, {target_.begin() + b, target_.begin() + e},
                         {values_.begin() + b * p, values_.begin() + e * p});
}

namespace {

FeatureMatrix assemble(std::span<const double> returns, std::span<const Date> return_dates, const FeatureSpec& spec,
                       const std::map<std::string, std::vector<double>>* externals) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;  // aligned with returns: value usable for target index t

    const std::size_t n = returns.size();
    if (spec.include_lagged_return) {
        names.emplace_back("ret_lag1");
        std::vector<double> lag(n, kMissing);
        for (std::size_t t = 1; t < n; ++t) lag[t] = returns[t - 1];
        columns.push_back(std::move(lag));
    }
    for (int w : spec.sd_windows) {
        names.push_back(covariate_name(w));
        std::vector<double> lagged(n, kMissing);
        if (n >= static_cast<std::size_t>(w)) {
            const auto sd = rolling_sd(returns, w);
            for (std::size_t t = 1; t < n; ++t) lagged[t] = sd[t - 1];
        }
        columns.push_back(std::move(lagged));
    }
    if (externals != nullptr) {
        // externals are aligned to price dates; price index t is the end date of r_{t-1}.
        for (std::string_view name : kExternalNames) {
            const auto& src = externals->at(std::string(name));
            names.emplace_back(name);
            std::vector<double> col(n, kMissing);
            for (std::size_t t = 0; t < n; ++t) col[t] = src[t];
            columns.push_back(std::move(col));
        }
    }
    if (names.empty()) throw Error(ErrorKind::kInvalidArgument, "feature spec selects no covariates");

    std::vector<Date> dates;
    std::vector<double> target;
    std::vector<double> values;
    for (std::size_t t = 0; t < n; ++t) {
        if (is_missing(returns[t])) continue;
        bool complete = true;
        for (const auto& col : columns) {
            if (is_missing(col[t])) {
                complete = false;
                break;
            }
        }
        if (!complete) continue;
        dates.push_back(return_dates[t]);
        target.push_back(returns[t]);
        for (const auto& col : columns) values.push_back(col[t]);
    }
    return FeatureMatrix(std::move(names), std::move(dates), std::move(target), std::move(values));
}

}  // namespace

FeatureMatrix build_feature_matrix(const AssetSeries& series, const FeatureSpec& spec) {
    if (series.returns.size() < 62) {
        throw Error(ErrorKind::kInsufficientData,
                    series.asset_id + ": need at least 62 returns, have " + std::to_string(series.returns.size()));
    }
    if (spec.include_externals) {
        std::vector<std::string> missing;
        for (std::string_view name : kExternalNames) {
            if (!series.externals.contains(std::string(name))) missing.emplace_back(name);
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw Error(ErrorKind::kMissingCovariate, series.asset_id + ": missing external covariates: " + list);
        }
    }
    std::vector<Date> rdates(series.dates.begin() + 1, series.dates.end());
    return assemble(series.returns, rdates, spec, spec.include_externals ? &series.externals : nullptr);
}

FeatureMatrix build_feature_matrix(const AssetSeries& series, bool use_externals) {
    FeatureSpec spec;
    spec.include_externals = use_externals;
    return build_feature_matrix(series, spec);
}

FeatureMatrix build_feature_matrix(std::span<const double> returns, const FeatureSpec& spec,
                                   std::span<const Date> dates) {
    if (spec.include_externals) {
        throw Error(ErrorKind::kMissingCovariate, "bare return series carry no external covariates");
    }
    std::vector<Date> synthetic;
    if (dates.empty()) {
        synthetic.reserve(returns.size());
        const Date origin(2000, 1, 1);
        for (std::size_t i = 0; i < returns.size(); ++i) synthetic.push_back(origin.plus_days(static_cast<long>(i)));
        dates = synthetic;
    }
    if (dates.size() != returns.size()) throw Error(ErrorKind::kInvalidArgument, "dates and returns differ in length");
    return assemble(returns, dates, spec, nullptr);
}

void write_feature_matrix_csv(std::ostream& out, const FeatureMatrix& m) {
    std::vector<std::string> header = {"date", "target"};
    header.insert(header.end(), m.names().begin(), m.names().end());
    csv::write_row(out, header);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row = {m.dates()[r].to_string(), csv::format_number(m.target()[r])};
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(csv::format_number(m.at(r, c)));
        csv::write_row(out, row);
    }
}

std::vector<PeriodSpec> default_periods() {
    return {
        {"P1", Date(2015, 8, 22), Date(2017, 12, 21)},
        {"P2", Date(2017, 12, 22), Date(2020, 11, 5)},
        {"P3", Date(2020, 11, 6), Date(2022, 3, 20)},
    };
}

SliceBounds slice_bounds(std::span<const Date> dates, const PeriodSpec& period, std::size_t train_len) {
    if (!(period.start < period.end)) {
        throw Error(ErrorKind::kInvalidArgument, "period '" + period.label + "' has start >= end");
    }
    const auto first = std::lower_bound(dates.begin(), dates.end(), period.start);
    const auto last = std::upper_bound(dates.begin(), dates.end(), period.end);
    if (first == dates.end() || first >= last) {
        throw Error(ErrorKind::kInsufficientHistory, "period '" + period.label + "' does not overlap the data");
    }
    SliceBounds b;
    b.oos_begin = static_cast<std::size_t>(first - dates.begin());
    b.end = static_cast<std::size_t>(last - dates.begin());
    if (b.oos_begin < train_len) {
        throw Error(ErrorKind::kInsufficientHistory,
                    "period '" + period.label + "': only " + std::to_string(b.oos_begin) + " rows before start, need " +
                        std::to_string(train_len));
    }
    if (dates.back() < period.end) {
        throw Error(ErrorKind::kInsufficientHistory,
                    "period '" + period.label + "': data end " + dates.back().to_string() + " before period end");
    }
    b.begin = b.oos_begin - train_len;
    return b;
}

PeriodSlice slice_period(const FeatureMatrix& matrix, const PeriodSpec& period, std::size_t train_len) {
    const SliceBounds b = slice_bounds(matrix.dates(), period, train_len);
    return {matrix.slice_rows(b.begin, b.end), train_len};
}

}  // namespace qv::data
