#include "quantvar/engine.hpp"

#include "quantvar/error.hpp"
#include "quantvar/rng.hpp"

#include <algorithm>
#include <cmath>

namespace qv::engine {
namespace {

struct NamedKind {
    std::string_view name;
    ModelKind kind;
    CovariateSet covariates;
};

constexpr NamedKind kModels[] = {
    {"GRF", ModelKind::kGrf, CovariateSet::kBaseline},
    {"QRF", ModelKind::kQrf, CovariateSet::kBaseline},
    {"QR", ModelKind::kQr, CovariateSet::kBaseline},
    {"CAV", ModelKind::kCav, CovariateSet::kNone},
    {"GARCH", ModelKind::kGarch, CovariateSet::kNone},
    {"GJR-GARCH", ModelKind::kGjr, CovariateSet::kNone},
    {"Hist", ModelKind::kHist, CovariateSet::kNone},
    {"NormFit", ModelKind::kNormFit, CovariateSet::kNone},
    {"GRF-X", ModelKind::kGrfX, CovariateSet::kExtended},
    {"QRF-X", ModelKind::kQrfX, CovariateSet::kExtended},
    {"QR-X", ModelKind::kQrX, CovariateSet::kExtended},
    {"GARCH-X", ModelKind::kGarchX, CovariateSet::kExtended},
};

// Estimation state carried between steps of one rolling run.
struct Fitted {
    std::optional<forest::QuantileForest> forest;
    parametric::QrModel qr;
    parametric::SavModel sav;
    parametric::GarchFit garch;
    double constant = 0.0;  // Hist / NormFit forecast
    // Recursion state after the previous forecast.
    double prev_forecast = 0.0;
    double prev_variance = 0.0;
};

bool recoverable(const Error& e) {
    return e.kind() == ErrorKind::kEstimationFailure || e.kind() == ErrorKind::kSingularDesign;
}

}  // namespace

ModelSpec model_spec(std::string_view name) {
    for (const auto& m : kModels) {
        if (m.name == name) {
            ModelSpec s;
            s.name = std::string(m.name);
            s.kind = m.kind;
            s.covariates = m.covariates;
            return s;
        }
    }
    throw Error(ErrorKind::kInvalidArgument, "unknown model '" + std::string(name) + "'");
}

const std::vector<std::string>& all_model_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& m : kModels) out.emplace_back(m.name);
        return out;
    }();
    return names;
}

bool is_forest(ModelKind kind) noexcept {
    return kind == ModelKind::kGrf || kind == ModelKind::kQrf || kind == ModelKind::kGrfX || kind == ModelKind::kQrfX;
}

std::vector<std::string> baseline_columns() {
    std::vector<std::string> out{"ret_lag1"};
    for (int w : data::kDefaultSdWindows) out.push_back("sd_" + std::to_string(w));
    return out;
}

std::vector<std::string> model_columns(const ModelSpec& spec, const data::FeatureMatrix& matrix) {
    if (!spec.columns.empty()) {
        for (const auto& c : spec.columns) (void)matrix.column_index(c);
        return spec.columns;
    }
    switch (spec.covariates) {
        case CovariateSet::kNone: return {};
        case CovariateSet::kBaseline: {
            auto cols = baseline_columns();
            for (const auto& c : cols) (void)matrix.column_index(c);
            return cols;
        }
        case CovariateSet::kExtended: {
            std::vector<std::string> cols;
            if (spec.kind != ModelKind::kGarchX) cols = baseline_columns();
            std::vector<std::string> missing;
            for (auto name : data::kExternalNames) {
                if (matrix.has_column(name)) cols.emplace_back(name);
                else missing.emplace_back(name);
            }
            if (!missing.empty()) {
                std::string msg = spec.name + " needs external covariates; missing:";
                for (const auto& m : missing) msg += " " + m;
                throw Error(ErrorKind::kMissingCovariate, msg);
            }
            for (const auto& c : cols) (void)matrix.column_index(c);
            return cols;
        }
    }
    return {};
}

void RollingConfig::validate() const {
    if (window < 100) throw Error(ErrorKind::kInvalidArgument, "rolling window must be at least 100");
    if (refit_stride < 1) throw Error(ErrorKind::kInvalidArgument, "refit stride must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must lie in (0,1)");
}

std::size_t ForecastSeries::failures() const noexcept {
    return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), std::uint8_t{1}));
}

std::vector<int> ForecastSeries::hits() const {
    return backtest::hit_sequence(realized, forecasts, alpha).hits;
}

ForecastSeries rolling_forecast(const data::FeatureMatrix& matrix, const ModelSpec& spec, const RollingConfig& config,
                                std::optional<std::size_t> begin_row, std::optional<std::size_t> end_row) {
    config.validate();
    const std::size_t l = config.window;
    const std::size_t b = begin_row.value_or(l);
    const std::size_t e = end_row.value_or(matrix.rows());
    if (b < l) throw Error(ErrorKind::kInsufficientHistory, "forecasts need `window` rows of history");
    if (e > matrix.rows() || b >= e)
        throw Error(ErrorKind::kInsufficientData, "no rows to forecast: data length must exceed the window");

    const std::vector<std::string> cols = model_columns(spec, matrix);
    const data::FeatureMatrix sub = cols.empty() ? data::FeatureMatrix{} : matrix.select_columns(cols);
    const std::size_t p = cols.size();
    const std::vector<double>& y = matrix.target();
    const double alpha = config.alpha;
    const ModelKind kind = spec.kind;

    ForecastSeries out;
    out.model = spec.name;
    out.alpha = alpha;
    if (is_forest(kind) && config.importance_stride > 0) out.importance_names = cols;

    Fitted fit;
    bool have_model = false;
    bool have_forecast = false;
    double last_forecast = 0.0;

    for (std::size_t t = b; t < e; ++t) {
        const std::size_t i = t - b;
        const std::size_t lo = t - l;
        const std::span<const double> window_y(y.data() + lo, l);
        const bool refit = !have_model || i % config.refit_stride == 0;
        double f = 0.0;
        bool failed = false;
        try {
            if (refit) {
                have_model = false;
                switch (kind) {
                    case ModelKind::kGrf:
                    case ModelKind::kGrfX:
                    case ModelKind::kQrf:
                    case ModelKind::kQrfX: {
                        const std::uint64_t seed = derive_seed(config.seed, {i});
                        forest::ForestConfig fc = (kind == ModelKind::kQrf || kind == ModelKind::kQrfX)
                                                      ? forest::ForestConfig::qrf(spec.num_trees, seed)
                                                      : forest::ForestConfig::grf(alpha, spec.num_trees, seed);
                        fc.min_node_size = spec.min_node_size;
                        fc.num_threads = config.num_threads;
                        fit.forest = forest::fit_forest(std::span<const double>(sub.values().data() + lo * p, l * p),
                                                        p, window_y, cols, fc);
                        break;
                    }
                    case ModelKind::kQr:
                    case ModelKind::kQrX:
                        fit.qr = parametric::fit_quantile_regression(
                            std::span<const double>(sub.values().data() + lo * p, l * p), p, window_y, cols, alpha);
                        break;
                    case ModelKind::kCav: {
                        parametric::SavOptions so = spec.sav;
                        so.seed = derive_seed(config.seed ^ spec.sav.seed, {i});
                        fit.sav = parametric::fit_caviar_sav(window_y, alpha, so);
                        break;
                    }
                    case ModelKind::kGarch:
                    case ModelKind::kGjr:
                    case ModelKind::kGarchX: {
                        const auto gk = kind == ModelKind::kGarch ? parametric::GarchKind::kPlain
                                        : kind == ModelKind::kGjr ? parametric::GarchKind::kGjr
                                                                  : parametric::GarchKind::kExogenous;
                        fit.garch = parametric::fit_garch(
                            window_y, gk, std::span<const double>(sub.values().data() + lo * p, l * p), p, spec.garch);
                        break;
                    }
                    case ModelKind::kHist: fit.constant = parametric::hist_var(window_y, alpha); break;
                    case ModelKind::kNormFit: fit.constant = parametric::normfit_var(window_y, alpha); break;
                }
                have_model = true;
            }

            switch (kind) {
                case ModelKind::kGrf:
                case ModelKind::kGrfX:
                case ModelKind::kQrf:
                case ModelKind::kQrfX: f = forest::predict_quantile(*fit.forest, sub.row(t), alpha); break;
                case ModelKind::kQr:
                case ModelKind::kQrX: f = parametric::forecast_var_qr(fit.qr, sub.row(t)); break;
                case ModelKind::kCav:
                    f = refit ? parametric::forecast_var_sav(fit.sav)
                              : parametric::forecast_var_sav(fit.sav, fit.prev_forecast, y[t - 1]);
                    break;
                case ModelKind::kGarch:
                case ModelKind::kGjr:
                case ModelKind::kGarchX: {
                    parametric::GarchState st = fit.garch.state;
                    if (!refit) st = {y[t - 1] - fit.garch.model.mean, fit.prev_variance};
                    const double v = parametric::garch_next_variance(
                        fit.garch.model, st, kind == ModelKind::kGarchX ? sub.row(t) : std::span<const double>{});
                    fit.prev_variance = v;
                    f = stats::normal_quantile(alpha) * std::sqrt(v);
                    break;
                }
                case ModelKind::kHist:
                case ModelKind::kNormFit: f = fit.constant; break;
            }
            fit.prev_forecast = f;
            if (!std::isfinite(f)) throw EstimationFailure("non-finite forecast");
        } catch (const Error& err) {
            if (!recoverable(err)) throw;
            failed = true;
            have_model = false;
            // Carry the previous forecast; the very first step falls back to
            // historical simulation on the same window.
            f = have_forecast ? last_forecast : stats::type1_quantile(window_y, alpha);
        }

        if (!failed && fit.forest && is_forest(kind) && config.importance_stride > 0 &&
            i % config.importance_stride == 0) {
            out.importance.push_back(
                {i, forest::variable_importance(*fit.forest, config.importance_depth, config.importance_decay).importance});
        }

        out.dates.push_back(matrix.dates()[t]);
        out.forecasts.push_back(f);
        out.realized.push_back(y[t]);
        out.failed.push_back(failed ? 1 : 0);
        out.refit.push_back(refit ? 1 : 0);
        last_forecast = f;
        have_forecast = true;
    }

    if (!config.forest_cache_path.empty() && fit.forest) forest::save(*fit.forest, config.forest_cache_path);
    return out;
}

ForecastSeries rolling_forecast(std::span<const double> returns, const data::FeatureSpec& features,
                                const ModelSpec& spec, const RollingConfig& config) {
    const data::FeatureMatrix m = data::build_feature_matrix(returns, features);
    return rolling_forecast(m, spec, config);
}

std::vector<double> check_losses(const ForecastSeries& series) {
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < out.size(); ++t)
        out[t] = parametric::check_loss(series.realized[t] - series.forecasts[t], series.alpha);
    return out;
}

EvalReport evaluate_series(const ForecastSeries& series, std::string period, std::size_t window) {
    EvalReport r;
    r.asset = series.asset;
    r.period = std::move(period);
    r.model = series.model;
    r.alpha = series.alpha;
    r.window = window;
    r.summary = backtest::evaluate(series.realized, series.forecasts, series.alpha);
    r.failures = series.failures();
    const auto losses = check_losses(series);
    r.mean_check_loss = stats::mean(losses);
    return r;
}

PairReport compare_series(const ForecastSeries& a, const ForecastSeries& b, std::string period) {
    if (a.size() != b.size() || a.dates != b.dates)
        throw Error(ErrorKind::kInvalidArgument, "forecast series are not date-aligned: " + a.model + " vs " + b.model);
    if (a.alpha != b.alpha) throw Error(ErrorKind::kInvalidArgument, "forecast series use different levels");
    PairReport r;
    r.asset = a.asset;
    r.period = std::move(period);
    r.model1 = a.model;
    r.model2 = b.model;
    r.alpha = a.alpha;
    r.result = cpa::cpa_test(check_losses(a), check_losses(b));
    return r;
}

}  // namespace qv::engine
