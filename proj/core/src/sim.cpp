#include "quantvar/sim.hpp"

#include "quantvar/error.hpp"
#include "quantvar/rng.hpp"
#include "quantvar/stats.hpp"
#include "parallel.hpp"

#include <cmath>
#include <map>
#include <random>

namespace qv::sim {
namespace {

constexpr std::size_t kFeatureBurnIn = 60;  // longest lagged SD window

void check_stationary(const GarchSimParams& p) {
    if (!(p.omega > 0.0) || p.a < 0.0 || p.b < 0.0 || !(p.a + p.b < 1.0))
        throw Error(ErrorKind::kInvalidArgument, "GARCH simulation parameters are not stationary");
}

double t5_scale() { return std::sqrt(3.0 / 5.0); }

}  // namespace

std::string to_string(DgpKind kind) {
    switch (kind) {
        case DgpKind::kGarchNormal: return "garch_normal";
        case DgpKind::kGarchT5: return "garch_t5";
        case DgpKind::kSavRegime: return "sav_regime";
        case DgpKind::kGarchAssetFit: return "garch_asset_fit";
    }
    return "garch_normal";
}

DgpKind parse_dgp(std::string_view text) {
    if (text == "garch_normal") return DgpKind::kGarchNormal;
    if (text == "garch_t5") return DgpKind::kGarchT5;
    if (text == "sav_regime") return DgpKind::kSavRegime;
    if (text == "garch_asset_fit") return DgpKind::kGarchAssetFit;
    throw Error(ErrorKind::kInvalidArgument, "unknown DGP '" + std::string(text) + "'");
}

SimSeries simulate_garch(const GarchSimParams& p, std::size_t n, bool student_t5, std::uint64_t seed) {
    check_stationary(p);
    RandomEngine rng = make_engine(seed, {0x6A});
    std::normal_distribution<double> normal;
    std::student_t_distribution<double> t5(5.0);
    auto draw = [&] { return student_t5 ? t5(rng) * t5_scale() : normal(rng); };

    SimSeries s;
    s.returns.reserve(n);
    s.sigma.reserve(n);
    double var = p.omega / (1.0 - p.a - p.b);
    double r = 0.0;
    for (std::size_t t = 0; t < kBurnIn + n; ++t) {
        if (t > 0) var = p.omega + p.a * r * r + p.b * var;
        const double sd = std::sqrt(var);
        r = draw() * sd;
        if (t >= kBurnIn) {
            s.returns.push_back(r);
            s.sigma.push_back(sd);
        }
    }
    return s;
}

std::vector<double> simulate_regime_normal(std::size_t n, std::size_t regime_length, double sigma_divisor,
                                           std::uint64_t seed) {
    if (regime_length == 0 || !(sigma_divisor > 0.0))
        throw Error(ErrorKind::kInvalidArgument, "regime length and sigma divisor must be positive");
    RandomEngine rng = make_engine(seed, {0x5E});
    std::chi_squared_distribution<double> chi2(2.0);
    std::normal_distribution<double> normal;
    std::vector<double> r(n);
    double sd = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t % regime_length == 0) sd = chi2(rng) / sigma_divisor;
        r[t] = sd * normal(rng);
    }
    return r;
}

SimSeries simulate_sav(const SavSimParams& p, std::size_t n, std::uint64_t seed) {
    if (!(p.alpha > 0.0 && p.alpha < 0.5)) throw Error(ErrorKind::kInvalidArgument, "SAV simulation needs alpha in (0, 0.5)");
    const std::size_t total = kBurnIn + n;
    const std::vector<double> r0 = simulate_regime_normal(total, p.regime_length, p.sigma_divisor, derive_seed(seed, {1}));
    RandomEngine rng = make_engine(seed, {2});
    std::normal_distribution<double> normal;
    const double z = stats::normal_quantile(p.alpha);

    SimSeries s;
    s.returns.reserve(n);
    s.sigma.reserve(n);
    s.true_var.reserve(n);
    double var = stats::type1_quantile(std::span<const double>(r0).first(std::min(total, p.regime_length)), p.alpha);
    for (std::size_t t = 0; t < total; ++t) {
        if (t > 0) var = p.g0 + p.g1 * var + p.g2 * std::abs(r0[t - 1] - p.g3);
        const double sd = var / z;
        if (!(sd > 0.0) || !std::isfinite(sd))
            throw Error(ErrorKind::kInvalidArgument, "SAV simulation produced a nonpositive scale at t=" +
                                                         std::to_string(t) + " (VaR " + std::to_string(var) + ")");
        const double r = sd * normal(rng);
        if (t >= kBurnIn) {
            s.returns.push_back(r);
            s.sigma.push_back(sd);
            s.true_var.push_back(var);
        }
    }
    return s;
}

SavSimParams sav_fixture_params(double alpha, std::uint64_t seed, std::size_t n) {
    SavSimParams p;
    p.alpha = alpha;
    const std::vector<double> pilot = simulate_regime_normal(n, p.regime_length, p.sigma_divisor, seed);
    parametric::SavOptions so;
    so.seed = seed;
    const parametric::SavModel m = parametric::fit_caviar_sav(pilot, alpha, so);
    p.g0 = m.beta1;
    p.g1 = m.beta2;
    p.g2 = m.beta3;
    p.g3 = 0.0;
    return p;
}

SimSeries simulate(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
    switch (spec.kind) {
        case DgpKind::kGarchNormal:
        case DgpKind::kGarchAssetFit: return simulate_garch(spec.garch, n, false, seed);
        case DgpKind::kGarchT5: return simulate_garch(spec.garch, n, true, seed);
        case DgpKind::kSavRegime: return simulate_sav(spec.sav, n, seed);
    }
    return {};
}

std::vector<double> oracle_var(const DgpSpec& spec, const SimSeries& series, double alpha) {
    double q = stats::normal_quantile(alpha);
    if (spec.kind == DgpKind::kGarchT5) q = t5_scale() * stats::student_t_quantile(alpha, 5.0);
    std::vector<double> out(series.sigma.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = q * series.sigma[t];
    return out;
}

DgpSpec fit_asset_garch_for_sim(const data::AssetSeries& asset) {
    if (asset.returns.size() < 1000)
        throw Error(ErrorKind::kInsufficientData, asset.asset_id + ": GARCH simulation fit needs at least 1000 returns");
    const parametric::GarchFit fit = parametric::fit_garch(asset.returns, parametric::GarchKind::kPlain);
    DgpSpec spec;
    spec.kind = DgpKind::kGarchAssetFit;
    spec.garch = {fit.model.omega, fit.model.a, fit.model.b};
    spec.label = "garch_fit_" + asset.asset_id;
    return spec;
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

struct RepOutput {
    std::vector<McRepRecord> records;
    std::vector<McCpaRecord> cpa;
};

RepOutput run_rep(const McProtocol& pr, std::size_t rep) {
    RepOutput out;
    const SimSeries series = simulate(pr.dgp, pr.n + kFeatureBurnIn, derive_seed(pr.seed, {rep}));
    const data::FeatureMatrix matrix = data::build_feature_matrix(series.returns, data::FeatureSpec{});
    for (std::size_t li = 0; li < pr.levels.size(); ++li) {
        const double alpha = pr.levels[li];
        const std::vector<double> oracle = oracle_var(pr.dgp, series, alpha);
        for (std::size_t window : pr.windows) {
            std::map<std::string, engine::ForecastSeries> done;
            for (std::size_t mi = 0; mi < pr.models.size(); ++mi) {
                engine::ModelSpec spec = engine::model_spec(pr.models[mi]);
                spec.num_trees = pr.num_trees;
                engine::RollingConfig cfg;
                cfg.window = window;
                cfg.refit_stride = pr.refit_stride;
                cfg.alpha = alpha;
                cfg.seed = derive_seed(pr.seed, {rep, window, li, mi, 0xF0});
                done.emplace(pr.models[mi], engine::rolling_forecast(matrix, spec, cfg));
            }
            if (pr.include_oracle) {
                engine::ForecastSeries o;
                o.model = std::string(kOracleModel);
                o.alpha = alpha;
                for (std::size_t t = window; t < matrix.rows(); ++t) {
                    o.dates.push_back(matrix.dates()[t]);
                    o.forecasts.push_back(oracle[t + kFeatureBurnIn]);
                    o.realized.push_back(matrix.target()[t]);
                    o.failed.push_back(0);
                    o.refit.push_back(1);
                }
                done.emplace(o.model, std::move(o));
            }
            for (const auto& [name, fs] : done) {
                McRepRecord rec;
                rec.rep = rep;
                rec.model = name;
                rec.window = window;
                rec.alpha = alpha;
                rec.failed_steps = fs.failures();
                rec.failed = rec.failed_steps > 0;
                const backtest::EvalSummary ev = backtest::evaluate(fs.realized, fs.forecasts, alpha);
                rec.aoe = ev.aoe;
                rec.p_dq = ev.dq.p_value;
                rec.p_kupiec = ev.kupiec.p_value;
                rec.p_christoffersen = ev.christoffersen.p_value;
                out.records.push_back(rec);
            }
            for (const auto& [m1, m2] : pr.cpa_pairs) {
                const auto a = done.find(m1);
                const auto b = done.find(m2);
                if (a == done.end() || b == done.end())
                    throw Error(ErrorKind::kInvalidArgument, "CPA pair names a model not in the protocol: " + m1 + "/" + m2);
                const cpa::CpaResult r =
                    cpa::cpa_test(engine::check_losses(a->second), engine::check_losses(b->second));
                out.cpa.push_back({rep, m1, m2, window, alpha, r.p_value, r.performance_share, r.loss_win_share});
            }
        }
    }
    return out;
}

}  // namespace

McResult run_monte_carlo(const McProtocol& pr) {
    if (pr.reps < 1) throw Error(ErrorKind::kInvalidArgument, "Monte Carlo needs at least one rep");
    for (std::size_t w : pr.windows)
        if (w + 1 >= pr.n) throw Error(ErrorKind::kInvalidArgument, "rolling window must be shorter than n");
    std::vector<RepOutput> reps(pr.reps);
    detail::parallel_for(pr.reps, pr.jobs, [&](std::size_t r) { reps[r] = run_rep(pr, r); });

    McResult res;
    for (auto& r : reps) {
        res.records.insert(res.records.end(), r.records.begin(), r.records.end());
        res.cpa_records.insert(res.cpa_records.end(), r.cpa.begin(), r.cpa.end());
    }

    std::vector<std::string> models = pr.models;
    if (pr.include_oracle) models.emplace_back(kOracleModel);
    for (double alpha : pr.levels) {
        for (std::size_t window : pr.windows) {
            for (const auto& model : models) {
                McCell c;
                c.model = model;
                c.window = window;
                c.alpha = alpha;
                for (const auto& rec : res.records) {
                    if (rec.model != model || rec.window != window || rec.alpha != alpha) continue;
                    if (rec.failed) {
                        ++c.failed_reps;
                        continue;
                    }
                    ++c.reps;
                    c.mean_aoe += rec.aoe;
                    c.mean_p_dq += rec.p_dq;
                    c.mean_p_kupiec += rec.p_kupiec;
                    c.mean_p_christoffersen += rec.p_christoffersen;
                    c.reject_dq += rec.p_dq < pr.significance;
                    c.reject_kupiec += rec.p_kupiec < pr.significance;
                    c.reject_christoffersen += rec.p_christoffersen < pr.significance;
                }
                if (c.reps > 0) {
                    const double k = static_cast<double>(c.reps);
                    for (double* v : {&c.mean_aoe, &c.mean_p_dq, &c.mean_p_kupiec, &c.mean_p_christoffersen,
                                      &c.reject_dq, &c.reject_kupiec, &c.reject_christoffersen})
                        *v /= k;
                }
                res.cells.push_back(c);
            }
            for (const auto& [m1, m2] : pr.cpa_pairs) {
                McCpaCell c;
                c.model1 = m1;
                c.model2 = m2;
                c.window = window;
                c.alpha = alpha;
                for (const auto& rec : res.cpa_records) {
                    if (rec.model1 != m1 || rec.model2 != m2 || rec.window != window || rec.alpha != alpha) continue;
                    ++c.reps;
                    c.mean_p += rec.p_value;
                    c.significant += rec.p_value < 0.1;
                    c.mean_share += rec.performance_share;
                    c.mean_loss_win_share += rec.loss_win_share;
                }
                if (c.reps > 0) {
                    const double k = static_cast<double>(c.reps);
                    c.mean_p /= k;
                    c.mean_share /= k;
                    c.mean_loss_win_share /= k;
                }
                res.cpa_cells.push_back(c);
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------- covariate study

std::vector<std::vector<int>> CovariateStudy::default_covariate_sets() {
    return {{3}, {7}, {30}, {3, 7}, {3, 30}, {7, 30}, {3, 7, 30}, {3, 7, 30, 60}};
}

std::string set_label(const std::vector<int>& set) {
    std::string s = "{";
    for (std::size_t i = 0; i < set.size(); ++i) s += (i ? "," : "") + std::to_string(set[i]);
    return s + "}";
}

std::vector<CovariateRow> covariate_selection_study(const CovariateStudy& st) {
    if (st.reps < 1 || st.sets.empty()) throw Error(ErrorKind::kInvalidArgument, "covariate study needs reps and sets");
    std::vector<std::vector<double>> mse(st.reps, std::vector<double>(st.sets.size(), 0.0));
    detail::parallel_for(st.reps, st.jobs, [&](std::size_t rep) {
        const SimSeries s = simulate_sav(st.params, st.n + kFeatureBurnIn, derive_seed(st.seed, {rep}));
        data::FeatureSpec fs;
        fs.include_lagged_return = false;
        const data::FeatureMatrix matrix = data::build_feature_matrix(s.returns, fs);
        for (std::size_t k = 0; k < st.sets.size(); ++k) {
            engine::ModelSpec spec = engine::model_spec("GRF");
            spec.num_trees = st.num_trees;
            for (int w : st.sets[k]) spec.columns.push_back("sd_" + std::to_string(w));
            engine::RollingConfig cfg;
            cfg.window = st.window;
            cfg.refit_stride = st.refit_stride;
            cfg.alpha = st.params.alpha;
            cfg.seed = derive_seed(st.seed, {rep, 0xC0});
            const engine::ForecastSeries f = engine::rolling_forecast(matrix, spec, cfg);
            double acc = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const double d = f.forecasts[i] - s.true_var[st.window + i + kFeatureBurnIn];
                acc += d * d;
            }
            mse[rep][k] = acc / static_cast<double>(f.size());
        }
    });
    std::vector<CovariateRow> rows;
    for (std::size_t k = 0; k < st.sets.size(); ++k) {
        CovariateRow r;
        r.set = st.sets[k];
        r.label = set_label(st.sets[k]);
        for (std::size_t rep = 0; rep < st.reps; ++rep) r.rep_mse.push_back(mse[rep][k]);
        r.mean_mse = stats::mean(r.rep_mse);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace qv::sim
