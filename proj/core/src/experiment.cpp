#include "quantvar/experiment.hpp"

#include "quantvar/csv.hpp"
#include "quantvar/error.hpp"
#include "quantvar/rng.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace qv::engine {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string num(double v) { return csv::format_number(v); }

std::string task_stem(const std::string& model, double alpha, std::size_t window) {
    return model + "_a" + num(alpha) + "_w" + std::to_string(window);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

double parse_double(const std::string& s, const csv::Table& t, std::size_t row) {
    if (s.empty()) return kMissing;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(t.source, t.line_numbers[row], "not a number: '" + s + "'");
    }
}

std::size_t require_column(const csv::Table& t, std::string_view name) {
    const std::size_t c = t.column(name);
    if (c == csv::npos) throw ParseError(t.source, 1, "missing column '" + std::string(name) + "'");
    return c;
}

void log_line(const RunOptions& o, const std::string& s) {
    if (o.log) *o.log << s << '\n';
}

// ---------------------------------------------------------------- manifest

const std::set<std::string> kTopKeys = {"schema_version", "assets",        "models",           "levels",
                                        "windows",        "periods",       "seed",             "output_dir",
                                        "forest",         "refit_stride",  "importance_stride", "loss_windows",
                                        "reference_model", "group_rivals"};

template <typename T>
bool get_number(const json& j, const char* key, T& out, std::vector<std::string>& errors) {
    if (!j.contains(key)) return false;
    const json& v = j.at(key);
    if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) {
            errors.push_back(std::string(key) + ": expected a number");
            return false;
        }
        out = v.get<T>();
    } else {
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            errors.push_back(std::string(key) + ": expected an integer");
            return false;
        }
        if (v.is_number_integer() && v.get<long long>() < 0) {
            errors.push_back(std::string(key) + ": must be nonnegative");
            return false;
        }
        out = v.get<T>();
    }
    return true;
}

}  // namespace

Manifest parse_manifest(std::string_view text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::kValidation, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::kValidation, "manifest must be a JSON object");

    std::vector<std::string> errors;
    Manifest m;
    for (const auto& [key, value] : j.items())
        if (!kTopKeys.contains(key)) errors.push_back("unknown key '" + key + "'");

    if (!j.contains("schema_version")) errors.emplace_back("schema_version: required");
    else if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != 1)
        errors.emplace_back("schema_version: only version 1 is supported");

    const fs::path base(base_dir.empty() ? "." : base_dir);
    if (!j.contains("assets") || !j["assets"].is_array() || j["assets"].empty()) {
        errors.emplace_back("assets: required nonempty array");
    } else {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < j["assets"].size(); ++i) {
            const json& a = j["assets"][i];
            const std::string where = "assets[" + std::to_string(i) + "]";
            if (!a.is_object() || !a.contains("id") || !a.contains("path") || !a["id"].is_string() ||
                !a["path"].is_string()) {
                errors.push_back(where + ": expected {\"id\": string, \"path\": string}");
                continue;
            }
            for (const auto& [key, value] : a.items())
                if (key != "id" && key != "path") errors.push_back(where + ": unknown key '" + key + "'");
            AssetSource src{a["id"].get<std::string>(), a["path"].get<std::string>()};
            if (src.id.empty() || src.id.find_first_of("/\\") != std::string::npos)
                errors.push_back(where + ": id must be a nonempty name without path separators");
            if (!ids.insert(src.id).second) errors.push_back(where + ": duplicate id '" + src.id + "'");
            fs::path p(src.path);
            if (p.is_relative()) p = base / p;
            if (!fs::exists(p)) errors.push_back(where + ": file not found: " + p.string());
            src.path = p.string();
            m.assets.push_back(std::move(src));
        }
    }

    if (!j.contains("models") || !j["models"].is_array() || j["models"].empty()) {
        errors.emplace_back("models: required nonempty array");
    } else {
        for (const auto& v : j["models"]) {
            if (!v.is_string()) {
                errors.emplace_back("models: entries must be strings");
                continue;
            }
            const auto name = v.get<std::string>();
            const auto& known = all_model_names();
            if (std::find(known.begin(), known.end(), name) == known.end())
                errors.push_back("models: unknown model '" + name + "'");
            else m.models.push_back(name);
        }
    }

    if (j.contains("levels")) {
        m.levels.clear();
        if (!j["levels"].is_array() || j["levels"].empty()) errors.emplace_back("levels: expected nonempty array");
        else
            for (const auto& v : j["levels"]) {
                if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() < 1.0))
                    errors.emplace_back("levels: entries must lie in (0,1)");
                else m.levels.push_back(v.get<double>());
            }
    }
    if (j.contains("windows")) {
        m.windows.clear();
        if (!j["windows"].is_array() || j["windows"].empty()) errors.emplace_back("windows: expected nonempty array");
        else
            for (const auto& v : j["windows"]) {
                if (!v.is_number_integer() || v.get<long long>() < 100)
                    errors.emplace_back("windows: entries must be integers >= 100");
                else m.windows.push_back(v.get<std::size_t>());
            }
    }
    if (j.contains("periods")) {
        m.periods.clear();
        if (!j["periods"].is_array() || j["periods"].empty()) errors.emplace_back("periods: expected nonempty array");
        else
            for (std::size_t i = 0; i < j["periods"].size(); ++i) {
                const json& p = j["periods"][i];
                const std::string where = "periods[" + std::to_string(i) + "]";
                if (!p.is_object() || !p.contains("label") || !p.contains("start") || !p.contains("end") ||
                    !p["label"].is_string() || !p["start"].is_string() || !p["end"].is_string()) {
                    errors.push_back(where + ": expected {label, start, end} strings");
                    continue;
                }
                for (const auto& [key, value] : p.items())
                    if (key != "label" && key != "start" && key != "end")
                        errors.push_back(where + ": unknown key '" + key + "'");
                const auto s = Date::parse(p["start"].get<std::string>());
                const auto e = Date::parse(p["end"].get<std::string>());
                if (!s || !e) errors.push_back(where + ": dates must be YYYY-MM-DD");
                else if (!(*s < *e)) errors.push_back(where + ": start must precede end");
                else m.periods.push_back({p["label"].get<std::string>(), *s, *e});
            }
    }
    get_number(j, "seed", m.seed, errors);
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) errors.emplace_back("output_dir: expected a string");
        else m.output_dir = j["output_dir"].get<std::string>();
    }
    {
        fs::path out(m.output_dir);
        if (out.is_relative()) out = base / out;
        m.output_dir = out.lexically_normal().string();
    }
    if (j.contains("forest")) {
        const json& f = j["forest"];
        if (!f.is_object()) errors.emplace_back("forest: expected an object");
        else {
            for (const auto& [key, value] : f.items())
                if (key != "num_trees" && key != "min_node_size") errors.push_back("forest: unknown key '" + key + "'");
            get_number(f, "num_trees", m.num_trees, errors);
            get_number(f, "min_node_size", m.min_node_size, errors);
            if (m.num_trees < 1) errors.emplace_back("forest.num_trees: must be positive");
            if (m.min_node_size < 1) errors.emplace_back("forest.min_node_size: must be positive");
        }
    }
    if (get_number(j, "refit_stride", m.refit_stride, errors) && m.refit_stride < 1)
        errors.emplace_back("refit_stride: must be at least 1");
    get_number(j, "importance_stride", m.importance_stride, errors);
    if (j.contains("loss_windows")) {
        m.loss_windows.clear();
        if (!j["loss_windows"].is_array()) errors.emplace_back("loss_windows: expected an array");
        else
            for (const auto& v : j["loss_windows"]) {
                if (!v.is_number_integer() || v.get<long long>() < 1)
                    errors.emplace_back("loss_windows: entries must be positive integers");
                else m.loss_windows.push_back(v.get<std::size_t>());
            }
    }
    if (j.contains("reference_model")) {
        if (!j["reference_model"].is_string()) errors.emplace_back("reference_model: expected a string");
        else m.reference_model = j["reference_model"].get<std::string>();
    }
    if (j.contains("group_rivals")) {
        m.group_rivals.clear();
        if (!j["group_rivals"].is_array()) errors.emplace_back("group_rivals: expected an array");
        else
            for (const auto& v : j["group_rivals"]) {
                if (!v.is_string()) errors.emplace_back("group_rivals: entries must be strings");
                else m.group_rivals.push_back(v.get<std::string>());
            }
    }

    if (!errors.empty()) {
        std::string msg = "invalid manifest (" + std::to_string(errors.size()) + " violation" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw Error(ErrorKind::kValidation, msg);
    }
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------- forecast files

void write_forecast_csv(const std::string& path, const ForecastSeries& s) {
    std::ostringstream out;
    csv::write_row(out, {"date", "asset", "model", "alpha", "forecast", "realized", "hit", "failed", "refit"});
    for (std::size_t t = 0; t < s.size(); ++t) {
        csv::write_row(out, {s.dates[t].to_string(), s.asset, s.model, num(s.alpha), num(s.forecasts[t]),
                             num(s.realized[t]), s.realized[t] < s.forecasts[t] ? "1" : "0",
                             s.failed[t] ? "1" : "0", s.refit[t] ? "1" : "0"});
    }
    write_text_atomic(path, out.str());
}

ForecastSeries read_forecast_csv(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const std::size_t cd = require_column(t, "date"), ca = require_column(t, "asset"),
                      cm = require_column(t, "model"), cl = require_column(t, "alpha"),
                      cf = require_column(t, "forecast"), cr = require_column(t, "realized"),
                      cx = require_column(t, "failed"), cs = require_column(t, "refit");
    ForecastSeries s;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (i == 0) {
            s.asset = row[ca];
            s.model = row[cm];
            s.alpha = parse_double(row[cl], t, i);
        }
        const auto d = Date::parse(row[cd]);
        if (!d) throw ParseError(t.source, t.line_numbers[i], "bad date '" + row[cd] + "'");
        s.dates.push_back(*d);
        s.forecasts.push_back(parse_double(row[cf], t, i));
        s.realized.push_back(parse_double(row[cr], t, i));
        s.failed.push_back(row[cx] == "1" ? 1 : 0);
        s.refit.push_back(row[cs] == "1" ? 1 : 0);
    }
    return s;
}

namespace {

void write_importance_csv(const fs::path& path, const ForecastSeries& s) {
    std::ostringstream out;
    std::vector<std::string> header{"date"};
    header.insert(header.end(), s.importance_names.begin(), s.importance_names.end());
    csv::write_row(out, header);
    for (const auto& snap : s.importance) {
        std::vector<std::string> row{s.dates[snap.index].to_string()};
        for (double v : snap.importance) row.push_back(num(v));
        csv::write_row(out, row);
    }
    write_text_atomic(path, out.str());
}

struct Task {
    std::size_t period = 0;
    std::size_t asset = 0;
    std::size_t level = 0;
    std::size_t window = 0;  // index
    std::size_t model = 0;
    data::SliceBounds bounds;
    fs::path forecast_path;
    fs::path importance_path;
};

struct TaskResult {
    ForecastSeries series;
    bool resumed = false;
};

bool has_all_externals(const data::AssetSeries& s) {
    for (auto name : data::kExternalNames)
        if (!s.externals.contains(std::string(name))) return false;
    return true;
}

}  // namespace

std::string significance_stars(double p) {
    if (std::isnan(p)) return "";
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

// ---------------------------------------------------------------- run

RunSummary run_experiment(const Manifest& manifest, const RunOptions& options) {
    Manifest m = manifest;
    if (options.seed) m.seed = *options.seed;
    if (options.alpha) m.levels = {*options.alpha};
    if (options.window) m.windows = {*options.window};
    const fs::path out(m.output_dir);
    fs::create_directories(out);

    RunSummary summary;
    std::vector<data::AssetSeries> assets;
    std::vector<data::FeatureMatrix> matrices;
    std::vector<bool> extended;
    for (const auto& src : m.assets) {
        assets.push_back(data::load_coinmetrics_csv(src.path, src.id));
        extended.push_back(has_all_externals(assets.back()));
        matrices.push_back(data::build_feature_matrix(assets.back(), static_cast<bool>(extended.back())));
        log_line(options, "loaded " + src.id + ": " + std::to_string(matrices.back().rows()) + " feature rows");
    }

    std::vector<Task> tasks;
    json excluded = json::array();
    for (std::size_t pi = 0; pi < m.periods.size(); ++pi) {
        const auto& period = m.periods[pi];
        for (std::size_t ai = 0; ai < assets.size(); ++ai) {
            for (std::size_t wi = 0; wi < m.windows.size(); ++wi) {
                data::SliceBounds b;
                try {
                    b = data::slice_bounds(matrices[ai].dates(), period, m.windows[wi]);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::kInsufficientHistory) throw;
                    const std::string note = period.label + "/" + assets[ai].asset_id + "/w" +
                                             std::to_string(m.windows[wi]) + ": excluded (" + e.what() + ")";
                    summary.notes.push_back(note);
                    excluded.push_back({{"period", period.label},
                                        {"asset", assets[ai].asset_id},
                                        {"window", m.windows[wi]},
                                        {"reason", e.what()}});
                    summary.skipped += m.models.size() * m.levels.size();
                    continue;
                }
                for (std::size_t li = 0; li < m.levels.size(); ++li) {
                    for (std::size_t mi = 0; mi < m.models.size(); ++mi) {
                        const ModelSpec spec = model_spec(m.models[mi]);
                        if (spec.covariates == CovariateSet::kExtended && !extended[ai]) {
                            summary.notes.push_back(period.label + "/" + assets[ai].asset_id + "/" + spec.name +
                                                    ": skipped (no external covariates)");
                            ++summary.skipped;
                            continue;
                        }
                        Task t{pi, ai, li, wi, mi, b, {}, {}};
                        const fs::path dir = out / "forecasts" / period.label / assets[ai].asset_id;
                        const std::string stem = task_stem(spec.name, m.levels[li], m.windows[wi]);
                        t.forecast_path = dir / (stem + ".csv");
                        t.importance_path = out / "importance" / period.label / assets[ai].asset_id / (stem + ".csv");
                        tasks.push_back(std::move(t));
                    }
                }
            }
        }
    }
    summary.tasks = tasks.size();

    std::vector<TaskResult> results(tasks.size());
    detail::parallel_for(tasks.size(), options.jobs, [&](std::size_t k) {
        const Task& t = tasks[k];
        TaskResult& r = results[k];
        const std::string& asset_id = assets[t.asset].asset_id;
        if (options.resume && fs::exists(t.forecast_path)) {
            r.series = read_forecast_csv(t.forecast_path.string());
            r.resumed = true;
            return;
        }
        ModelSpec spec = model_spec(m.models[t.model]);
        spec.num_trees = m.num_trees;
        spec.min_node_size = m.min_node_size;
        RollingConfig cfg;
        cfg.window = m.windows[t.window];
        cfg.refit_stride = m.refit_stride;
        cfg.alpha = m.levels[t.level];
        cfg.seed = derive_seed(m.seed, {fnv1a(asset_id), fnv1a(m.periods[t.period].label), fnv1a(spec.name),
                                        t.level, cfg.window});
        cfg.importance_stride = is_forest(spec.kind) ? m.importance_stride : 0;
        if (!options.cache_dir.empty() && is_forest(spec.kind)) {
            const fs::path cache = fs::path(options.cache_dir) / m.periods[t.period].label / asset_id;
            fs::create_directories(cache);
            cfg.forest_cache_path = (cache / (task_stem(spec.name, cfg.alpha, cfg.window) + ".json")).string();
        }
        r.series = rolling_forecast(matrices[t.asset], spec, cfg, t.bounds.oos_begin, t.bounds.end);
        r.series.asset = asset_id;
        if (!r.series.importance.empty()) write_importance_csv(t.importance_path, r.series);
        write_forecast_csv(t.forecast_path.string(), r.series);
    });
    for (const auto& r : results) (r.resumed ? summary.resumed : summary.computed) += 1;
    log_line(options, "forecast tasks: " + std::to_string(summary.computed) + " computed, " +
                          std::to_string(summary.resumed) + " resumed");

    // Evaluation.
    std::ostringstream bt;
    csv::write_row(bt, {"asset", "period", "model", "alpha", "window", "n", "exceedances", "aoe", "test", "statistic",
                        "dof", "p_value", "dropped", "failures", "mean_check_loss"});
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const Task& t = tasks[k];
        const EvalReport rep = evaluate_series(results[k].series, m.periods[t.period].label, m.windows[t.window]);
        for (const backtest::BacktestResult* b : {&rep.summary.kupiec, &rep.summary.christoffersen, &rep.summary.dq}) {
            std::string dropped;
            for (const auto& d : b->dropped) dropped += (dropped.empty() ? "" : ";") + d;
            csv::write_row(bt, {rep.asset, rep.period, rep.model, num(rep.alpha), std::to_string(rep.window),
                                std::to_string(rep.summary.n), std::to_string(rep.summary.exceedances),
                                num(rep.summary.aoe), b->test_name, num(b->statistic), std::to_string(b->dof),
                                num(b->p_value), dropped, std::to_string(rep.failures), num(rep.mean_check_loss)});
        }
    }
    write_text_atomic(out / "eval" / "backtests.csv", bt.str());

    std::ostringstream cp;
    csv::write_row(cp, {"asset", "period", "alpha", "window", "model1", "model2", "n", "wald", "p_value", "beta0",
                        "beta1", "performance_share", "loss_win_share", "mean_difference", "degenerate",
                        "significant"});
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const Task& ref = tasks[k];
        if (m.models[ref.model] != m.reference_model) continue;
        for (std::size_t q = 0; q < tasks.size(); ++q) {
            const Task& other = tasks[q];
            if (q == k || other.period != ref.period || other.asset != ref.asset || other.level != ref.level ||
                other.window != ref.window)
                continue;
            const PairReport pr = compare_series(results[k].series, results[q].series, m.periods[ref.period].label);
            const auto& c = pr.result;
            csv::write_row(cp, {pr.asset, pr.period, num(pr.alpha), std::to_string(m.windows[ref.window]), pr.model1,
                                pr.model2, std::to_string(c.n), num(c.wald), num(c.p_value), num(c.beta[0]),
                                c.beta.size() > 1 ? num(c.beta[1]) : "", num(c.performance_share),
                                num(c.loss_win_share), num(c.mean_difference), c.degenerate ? "1" : "0",
                                significantly_better(c) ? "1" : "0"});
        }
    }
    write_text_atomic(out / "eval" / "cpa_pairs.csv", cp.str());

    // Per-asset medians of the external covariates over each forecast span.
    std::ostringstream cov;
    csv::write_row(cov, {"period", "asset", "window", "covariate", "median"});
    for (std::size_t pi = 0; pi < m.periods.size(); ++pi) {
        for (std::size_t ai = 0; ai < assets.size(); ++ai) {
            if (!extended[ai]) continue;
            for (std::size_t wi = 0; wi < m.windows.size(); ++wi) {
                data::SliceBounds b;
                try {
                    b = data::slice_bounds(matrices[ai].dates(), m.periods[pi], m.windows[wi]);
                } catch (const Error&) {
                    continue;
                }
                for (auto name : data::kExternalNames) {
                    const auto col = matrices[ai].column(name);
                    std::vector<double> span(col.begin() + static_cast<std::ptrdiff_t>(b.oos_begin),
                                             col.begin() + static_cast<std::ptrdiff_t>(b.end));
                    csv::write_row(cov, {m.periods[pi].label, assets[ai].asset_id, std::to_string(m.windows[wi]),
                                         std::string(name), num(median_or_missing(span))});
                }
            }
        }
    }
    write_text_atomic(out / "eval" / "asset_covariates.csv", cov.str());

    json meta;
    meta["seed"] = m.seed;
    meta["schema_version"] = m.schema_version;
    meta["reference_model"] = m.reference_model;
    meta["group_rivals"] = m.group_rivals;
    meta["models"] = m.models;
    meta["levels"] = m.levels;
    meta["windows"] = m.windows;
    meta["num_trees"] = m.num_trees;
    meta["min_node_size"] = m.min_node_size;
    meta["refit_stride"] = m.refit_stride;
    meta["importance_stride"] = m.importance_stride;
    meta["loss_windows"] = m.loss_windows;
    json periods = json::array();
    for (const auto& p : m.periods)
        periods.push_back({{"label", p.label}, {"start", p.start.to_string()}, {"end", p.end.to_string()}});
    meta["periods"] = periods;
    json asset_list = json::array();
    for (std::size_t ai = 0; ai < assets.size(); ++ai)
        asset_list.push_back({{"id", assets[ai].asset_id},
                              {"returns", assets[ai].returns.size()},
                              {"externals", assets[ai].external_count()}});
    meta["assets"] = asset_list;
    meta["excluded"] = excluded;
    meta["tasks"] = summary.tasks;
    write_text_atomic(out / "metadata.json", meta.dump(2) + "\n");

    for (ReportKind kind : {ReportKind::kDqMedian, ReportKind::kCpaGrid, ReportKind::kLossSeries, ReportKind::kImportance})
        write_report(out.string(), kind, m.loss_windows);
    return summary;
}

// ---------------------------------------------------------------- reports

ReportKind parse_report_kind(std::string_view text) {
    if (text == "dq-median") return ReportKind::kDqMedian;
    if (text == "cpa-grid") return ReportKind::kCpaGrid;
    if (text == "loss-series") return ReportKind::kLossSeries;
    if (text == "importance") return ReportKind::kImportance;
    throw Error(ErrorKind::kInvalidArgument, "unknown report kind '" + std::string(text) +
                                                 "' (expected dq-median, cpa-grid, loss-series or importance)");
}

namespace {

json read_metadata(const fs::path& dir) {
    const fs::path p = dir / "metadata.json";
    if (!fs::exists(p)) return json::object();
    std::ifstream in(p);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::kValidation, p.string() + ": " + e.what());
    }
}

fs::path require_file(const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorKind::kIo, "missing results file " + p.string());
    return p;
}

// period -> asset -> covariate -> median (first window found)
using CovMedians = std::map<std::string, std::map<std::string, std::map<std::string, double>>>;

CovMedians read_covariates(const fs::path& dir, const std::string& window) {
    CovMedians out;
    const fs::path p = dir / "eval" / "asset_covariates.csv";
    if (!fs::exists(p)) return out;
    const csv::Table t = csv::read_file(p.string());
    const std::size_t cp = require_column(t, "period"), ca = require_column(t, "asset"),
                      cw = require_column(t, "window"), cc = require_column(t, "covariate"),
                      cm = require_column(t, "median");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        if (!window.empty() && r[cw] != window) continue;
        out[r[cp]][r[ca]][r[cc]] = parse_double(r[cm], t, i);
    }
    return out;
}

std::vector<std::string> report_dq_median(const fs::path& dir) {
    const csv::Table t = csv::read_file(require_file(dir / "eval" / "backtests.csv").string());
    const std::size_t ca = require_column(t, "asset"), cp = require_column(t, "period"),
                      cm = require_column(t, "model"), cl = require_column(t, "alpha"),
                      cw = require_column(t, "window"), ct = require_column(t, "test"),
                      cv = require_column(t, "p_value");
    std::map<std::string, std::vector<EvalReport>> by_window;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        if (r[ct] != "dq") continue;
        EvalReport e;
        e.asset = r[ca];
        e.period = r[cp];
        e.model = r[cm];
        e.alpha = parse_double(r[cl], t, i);
        e.summary.dq.p_value = parse_double(r[cv], t, i);
        by_window[r[cw]].push_back(std::move(e));
    }

    std::vector<std::string> written;
    std::ostringstream all, grouped, groups;
    csv::write_row(all, {"period", "alpha", "window", "model", "assets", "median_p"});
    csv::write_row(grouped, {"period", "group", "alpha", "window", "model", "assets", "median_p"});
    csv::write_row(groups, {"period", "window", "asset", "SER", "group"});
    for (const auto& [window, reports] : by_window) {
        for (const auto& row : summarize_dq_medians(reports))
            csv::write_row(all, {row.period, num(row.alpha), window, row.model, std::to_string(row.assets),
                                 num(row.median_p)});

        // Groups by steepest decay of the per-asset median SER.
        const CovMedians cov = read_covariates(dir, window);
        std::map<std::pair<std::string, std::string>, std::string> label;
        for (const auto& [period, per_asset] : cov) {
            std::vector<std::string> names;
            std::vector<double> ser;
            for (const auto& [asset, m] : per_asset) {
                const auto it = m.find("SER");
                if (it != m.end() && std::isfinite(it->second)) {
                    names.push_back(asset);
                    ser.push_back(it->second);
                }
            }
            if (ser.size() < 3) continue;
            const Split s = split_steepest_decay(ser);
            for (std::size_t i : s.high) label[{period, names[i]}] = "high";
            for (std::size_t i : s.low) label[{period, names[i]}] = "low";
            for (std::size_t i = 0; i < names.size(); ++i)
                csv::write_row(groups, {period, window, names[i], num(ser[i]), label[{period, names[i]}]});
        }
        std::vector<EvalReport> in_groups;
        for (const auto& r : reports)
            if (label.contains({r.period, r.asset})) in_groups.push_back(r);
        const auto rows = summarize_dq_medians(
            in_groups, [&](const std::string& p, const std::string& a) { return label.at({p, a}); });
        for (const auto& row : rows)
            csv::write_row(grouped, {row.period, row.group, num(row.alpha), window, row.model,
                                     std::to_string(row.assets), num(row.median_p)});
    }
    write_text_atomic(dir / "tables" / "dq_median.csv", all.str());
    write_text_atomic(dir / "tables" / "dq_median_ser_groups.csv", grouped.str());
    write_text_atomic(dir / "tables" / "ser_groups.csv", groups.str());
    written.push_back((dir / "tables" / "dq_median.csv").string());
    written.push_back((dir / "tables" / "dq_median_ser_groups.csv").string());
    written.push_back((dir / "tables" / "ser_groups.csv").string());
    return written;
}

std::vector<std::string> report_cpa_grid(const fs::path& dir) {
    const json meta = read_metadata(dir);
    std::vector<std::string> rivals = {"QR", "CAV", "GJR-GARCH"};
    if (meta.contains("group_rivals")) rivals = meta["group_rivals"].get<std::vector<std::string>>();

    const csv::Table t = csv::read_file(require_file(dir / "eval" / "cpa_pairs.csv").string());
    const std::size_t ca = require_column(t, "asset"), cp = require_column(t, "period"),
                      cl = require_column(t, "alpha"), cw = require_column(t, "window"),
                      c1 = require_column(t, "model1"), c2 = require_column(t, "model2"),
                      cv = require_column(t, "p_value"), cs = require_column(t, "performance_share"),
                      cd = require_column(t, "degenerate");

    struct Key {
        std::string period, alpha, window;
        auto operator<=>(const Key&) const = default;
    };
    std::map<Key, std::vector<PairReport>> by_key;
    std::ostringstream cells;
    csv::write_row(cells, {"period", "alpha", "window", "asset", "model1", "model2", "p_value", "stars",
                           "performance_share", "significant"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        PairReport pr;
        pr.asset = r[ca];
        pr.period = r[cp];
        pr.alpha = parse_double(r[cl], t, i);
        pr.model1 = r[c1];
        pr.model2 = r[c2];
        pr.result.p_value = parse_double(r[cv], t, i);
        pr.result.performance_share = parse_double(r[cs], t, i);
        pr.result.degenerate = r[cd] == "1";
        const bool sig = cpa::significantly_better(pr.result);
        csv::write_row(cells, {pr.period, r[cl], r[cw], pr.asset, pr.model1, pr.model2, r[cv],
                               significance_stars(pr.result.p_value), r[cs], sig ? "1" : "0"});
        by_key[{pr.period, r[cl], r[cw]}].push_back(std::move(pr));
    }

    std::ostringstream grid, ratio, grp;
    csv::write_row(grid, {"period", "alpha", "window", "model1", "model2", "assets", "significant", "mean_share",
                          "mean_p"});
    csv::write_row(ratio, {"period", "alpha", "window", "covariate", "low_assets", "high_assets", "low_mean",
                           "high_mean", "ratio", "defined"});
    csv::write_row(grp, {"period", "alpha", "window", "asset", "group"});
    for (const auto& [key, pairs] : by_key) {
        std::map<std::pair<std::string, std::string>, std::vector<const PairReport*>> by_models;
        std::vector<std::pair<std::string, std::string>> order;
        std::set<std::string> asset_set;
        for (const auto& p : pairs) {
            auto k = std::make_pair(p.model1, p.model2);
            if (!by_models.contains(k)) order.push_back(k);
            by_models[k].push_back(&p);
            asset_set.insert(p.asset);
        }
        for (const auto& k : order) {
            const auto& v = by_models[k];
            std::size_t sig = 0;
            double share = 0.0, p = 0.0;
            for (const auto* x : v) {
                sig += cpa::significantly_better(x->result);
                share += x->result.performance_share;
                p += x->result.p_value;
            }
            const double n = static_cast<double>(v.size());
            csv::write_row(grid, {key.period, key.alpha, key.window, k.first, k.second, std::to_string(v.size()),
                                  std::to_string(sig), num(share / n), num(p / n)});
        }

        // Table-7 style groups: GRF outperformed by at least two rivals.
        std::vector<std::string> low, high;
        const double alpha = std::stod(key.alpha);
        for (const auto& a : asset_set) {
            const bool is_low = grf_outperformed(pairs, a, key.period, alpha, rivals, 2);
            (is_low ? low : high).push_back(a);
            csv::write_row(grp, {key.period, key.alpha, key.window, a, is_low ? "low" : "high"});
        }
        const CovMedians cov = read_covariates(dir, key.window);
        std::map<std::string, std::map<std::string, double>> medians;
        if (cov.contains(key.period)) medians = cov.at(key.period);
        for (const auto& row : group_covariate_ratio(medians, low, high))
            csv::write_row(ratio, {key.period, key.alpha, key.window, row.covariate, std::to_string(low.size()),
                                   std::to_string(high.size()), num(row.low_mean), num(row.high_mean),
                                   num(row.ratio), row.defined ? "1" : "0"});
    }
    const std::vector<std::pair<std::string, std::string>> files = {{"cpa_cells.csv", cells.str()},
                                                                    {"cpa_grid.csv", grid.str()},
                                                                    {"cpa_groups.csv", grp.str()},
                                                                    {"covariate_ratio.csv", ratio.str()}};
    std::vector<std::string> written;
    for (const auto& [name, text] : files) {
        write_text_atomic(dir / "tables" / name, text);
        written.push_back((dir / "tables" / name).string());
    }
    return written;
}

// Parses "<model>_a<alpha>_w<window>" stems.
bool parse_stem(const std::string& stem, std::string& model, std::string& alpha, std::string& window) {
    const auto w = stem.rfind("_w");
    const auto a = stem.rfind("_a", w);
    if (w == std::string::npos || a == std::string::npos || a == 0) return false;
    model = stem.substr(0, a);
    alpha = stem.substr(a + 2, w - a - 2);
    window = stem.substr(w + 2);
    return true;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> report_loss_series(const fs::path& dir, const std::vector<std::size_t>& windows) {
    const json meta = read_metadata(dir);
    const std::string ref = meta.value("reference_model", std::string("GRF"));
    std::vector<std::string> written;
    const fs::path root = dir / "forecasts";
    // group files by their directory (period/asset)
    std::map<fs::path, std::vector<fs::path>> by_dir;
    for (const auto& f : sorted_files(root)) by_dir[f.parent_path()].push_back(f);
    for (const auto& [d, files] : by_dir) {
        for (const auto& f : files) {
            std::string m1, a1, w1;
            if (!parse_stem(f.stem().string(), m1, a1, w1) || m1 != ref) continue;
            const ForecastSeries base = read_forecast_csv(f.string());
            for (const auto& g : files) {
                std::string m2, a2, w2;
                if (g == f || !parse_stem(g.stem().string(), m2, a2, w2) || a2 != a1 || w2 != w1) continue;
                const ForecastSeries other = read_forecast_csv(g.string());
                const auto l1 = check_losses(base);
                const auto l2 = check_losses(other);
                std::vector<double> dl(l1.size());
                for (std::size_t t = 0; t < dl.size(); ++t) dl[t] = l1[t] - l2[t];
                if (dl.size() < 30) continue;
                const cpa::CpaResult c = cpa::cpa_test(dl);
                // predicted series aligned to dates[1..]
                std::vector<std::vector<double>> rolls;
                std::vector<std::string> header{"date", "loss_difference", "predicted"};
                for (std::size_t w : windows) {
                    header.push_back("predicted_mean_" + std::to_string(w));
                    rolls.push_back(w <= c.fitted.size() ? cpa::rolling_mean(c.fitted, w)
                                                         : std::vector<double>(c.fitted.size(), kMissing));
                }
                std::ostringstream out;
                csv::write_row(out, header);
                for (std::size_t t = 0; t < dl.size(); ++t) {
                    std::vector<std::string> row{base.dates[t].to_string(), num(dl[t])};
                    if (t == 0) {
                        row.emplace_back("");
                        for (std::size_t k = 0; k < rolls.size(); ++k) row.emplace_back("");
                    } else {
                        row.push_back(num(c.fitted[t - 1]));
                        for (const auto& r : rolls) row.push_back(num(r[t - 1]));
                    }
                    csv::write_row(out, row);
                }
                const fs::path rel = fs::relative(d, root);
                const fs::path target =
                    dir / "tables" / "loss_series" / rel / (m1 + "_vs_" + m2 + "_a" + a1 + "_w" + w1 + ".csv");
                write_text_atomic(target, out.str());
                written.push_back(target.string());
            }
        }
    }
    return written;
}

std::vector<std::string> report_importance(const fs::path& dir) {
    std::vector<std::string> written;
    const fs::path root = dir / "importance";
    std::ostringstream summary;
    csv::write_row(summary, {"period", "asset", "model", "alpha", "window", "rank", "covariate", "mean_importance"});
    for (const auto& f : sorted_files(root)) {
        const csv::Table t = csv::read_file(f.string());
        if (t.header.size() < 2 || t.rows.empty()) continue;
        const std::size_t p = t.header.size() - 1;
        std::vector<double> mean(p, 0.0);
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            for (std::size_t c = 0; c < p; ++c) mean[c] += parse_double(t.rows[i][c + 1], t, i);
        for (double& v : mean) v /= static_cast<double>(t.rows.size());
        std::vector<std::size_t> order(p);
        for (std::size_t c = 0; c < p; ++c) order[c] = c;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
        order.resize(std::min<std::size_t>(5, p));

        const fs::path rel = fs::relative(f.parent_path(), root);  // period/asset
        const std::string period = rel.begin()->string();
        const std::string asset = rel.filename().string();
        std::string model, alpha, window;
        parse_stem(f.stem().string(), model, alpha, window);
        for (std::size_t k = 0; k < order.size(); ++k)
            csv::write_row(summary, {period, asset, model, alpha, window, std::to_string(k + 1),
                                     t.header[order[k] + 1], num(mean[order[k]])});

        std::ostringstream out;
        std::vector<std::string> header{"date"};
        for (std::size_t c : order) header.push_back(t.header[c + 1]);
        csv::write_row(out, header);
        for (const auto& row : t.rows) {
            std::vector<std::string> r{row[0]};
            for (std::size_t c : order) r.push_back(row[c + 1]);
            csv::write_row(out, r);
        }
        const fs::path target = dir / "tables" / "importance" / rel / f.filename();
        write_text_atomic(target, out.str());
        written.push_back(target.string());
    }
    write_text_atomic(dir / "tables" / "importance_top5.csv", summary.str());
    written.push_back((dir / "tables" / "importance_top5.csv").string());
    return written;
}

}  // namespace

std::vector<std::string> write_report(const std::string& results_dir, ReportKind kind,
                                      const std::vector<std::size_t>& loss_windows) {
    const fs::path dir(results_dir);
    if (!fs::is_directory(dir)) throw Error(ErrorKind::kIo, "results directory not found: " + results_dir);
    switch (kind) {
        case ReportKind::kDqMedian: return report_dq_median(dir);
        case ReportKind::kCpaGrid: return report_cpa_grid(dir);
        case ReportKind::kLossSeries: return report_loss_series(dir, loss_windows);
        case ReportKind::kImportance: return report_importance(dir);
    }
    return {};
}

}  // namespace qv::engine
