#include "quantvar/sim_protocol.hpp"

#include "quantvar/csv.hpp"
#include "quantvar/data.hpp"
#include "quantvar/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace qv::sim {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKeys = {"schema_version", "study",  "dgp",          "asset",          "garch",
                                     "sav",            "reps",   "n",            "windows",        "levels",
                                     "models",         "include_oracle", "cpa_pairs", "significance", "num_trees",
                                     "refit_stride",   "seed",   "window",       "sets"};

std::string num(double v) { return csv::format_number(v); }

void write_file(const fs::path& path, const std::string& text, std::vector<std::string>* written) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
    if (written) written->push_back(path.string());
}

struct Reader {
    const json& j;
    std::vector<std::string>& errors;

    template <typename T>
    void number(const char* key, T& out, double min_value) const {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        const bool ok = std::is_integral_v<T> ? v.is_number_integer() || v.is_number_unsigned() : v.is_number();
        if (!ok || v.get<double>() < min_value) {
            errors.push_back(std::string(key) + ": expected a number >= " + num(min_value));
            return;
        }
        out = v.get<T>();
    }
};

}  // namespace

Profile parse_profile(std::string_view text) {
    if (text == "desk") return Profile::kDesk;
    if (text == "full") return Profile::kFull;
    throw Error(ErrorKind::kInvalidArgument, "unknown profile '" + std::string(text) + "' (expected desk or full)");
}

ProtocolFile parse_protocol(std::string_view text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::kValidation, std::string("protocol is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::kValidation, "protocol must be a JSON object");

    std::vector<std::string> errors;
    for (const auto& [key, value] : j.items())
        if (!kKeys.contains(key)) errors.push_back("unknown key '" + key + "'");
    if (j.contains("schema_version") && j["schema_version"] != 1)
        errors.emplace_back("schema_version: only version 1 is supported");

    ProtocolFile p;
    if (j.contains("study")) {
        const std::string s = j["study"].is_string() ? j["study"].get<std::string>() : "";
        if (s == "monte_carlo") p.study = StudyKind::kMonteCarlo;
        else if (s == "covariate_selection") p.study = StudyKind::kCovariateSelection;
        else errors.emplace_back("study: expected monte_carlo or covariate_selection");
    }

    DgpSpec& dgp = p.monte_carlo.dgp;
    if (!j.contains("dgp") || !j["dgp"].is_string()) {
        if (p.study == StudyKind::kMonteCarlo) errors.emplace_back("dgp: required string");
        dgp.kind = DgpKind::kSavRegime;
    } else {
        try {
            dgp.kind = parse_dgp(j["dgp"].get<std::string>());
        } catch (const Error& e) {
            errors.emplace_back(std::string("dgp: ") + e.what());
        }
    }
    dgp.label = to_string(dgp.kind);

    const Reader top{j, errors};
    if (j.contains("garch")) {
        const json& g = j["garch"];
        if (!g.is_object()) errors.emplace_back("garch: expected an object");
        else {
            for (const auto& [key, value] : g.items())
                if (key != "omega" && key != "a" && key != "b") errors.push_back("garch: unknown key '" + key + "'");
            const Reader r{g, errors};
            r.number("omega", dgp.garch.omega, 0.0);
            r.number("a", dgp.garch.a, 0.0);
            r.number("b", dgp.garch.b, 0.0);
        }
    }
    bool explicit_sav = false;
    if (j.contains("sav")) {
        const json& s = j["sav"];
        if (!s.is_object()) errors.emplace_back("sav: expected an object");
        else {
            explicit_sav = true;
            for (const auto& [key, value] : s.items())
                if (key != "g0" && key != "g1" && key != "g2" && key != "g3" && key != "regime_length" &&
                    key != "sigma_divisor")
                    errors.push_back("sav: unknown key '" + key + "'");
            const Reader r{s, errors};
            r.number("g0", dgp.sav.g0, -1e300);
            r.number("g1", dgp.sav.g1, -1e300);
            r.number("g2", dgp.sav.g2, -1e300);
            r.number("g3", dgp.sav.g3, -1e300);
            r.number("regime_length", dgp.sav.regime_length, 1);
            r.number("sigma_divisor", dgp.sav.sigma_divisor, 1e-12);
        }
    }
    if (j.contains("asset")) {
        if (!j["asset"].is_string()) errors.emplace_back("asset: expected a path");
        else {
            fs::path a(j["asset"].get<std::string>());
            if (a.is_relative()) a = fs::path(base_dir.empty() ? "." : base_dir) / a;
            if (!fs::exists(a)) errors.push_back("asset: file not found: " + a.string());
            p.asset_path = a.string();
        }
    }

    McProtocol& mc = p.monte_carlo;
    top.number("reps", mc.reps, 1);
    top.number("n", mc.n, 200);
    top.number("num_trees", mc.num_trees, 1);
    top.number("refit_stride", mc.refit_stride, 1);
    top.number("seed", mc.seed, 0);
    top.number("significance", mc.significance, 0.0);
    if (j.contains("include_oracle")) {
        if (!j["include_oracle"].is_boolean()) errors.emplace_back("include_oracle: expected a boolean");
        else mc.include_oracle = j["include_oracle"].get<bool>();
    }
    if (j.contains("windows")) {
        mc.windows.clear();
        for (const auto& v : j["windows"]) {
            if (!v.is_number_integer() || v.get<long long>() < 100) errors.emplace_back("windows: integers >= 100");
            else mc.windows.push_back(v.get<std::size_t>());
        }
    }
    if (j.contains("levels")) {
        mc.levels.clear();
        for (const auto& v : j["levels"]) {
            if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() < 1.0))
                errors.emplace_back("levels: entries must lie in (0,1)");
            else mc.levels.push_back(v.get<double>());
        }
    }
    const auto& known = engine::all_model_names();
    auto check_model = [&](const std::string& name) {
        if (name != kOracleModel && std::find(known.begin(), known.end(), name) == known.end())
            errors.push_back("unknown model '" + name + "'");
    };
    if (j.contains("models")) {
        mc.models.clear();
        for (const auto& v : j["models"]) {
            if (!v.is_string()) {
                errors.emplace_back("models: entries must be strings");
                continue;
            }
            check_model(v.get<std::string>());
            if (v.get<std::string>() != kOracleModel) mc.models.push_back(v.get<std::string>());
            else mc.include_oracle = true;
        }
    }
    if (j.contains("cpa_pairs")) {
        for (const auto& v : j["cpa_pairs"]) {
            if (!v.is_array() || v.size() != 2 || !v[0].is_string() || !v[1].is_string()) {
                errors.emplace_back("cpa_pairs: entries must be [model1, model2]");
                continue;
            }
            check_model(v[0].get<std::string>());
            check_model(v[1].get<std::string>());
            mc.cpa_pairs.emplace_back(v[0].get<std::string>(), v[1].get<std::string>());
        }
    }
    if (dgp.kind == DgpKind::kGarchAssetFit && !j.contains("garch") && p.asset_path.empty())
        errors.emplace_back("garch_asset_fit needs either garch parameters or an asset file");

    CovariateStudy& cs = p.covariates;
    cs.reps = j.contains("reps") ? mc.reps : cs.reps;
    cs.n = mc.n;
    cs.num_trees = mc.num_trees;
    cs.refit_stride = mc.refit_stride;
    cs.seed = mc.seed;
    top.number("window", cs.window, 100);
    if (!j.contains("window") && !mc.windows.empty() && j.contains("windows")) cs.window = mc.windows.front();
    if (j.contains("sets")) {
        cs.sets.clear();
        for (const auto& v : j["sets"]) {
            std::vector<int> set;
            if (v.is_array())
                for (const auto& w : v)
                    if (w.is_number_integer() && w.get<int>() >= 2) set.push_back(w.get<int>());
            if (set.empty() || !v.is_array() || set.size() != v.size())
                errors.emplace_back("sets: entries must be nonempty arrays of integers >= 2");
            else cs.sets.push_back(std::move(set));
        }
    }
    if (p.study == StudyKind::kCovariateSelection) {
        if (dgp.kind != DgpKind::kSavRegime) errors.emplace_back("covariate_selection requires the sav_regime DGP");
        double level = 0.05;
        if (!mc.levels.empty()) level = mc.levels.front();
        if (explicit_sav) {
            cs.params = dgp.sav;
            cs.params.alpha = level;
        } else {
            cs.params = sav_fixture_params(level);
        }
    } else if (dgp.kind == DgpKind::kSavRegime && !explicit_sav) {
        const double level = mc.levels.empty() ? 0.05 : mc.levels.front();
        dgp.sav = sav_fixture_params(level);
    }

    if (!errors.empty()) {
        std::string msg = "invalid protocol (" + std::to_string(errors.size()) + " violation" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw Error(ErrorKind::kValidation, msg);
    }
    return p;
}

ProtocolFile load_protocol(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open protocol " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_protocol(ss.str(), fs::path(path).parent_path().string());
}

void apply_profile(ProtocolFile& p, Profile profile) {
    if (profile == Profile::kDesk) return;
    p.monte_carlo.reps = std::max<std::size_t>(p.monte_carlo.reps, 200);
    p.monte_carlo.num_trees = std::max<std::size_t>(p.monte_carlo.num_trees, 500);
    p.covariates.reps = std::max<std::size_t>(p.covariates.reps, 200);
    p.covariates.num_trees = std::max<std::size_t>(p.covariates.num_trees, 500);
}

void write_mc_tables(const McResult& r, const McProtocol& protocol, const std::string& out_dir,
                     std::vector<std::string>* written) {
    const fs::path dir(out_dir);
    const std::string dgp = protocol.dgp.label.empty() ? to_string(protocol.dgp.kind) : protocol.dgp.label;

    std::ostringstream cells;
    csv::write_row(cells, {"dgp", "window", "alpha", "model", "reps", "failed_reps", "mean_aoe", "reject_dq",
                           "mean_p_dq", "reject_kupiec", "mean_p_kupiec", "reject_christoffersen",
                           "mean_p_christoffersen"});
    for (const auto& c : r.cells)
        csv::write_row(cells, {dgp, std::to_string(c.window), num(c.alpha), c.model, std::to_string(c.reps),
                               std::to_string(c.failed_reps), num(c.mean_aoe), num(c.reject_dq), num(c.mean_p_dq),
                               num(c.reject_kupiec), num(c.mean_p_kupiec), num(c.reject_christoffersen),
                               num(c.mean_p_christoffersen)});
    write_file(dir / "mc_cells.csv", cells.str(), written);

    std::ostringstream reps;
    csv::write_row(reps, {"rep", "window", "alpha", "model", "failed", "failed_steps", "aoe", "p_dq", "p_kupiec",
                          "p_christoffersen"});
    for (const auto& x : r.records)
        csv::write_row(reps, {std::to_string(x.rep), std::to_string(x.window), num(x.alpha), x.model,
                              x.failed ? "1" : "0", std::to_string(x.failed_steps), num(x.aoe), num(x.p_dq),
                              num(x.p_kupiec), num(x.p_christoffersen)});
    write_file(dir / "mc_reps.csv", reps.str(), written);

    std::ostringstream cpa;
    csv::write_row(cpa, {"dgp", "window", "alpha", "model1", "model2", "reps", "mean_p", "significant",
                         "mean_performance_share", "mean_loss_win_share"});
    for (const auto& c : r.cpa_cells)
        csv::write_row(cpa, {dgp, std::to_string(c.window), num(c.alpha), c.model1, c.model2, std::to_string(c.reps),
                             num(c.mean_p), std::to_string(c.significant), num(c.mean_share),
                             num(c.mean_loss_win_share)});
    write_file(dir / "cpa_cells.csv", cpa.str(), written);

    std::ostringstream cpa_reps;
    csv::write_row(cpa_reps, {"rep", "window", "alpha", "model1", "model2", "p_value", "performance_share",
                              "loss_win_share"});
    for (const auto& x : r.cpa_records)
        csv::write_row(cpa_reps, {std::to_string(x.rep), std::to_string(x.window), num(x.alpha), x.model1, x.model2,
                                  num(x.p_value), num(x.performance_share), num(x.loss_win_share)});
    write_file(dir / "cpa_reps.csv", cpa_reps.str(), written);
}

void write_covariate_table(const std::vector<CovariateRow>& rows, const std::string& out_dir,
                           std::vector<std::string>* written) {
    const fs::path dir(out_dir);
    std::ostringstream t;
    csv::write_row(t, {"covariates", "reps", "mean_mse"});
    for (const auto& r : rows) csv::write_row(t, {r.label, std::to_string(r.rep_mse.size()), num(r.mean_mse)});
    write_file(dir / "covariate_mse.csv", t.str(), written);

    std::ostringstream reps;
    csv::write_row(reps, {"covariates", "rep", "mse"});
    for (const auto& r : rows)
        for (std::size_t k = 0; k < r.rep_mse.size(); ++k)
            csv::write_row(reps, {r.label, std::to_string(k), num(r.rep_mse[k])});
    write_file(dir / "covariate_reps.csv", reps.str(), written);
}

std::vector<std::string> run_protocol(const ProtocolFile& protocol, const std::string& out_dir) {
    std::vector<std::string> written;
    json meta;
    meta["study"] = protocol.study == StudyKind::kMonteCarlo ? "monte_carlo" : "covariate_selection";
    if (protocol.study == StudyKind::kCovariateSelection) {
        const CovariateStudy& cs = protocol.covariates;
        write_covariate_table(covariate_selection_study(cs), out_dir, &written);
        meta["seed"] = cs.seed;
        meta["reps"] = cs.reps;
        meta["n"] = cs.n;
        meta["window"] = cs.window;
        meta["num_trees"] = cs.num_trees;
        meta["refit_stride"] = cs.refit_stride;
        meta["sav"] = {{"g0", cs.params.g0}, {"g1", cs.params.g1}, {"g2", cs.params.g2}, {"g3", cs.params.g3},
                       {"alpha", cs.params.alpha}};
    } else {
        McProtocol mc = protocol.monte_carlo;
        if (mc.dgp.kind == DgpKind::kGarchAssetFit && !protocol.asset_path.empty()) {
            const auto asset = data::load_coinmetrics_csv(protocol.asset_path,
                                                          fs::path(protocol.asset_path).stem().string());
            mc.dgp = fit_asset_garch_for_sim(asset);
        }
        write_mc_tables(run_monte_carlo(mc), mc, out_dir, &written);
        meta["seed"] = mc.seed;
        meta["dgp"] = to_string(mc.dgp.kind);
        meta["reps"] = mc.reps;
        meta["n"] = mc.n;
        meta["windows"] = mc.windows;
        meta["levels"] = mc.levels;
        meta["models"] = mc.models;
        meta["num_trees"] = mc.num_trees;
        meta["refit_stride"] = mc.refit_stride;
        if (mc.dgp.kind == DgpKind::kSavRegime)
            meta["sav"] = {{"g0", mc.dgp.sav.g0}, {"g1", mc.dgp.sav.g1}, {"g2", mc.dgp.sav.g2}, {"g3", mc.dgp.sav.g3}};
        else meta["garch"] = {{"omega", mc.dgp.garch.omega}, {"a", mc.dgp.garch.a}, {"b", mc.dgp.garch.b}};
    }
    write_file(fs::path(out_dir) / "metadata.json", meta.dump(2) + "\n", &written);
    return written;
}

}  // namespace qv::sim
