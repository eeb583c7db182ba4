#include "helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli(const std::string& args, const fs::path& scratch) {
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = std::string("\"") + QV_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = slurp(e.path());
    return m;
}

nlohmann::json small_manifest(const fs::path& out) {
    return {
        {"schema_version", 1},
        {"assets", {{{"id", "btc"}, {"path", qvtest::fixture("assets/btc.csv")}},
                    {{"id", "doge"}, {"path", qvtest::fixture("assets/doge.csv")}}}},
        {"models", {"GRF", "QR", "Hist", "GRF-X"}},
        {"levels", {0.05}},
        {"windows", {250}},
        {"periods", {{{"label", "P3"}, {"start", "2021-10-01"}, {"end", "2021-12-31"}}}},
        {"seed", 3},
        {"output_dir", out.string()},
        {"forest", {{"num_trees", 10}, {"min_node_size", 5}}},
        {"refit_stride", 10},
        {"importance_stride", 30},
        {"loss_windows", {30}},
        {"reference_model", "GRF"},
        {"group_rivals", {"QR", "Hist"}},
    };
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("ingest prints a summary line per asset") {
    const auto dir = qvtest::temp_dir("ingest");
    const auto o = cli("ingest \"" + qvtest::fixture("assets") + "\" --out \"" + (dir / "store").string() + "\"", dir);
    CHECK(o.code == 0);
    CHECK(o.out.find("btc rows=") != std::string::npos);
    CHECK(o.out.find("X=7") != std::string::npos);
    CHECK(o.out.find("doge rows=") != std::string::npos);
    CHECK(o.out.find("X=0") != std::string::npos);
    for (auto id : {"btc", "eth", "ltc", "doge", "usdt"}) CHECK(fs::exists(dir / "store" / (std::string(id) + ".csv")));
}

TEST_CASE("corrupt input is reported with file and line") {
    const auto dir = qvtest::temp_dir("corrupt");
    const auto o = cli("ingest \"" + qvtest::fixture("bad/corrupt.csv") + "\" --out \"" + dir.string() + "\"", dir);
    CHECK(o.code != 0);
    const auto rec = nlohmann::json::parse(o.err);
    CHECK(rec["error"] == "ParseError");
    CHECK(rec["file"].get<std::string>().find("corrupt.csv") != std::string::npos);
    CHECK(rec["line"] == 3);
}

TEST_CASE("invalid manifest lists every violation") {
    const auto dir = qvtest::temp_dir("badmanifest");
    auto m = small_manifest(dir / "out");
    m["colour"] = "blue";
    m["windows"] = {10};
    m["assets"][0]["path"] = "missing.csv";
    write(dir / "m.json", m.dump());
    const auto o = cli("run \"" + (dir / "m.json").string() + "\"", dir);
    CHECK(o.code != 0);
    const auto rec = nlohmann::json::parse(o.err);
    CHECK(rec["error"] == "ValidationError");
    const std::string msg = rec["message"];
    CHECK(msg.find("3 violations") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
    CHECK(msg.find("missing.csv") != std::string::npos);
}

TEST_CASE("run emits the expected files and resumes to identical outputs") {
    const auto dir = qvtest::temp_dir("run");
    write(dir / "m.json", small_manifest(dir / "out").dump());
    const auto first = cli("run \"" + (dir / "m.json").string() + "\"", dir);
    REQUIRE_MESSAGE(first.code == 0, first.err);
    CHECK(first.err.find("doge") != std::string::npos);  // GRF-X skipped for an asset without externals

    const fs::path out = dir / "out";
    for (auto rel : {"metadata.json", "eval/backtests.csv", "eval/cpa_pairs.csv", "eval/asset_covariates.csv",
                     "forecasts/P3/btc/GRF_a0.05_w250.csv", "forecasts/P3/btc/GRF-X_a0.05_w250.csv",
                     "forecasts/P3/doge/Hist_a0.05_w250.csv", "tables/dq_median.csv", "tables/cpa_grid.csv",
                     "tables/cpa_cells.csv", "tables/covariate_ratio.csv", "tables/importance_top5.csv"})
        CHECK_MESSAGE(fs::exists(out / rel), rel);
    CHECK_FALSE(fs::exists(out / "forecasts/P3/doge/GRF-X_a0.05_w250.csv"));
    const auto meta = nlohmann::json::parse(slurp(out / "metadata.json"));
    CHECK(meta["seed"] == 3);

    const auto full = tree_contents(out);
    fs::remove(out / "forecasts/P3/btc/QR_a0.05_w250.csv");
    fs::remove_all(out / "eval");
    fs::remove_all(out / "tables");
    const auto again = cli("run \"" + (dir / "m.json").string() + "\" --resume", dir);
    REQUIRE(again.code == 0);
    CHECK(again.out.find("computed=1") != std::string::npos);
    CHECK(tree_contents(out) == full);

    for (auto kind : {"dq-median", "cpa-grid", "loss-series", "importance"}) {
        const auto r = cli("report \"" + out.string() + "\" --kind " + kind, dir);
        CHECK_MESSAGE(r.code == 0, kind, r.err);
        CHECK_FALSE(r.out.empty());
    }
    CHECK(fs::exists(out / "tables/loss_series/P3/btc"));
    const auto bad = cli("report \"" + out.string() + "\" --kind pie-chart", dir);
    CHECK(bad.code != 0);
}

TEST_CASE("sim is reproducible and reports the oracle") {
    const auto dir = qvtest::temp_dir("sim");
    const nlohmann::json proto = {
        {"schema_version", 1}, {"study", "monte_carlo"}, {"dgp", "garch_normal"}, {"reps", 2},
        {"n", 560},           {"windows", {500}},       {"levels", {0.05}},     {"models", {"Hist", "NormFit"}},
        {"include_oracle", true}, {"cpa_pairs", nlohmann::json::array({nlohmann::json::array({"Hist", "NormFit"})})}, {"seed", 9},
    };
    write(dir / "p.json", proto.dump());
    const auto a = cli("sim \"" + (dir / "p.json").string() + "\" --out \"" + (dir / "a").string() + "\"", dir);
    REQUIRE_MESSAGE(a.code == 0, a.err);
    const auto b =
        cli("sim \"" + (dir / "p.json").string() + "\" --jobs 2 --out \"" + (dir / "b").string() + "\"", dir);
    REQUIRE(b.code == 0);
    CHECK(tree_contents(dir / "a") == tree_contents(dir / "b"));
    const auto cells = slurp(dir / "a" / "mc_cells.csv");
    CHECK(cells.find(",Oracle,") != std::string::npos);
    CHECK(fs::exists(dir / "a" / "cpa_cells.csv"));

    const auto c = cli("sim \"" + (dir / "p.json").string() + "\" --seed 10 --out \"" + (dir / "c").string() + "\"",
                       dir);
    REQUIRE(c.code == 0);
    CHECK(slurp(dir / "c" / "mc_reps.csv") != slurp(dir / "a" / "mc_reps.csv"));
}

TEST_CASE("usage errors exit nonzero with a record") {
    const auto dir = qvtest::temp_dir("usage");
    const auto o = cli("frobnicate", dir);
    CHECK(o.code != 0);
    CHECK(nlohmann::json::parse(o.err)["error"] == "Usage");
}

}  // TEST_SUITE
