#include "quantvar/data.hpp"
#include "quantvar/error.hpp"
#include "quantvar/experiment.hpp"
#include "quantvar/sim_protocol.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One JSON object per failure on stderr, so callers can parse it.
int fail(const std::string& kind, const std::string& message, const std::string& file = {}, std::size_t line = 0) {
    json rec{{"error", kind}, {"message", message}};
    if (!file.empty()) rec["file"] = file;
    if (line) rec["line"] = line;
    std::cerr << rec.dump() << '\n';
    return 2;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            throw qv::Error(qv::ErrorKind::kIo, "no such file or directory: " + in);
        }
    }
    return files;
}

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& out_dir) {
    const auto files = expand_inputs(inputs);
    if (files.empty()) throw qv::Error(qv::ErrorKind::kIo, "no CSV files to ingest");
    fs::create_directories(out_dir);
    for (const auto& f : files) {
        const std::string id = f.stem().string();
        const auto series = qv::data::load_coinmetrics_csv(f.string(), id);
        const fs::path target = fs::path(out_dir) / (id + ".csv");
        std::ofstream out(target);
        if (!out) throw qv::Error(qv::ErrorKind::kIo, "cannot write " + target.string());
        qv::data::write_asset_csv(out, series);
        std::cout << id << " rows=" << series.dates.size() << " span=" << series.dates.front().to_string() << ".."
                  << series.dates.back().to_string() << " X=" << series.external_count() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantvar: one-day-ahead Value-at-Risk forecasting and evaluation"};
    app.require_subcommand(1);

    std::vector<std::string> ingest_inputs;
    std::string ingest_out = "assets";
    auto* ingest = app.add_subcommand("ingest", "Validate asset CSVs and write normalized copies");
    ingest->add_option("paths", ingest_inputs, "CSV files or directories")->required();
    ingest->add_option("--out", ingest_out, "Output directory");

    std::string manifest_path;
    qv::engine::RunOptions run_opts;
    std::uint64_t run_seed = 0;
    double run_alpha = 0.0;
    std::size_t run_window = 0;
    std::string run_out;
    auto* run = app.add_subcommand("run", "Run an experiment manifest");
    run->add_option("manifest", manifest_path, "Manifest JSON")->required()->check(CLI::ExistingFile);
    run->add_flag("--resume", run_opts.resume, "Reuse finished forecast files");
    run->add_option("--jobs", run_opts.jobs, "Parallel tasks")->check(CLI::PositiveNumber);
    auto* seed_opt = run->add_option("--seed", run_seed, "Override the manifest seed");
    auto* alpha_opt = run->add_option("--alpha", run_alpha, "Single VaR level")->check(CLI::Range(0.0, 1.0));
    auto* window_opt = run->add_option("--window", run_window, "Single training window")->check(CLI::Range(100, 100000));
    run->add_option("--out", run_out, "Override the output directory");

    std::string protocol_path, profile = "desk", sim_out = "sim_results";
    std::uint64_t sim_seed = 0;
    std::size_t sim_jobs = 1;
    double sim_alpha = 0.0;
    std::size_t sim_window = 0;
    auto* sim = app.add_subcommand("sim", "Run a Monte-Carlo protocol");
    sim->add_option("protocol", protocol_path, "Protocol JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--profile", profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Override the protocol seed");
    sim->add_option("--jobs", sim_jobs, "Parallel replications")->check(CLI::PositiveNumber);
    auto* sim_alpha_opt = sim->add_option("--alpha", sim_alpha, "Single VaR level")->check(CLI::Range(0.0, 1.0));
    auto* sim_window_opt = sim->add_option("--window", sim_window, "Single training window")->check(CLI::Range(100, 100000));
    sim->add_option("--out", sim_out, "Output directory");

    std::string report_dir, report_kind;
    std::vector<std::size_t> loss_windows = {30, 180};
    auto* report = app.add_subcommand("report", "Rebuild report tables from a results directory");
    report->add_option("results", report_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--kind", report_kind, "dq-median, cpa-grid, loss-series or importance")->required();
    report->add_option("--loss-windows", loss_windows, "Rolling-mean windows for loss-series");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("Usage", e.what());
    }

    try {
        if (*ingest) return cmd_ingest(ingest_inputs, ingest_out);
        if (*run) {
            auto manifest = qv::engine::load_manifest(manifest_path);
            if (*seed_opt) run_opts.seed = run_seed;
            if (*alpha_opt) run_opts.alpha = run_alpha;
            if (*window_opt) run_opts.window = run_window;
            if (!run_out.empty()) manifest.output_dir = run_out;
            if (const char* cache = std::getenv("QUANTVAR_CACHE")) run_opts.cache_dir = cache;
            run_opts.log = &std::cerr;
            const auto s = qv::engine::run_experiment(manifest, run_opts);
            for (const auto& note : s.notes) std::cerr << "note: " << note << '\n';
            std::cout << "tasks=" << s.tasks << " computed=" << s.computed << " resumed=" << s.resumed
                      << " skipped=" << s.skipped << " out=" << manifest.output_dir << '\n';
            return 0;
        }
        if (*sim) {
            auto p = qv::sim::load_protocol(protocol_path);
            qv::sim::apply_profile(p, qv::sim::parse_profile(profile));
            if (*sim_seed_opt) p.monte_carlo.seed = p.covariates.seed = sim_seed;
            if (*sim_alpha_opt) {
                p.monte_carlo.levels = {sim_alpha};
                p.covariates.params = qv::sim::sav_fixture_params(sim_alpha);
            }
            if (*sim_window_opt) {
                p.monte_carlo.windows = {sim_window};
                p.covariates.window = sim_window;
            }
            p.monte_carlo.jobs = p.covariates.jobs = sim_jobs;
            for (const auto& f : qv::sim::run_protocol(p, sim_out)) std::cout << f << '\n';
            return 0;
        }
        if (*report) {
            const auto kind = qv::engine::parse_report_kind(report_kind);
            for (const auto& f : qv::engine::write_report(report_dir, kind, loss_windows)) std::cout << f << '\n';
            return 0;
        }
    } catch (const qv::ParseError& e) {
        return fail(std::string(qv::to_string(e.kind())), e.what(), e.file(), e.line());
    } catch (const qv::Error& e) {
        return fail(std::string(qv::to_string(e.kind())), e.what());
    } catch (const std::exception& e) {
        return fail("Internal", e.what());
    }
    return 0;
}
