#pragma once

#include "quantvar/sim.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace qv::sim {

enum class StudyKind { kMonteCarlo, kCovariateSelection };

enum class Profile { kDesk, kFull };

[[nodiscard]] Profile parse_profile(std::string_view text);

/// A simulation protocol file (schema version 1).
struct ProtocolFile {
    StudyKind study = StudyKind::kMonteCarlo;
    McProtocol monte_carlo;
    CovariateStudy covariates;
    std::string asset_path;  // garch_asset_fit without explicit parameters
};

[[nodiscard]] ProtocolFile parse_protocol(std::string_view json_text, const std::string& base_dir);
[[nodiscard]] ProtocolFile load_protocol(const std::string& path);

/// desk keeps the file's sizes; full raises reps to 200 and trees to 500.
void apply_profile(ProtocolFile& protocol, Profile profile);

/// Runs the study and writes its tables plus metadata.json into out_dir.
/// Returns the files written.
std::vector<std::string> run_protocol(const ProtocolFile& protocol, const std::string& out_dir);

void write_mc_tables(const McResult& result, const McProtocol& protocol, const std::string& out_dir,
                     std::vector<std::string>* written = nullptr);
void write_covariate_table(const std::vector<CovariateRow>& rows, const std::string& out_dir,
                           std::vector<std::string>* written = nullptr);

}  // namespace qv::sim
