#pragma once

#include "quantvar/data.hpp"
#include "quantvar/rng.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace qvtest {

inline std::vector<qv::Date> daily(qv::Date start, std::size_t n) {
    std::vector<qv::Date> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(start.plus_days(static_cast<long>(i)));
    return d;
}

inline std::vector<double> normal_draws(std::size_t n, double sd, std::uint64_t seed) {
    auto rng = qv::make_engine(seed, {77});
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> out(n);
    for (double& v : out) v = z(rng);
    return out;
}

inline std::string fixture(const std::string& rel) { return std::string(QV_FIXTURE_DIR) + "/" + rel; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("quantvar_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace qvtest
