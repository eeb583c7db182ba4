#include "quantvar/engine.hpp"

#include "quantvar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

namespace qv::engine {

double median_or_missing(std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    if (values.empty()) return kMissing;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<DqMedianRow> summarize_dq_medians(
    const std::vector<EvalReport>& reports,
    const std::function<std::string(const std::string&, const std::string&)>& group_of) {
    using Key = std::tuple<std::string, std::string, double, std::string>;
    std::map<Key, std::vector<double>> cells;
    std::vector<Key> order;
    for (const auto& r : reports) {
        const std::string group = group_of ? group_of(r.period, r.asset) : std::string{};
        Key k{r.period, group, r.alpha, r.model};
        auto [it, inserted] = cells.try_emplace(k);
        if (inserted) order.push_back(k);
        it->second.push_back(r.summary.dq.p_value);
    }
    std::vector<DqMedianRow> out;
    for (const auto& k : order) {
        const auto& ps = cells.at(k);
        DqMedianRow row;
        row.period = std::get<0>(k);
        row.group = std::get<1>(k);
        row.alpha = std::get<2>(k);
        row.model = std::get<3>(k);
        row.assets = ps.size();
        row.median_p = median_or_missing(ps);
        out.push_back(std::move(row));
    }
    return out;
}

Split split_steepest_decay(std::span<const double> values) {
    if (values.size() < 3) throw Error(ErrorKind::kInvalidArgument, "steepest-decay split needs at least 3 values");
    for (double v : values)
        if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "steepest-decay split needs finite values");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v));
    const double tie = 1e-12 * std::max(scale, 1.0);
    std::size_t cut = 0;
    double best = -1.0;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        const double gap = values[idx[k]] - values[idx[k + 1]];
        if (gap > best + tie) {
            best = gap;
            cut = k;
        }
    }
    Split s;
    s.high.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut + 1));
    s.low.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut + 1), idx.end());
    s.threshold = values[idx[cut]];
    return s;
}

bool grf_outperformed(const std::vector<PairReport>& pairs, const std::string& asset, const std::string& period,
                      double alpha, const std::vector<std::string>& rivals, std::size_t min_wins) {
    std::size_t wins = 0;
    for (const auto& rival : rivals) {
        for (const auto& p : pairs) {
            if (p.asset != asset || p.period != period || p.alpha != alpha) continue;
            if (p.model1 == "GRF" && p.model2 == rival) {
                if (!p.result.degenerate && p.result.performance_share < 0.5) ++wins;
                break;
            }
        }
    }
    return wins >= min_wins;
}

std::vector<RatioRow> group_covariate_ratio(const std::map<std::string, std::map<std::string, double>>& asset_medians,
                                            const std::vector<std::string>& low,
                                            const std::vector<std::string>& high) {
    std::vector<std::string> covariates;
    std::set<std::string> seen;
    for (auto name : data::kExternalNames) {
        for (const auto& [asset, m] : asset_medians) {
            if (m.contains(std::string(name))) {
                covariates.emplace_back(name);
                seen.emplace(name);
                break;
            }
        }
    }
    std::set<std::string> others;
    for (const auto& [asset, m] : asset_medians)
        for (const auto& [c, v] : m)
            if (!seen.contains(c)) others.insert(c);
    covariates.insert(covariates.end(), others.begin(), others.end());

    auto group_mean = [&](const std::vector<std::string>& assets, const std::string& c) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& a : assets) {
            const auto it = asset_medians.find(a);
            if (it == asset_medians.end()) continue;
            const auto jt = it->second.find(c);
            if (jt == it->second.end() || std::isnan(jt->second)) continue;
            s += jt->second;
            ++n;
        }
        return n == 0 ? kMissing : s / static_cast<double>(n);
    };

    std::vector<RatioRow> out;
    for (const auto& c : covariates) {
        RatioRow r;
        r.covariate = c;
        r.low_mean = group_mean(low, c);
        r.high_mean = group_mean(high, c);
        if (!std::isnan(r.low_mean) && !std::isnan(r.high_mean) && r.high_mean != 0.0) {
            r.ratio = r.low_mean / r.high_mean;
            r.defined = true;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace qv::engine
