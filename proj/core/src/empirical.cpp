#include "quantvar/error.hpp"
#include "quantvar/parametric.hpp"
#include "quantvar/stats.hpp"

#include <cmath>

namespace qv::parametric {

double hist_var(std::span<const double> window, double alpha) {
    if (window.size() < 20) throw Error(ErrorKind::kInsufficientData, "historical VaR needs at least 20 returns");
    return stats::type1_quantile(window, alpha);
}

NormFitModel fit_normal(std::span<const double> window) {
    if (window.size() < 2) throw Error(ErrorKind::kInsufficientData, "normal fit needs at least 2 returns");
    return {stats::mean(window), stats::sample_sd(window)};
}

double normfit_var(std::span<const double> window, double alpha) {
    const NormFitModel m = fit_normal(window);
    if (!(m.sigma > 0.0)) throw EstimationFailure("zero variance in normal fit window", {m.mu, m.sigma});
    return m.mu + m.sigma * stats::normal_quantile(alpha);
}

}  // namespace qv::parametric
