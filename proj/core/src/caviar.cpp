#include "quantvar/error.hpp"
#include "quantvar/optim.hpp"
#include "quantvar/parametric.hpp"
#include "quantvar/rng.hpp"
#include "quantvar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qv::parametric {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sav_objective(std::span<const double> r, double alpha, double f0, double b1, double b2, double b3) {
    if (!(std::abs(b2) < 1.0) || !std::isfinite(b1) || !std::isfinite(b3)) return kInf;
    double f = f0;
    double loss = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) f = b1 + b2 * f + b3 * std::abs(r[t - 1]);
        const double u = r[t] - f;
        loss += u * (alpha - (u <= 0.0 ? 1.0 : 0.0));
    }
    return std::isfinite(loss) ? loss : kInf;
}

}  // namespace

std::vector<double> sav_path(std::span<const double> returns, double b1, double b2, double b3, double f0) {
    std::vector<double> f(returns.size());
    if (f.empty()) return f;
    f[0] = f0;
    for (std::size_t t = 1; t < returns.size(); ++t) f[t] = b1 + b2 * f[t - 1] + b3 * std::abs(returns[t - 1]);
    return f;
}

double sav_initial_value(std::span<const double> returns, double alpha) {
    if (returns.empty()) throw Error(ErrorKind::kInsufficientData, "empty return window");
    const std::size_t m = std::max<std::size_t>(1, returns.size() / 10);
    return stats::type1_quantile(returns.first(m), alpha);
}

SavModel fit_caviar_sav(std::span<const double> returns, double alpha, const SavOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must lie in (0,1)");
    if (returns.size() < 100) throw Error(ErrorKind::kInsufficientData, "CAViaR needs at least 100 returns");
    if (options.num_starts == 0 || options.num_refined == 0)
        throw Error(ErrorKind::kInvalidArgument, "CAViaR needs at least one start");
    for (double r : returns)
        if (!std::isfinite(r)) throw Error(ErrorKind::kMissingCovariate, "CAViaR input has missing returns");

    const double f0 = sav_initial_value(returns, alpha);
    auto objective = [&](const std::vector<double>& b) {
        return sav_objective(returns, alpha, f0, b[0], b[1], b[2]);
    };

    RandomEngine rng = make_engine(options.seed, {0x5A7});
    std::uniform_real_distribution<double> u1(options.beta1_lo, options.beta1_hi);
    std::uniform_real_distribution<double> u2(options.beta2_lo, options.beta2_hi);
    std::uniform_real_distribution<double> u3(options.beta3_lo, options.beta3_hi);
    std::vector<std::vector<double>> starts(options.num_starts);
    std::vector<double> values(options.num_starts);
    for (std::size_t i = 0; i < options.num_starts; ++i) {
        const double b1 = u1(rng);
        const double b2 = u2(rng);
        const double b3 = u3(rng);
        starts[i] = {b1, b2, b3};
        values[i] = objective(starts[i]);
    }
    std::vector<std::size_t> order(options.num_starts);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t m = std::min(options.num_refined, options.num_starts);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] < values[b] || (values[a] == values[b] && a < b); });

    optim::NelderMeadOptions nm;
    nm.f_tolerance = options.tolerance;
    nm.x_tolerance = options.tolerance;
    optim::OptimResult best;
    best.value = kInf;
    for (std::size_t i = 0; i < m; ++i) {
        optim::OptimResult r = optim::nelder_mead(objective, starts[order[i]], nm);
        if (std::isfinite(r.value) && std::abs(r.x[1]) < 1.0 && r.value < best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value))
        throw EstimationFailure("no CAViaR start satisfies |beta2| < 1 after refinement", starts[order[0]]);

    SavModel model;
    model.alpha = alpha;
    model.beta1 = best.x[0];
    model.beta2 = best.x[1];
    model.beta3 = best.x[2];
    model.f0 = f0;
    model.objective = best.value;
    const std::vector<double> path = sav_path(returns, model.beta1, model.beta2, model.beta3, f0);
    model.last_var = path.back();
    model.last_return = returns.back();
    return model;
}

double forecast_var_sav(const SavModel& model, double current_var, double current_return) {
    return model.beta1 + model.beta2 * current_var + model.beta3 * std::abs(current_return);
}

double forecast_var_sav(const SavModel& model) { return forecast_var_sav(model, model.last_var, model.last_return); }

}  // namespace qv::parametric
