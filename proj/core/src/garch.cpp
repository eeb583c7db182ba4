#include "quantvar/error.hpp"
#include "quantvar/optim.hpp"
#include "quantvar/parametric.hpp"
#include "quantvar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qv::parametric {
namespace {

constexpr double kPersistenceCap = 1.0 - 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t theta_size(GarchKind kind, std::size_t k) {
    switch (kind) {
        case GarchKind::kPlain: return 3;
        case GarchKind::kGjr: return 4;
        case GarchKind::kExogenous: return 3 + k;
    }
    return 3;
}

// Natural parameters and their Jacobian with respect to theta. Natural
// order: omega, a, b, gamma, L_1..L_k (omega relative to the sample variance).
struct Natural {
    double omega = 0.0;  // in units of the sample variance
    double a = 0.0, b = 0.0, gamma = 0.0;
    std::vector<double> load;
    std::vector<double> jac;  // (4 + k) x m row-major
    std::size_t m = 0;
    double& j(std::size_t row, std::size_t col) { return jac[row * m + col]; }
};

Natural to_natural(std::span<const double> th, GarchKind kind, std::size_t k) {
    Natural nat;
    nat.m = th.size();
    const std::size_t k_eff = kind == GarchKind::kExogenous ? k : 0;
    nat.jac.assign((4 + k_eff) * nat.m, 0.0);
    nat.omega = std::exp(th[0]);
    nat.j(0, 0) = nat.omega;
    const double sig = logistic(th[1]);
    const double p = kPersistenceCap * sig;
    const double dp = kPersistenceCap * sig * (1.0 - sig);
    if (kind == GarchKind::kGjr) {
        const double mx = std::max({th[2], th[3], 0.0});
        const double e1 = std::exp(th[2] - mx), e2 = std::exp(th[3] - mx), e3 = std::exp(-mx);
        const double z = e1 + e2 + e3;
        const double s1 = e1 / z, s2 = e2 / z, s3 = e3 / z;
        nat.a = 2.0 * p * s1;
        nat.gamma = 2.0 * p * (s2 - s1);
        nat.b = p * s3;
        nat.j(1, 1) = 2.0 * s1 * dp;
        nat.j(3, 1) = 2.0 * (s2 - s1) * dp;
        nat.j(2, 1) = s3 * dp;
        nat.j(1, 2) = 2.0 * p * s1 * (1.0 - s1);
        nat.j(3, 2) = 2.0 * p * (-s1 * s2 - s1 * (1.0 - s1));
        nat.j(2, 2) = -p * s3 * s1;
        nat.j(1, 3) = -2.0 * p * s1 * s2;
        nat.j(3, 3) = 2.0 * p * (s2 * (1.0 - s2) + s1 * s2);
        nat.j(2, 3) = -p * s3 * s2;
    } else {
        const double s1 = logistic(th[2]);
        const double s2 = 1.0 - s1;
        nat.a = p * s1;
        nat.b = p * s2;
        nat.j(1, 1) = s1 * dp;
        nat.j(2, 1) = s2 * dp;
        nat.j(1, 2) = p * s1 * s2;
        nat.j(2, 2) = -p * s1 * s2;
    }
    nat.load.assign(k_eff, 0.0);
    for (std::size_t c = 0; c < k_eff; ++c) {
        nat.load[c] = th[3 + c] * th[3 + c];
        nat.j(4 + c, 3 + c) = 2.0 * th[3 + c];
    }
    return nat;
}

// Residuals normalised by their standard deviation and exogenous columns by
// their mean absolute value, so the optimiser works on unit scales.
struct Prepared {
    std::vector<double> e;     // demeaned returns
    double mean = 0.0;
    double variance = 0.0;     // sample variance of e
    std::vector<double> x;     // normalised exogenous, row-major n x k
    std::vector<double> scale; // per-column normaliser
    std::size_t k = 0;
};

Prepared prepare(std::span<const double> returns, GarchKind kind, std::span<const double> exog, std::size_t k) {
    Prepared pr;
    const std::size_t n = returns.size();
    for (double r : returns)
        if (!std::isfinite(r)) throw Error(ErrorKind::kMissingCovariate, "GARCH input has missing returns");
    pr.mean = stats::mean(returns);
    pr.e.resize(n);
    for (std::size_t t = 0; t < n; ++t) pr.e[t] = returns[t] - pr.mean;
    pr.variance = stats::sample_variance(pr.e);
    if (kind == GarchKind::kExogenous) {
        if (exog.size() != n * k) throw Error(ErrorKind::kInvalidArgument, "exogenous matrix does not match returns");
        pr.k = k;
        pr.scale.assign(k, 0.0);
        for (std::size_t t = 1; t < n; ++t)
            for (std::size_t c = 0; c < k; ++c) {
                const double v = exog[t * k + c];
                if (!std::isfinite(v)) throw Error(ErrorKind::kMissingCovariate, "GARCH-X input has missing regressors");
                pr.scale[c] += std::abs(v);
            }
        for (double& s : pr.scale) {
            s /= static_cast<double>(n - 1);
            if (!(s > 0.0)) s = 1.0;
        }
        pr.x.resize(n * k);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t c = 0; c < k; ++c) pr.x[t * k + c] = std::abs(exog[t * k + c]) / pr.scale[c];
    }
    return pr;
}

// Mean negative log-likelihood (without the 2 pi constant) in units where the
// sample variance is 1; optionally accumulates the theta-gradient.
double evaluate(std::span<const double> th, GarchKind kind, const Prepared& pr, std::vector<double>* grad) {
    const std::size_t n = pr.e.size();
    const std::size_t k = kind == GarchKind::kExogenous ? pr.k : 0;
    Natural nat = to_natural(th, kind, k);
    const double v = pr.variance;
    const std::size_t np = 4 + k;
    std::vector<double> dsig(np, 0.0), dnat(np, 0.0);

    double sig2 = 1.0;  // sigma2_1 / v
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double e2 = pr.e[t] * pr.e[t] / v;
        if (t > 0) {
            const double ep2 = pr.e[t - 1] * pr.e[t - 1] / v;
            const double neg = pr.e[t - 1] < 0.0 ? ep2 : 0.0;
            double next = nat.omega + nat.a * ep2 + nat.gamma * neg + nat.b * sig2;
            for (std::size_t c = 0; c < k; ++c) next += nat.load[c] * pr.x[t * pr.k + c];
            if (grad) {
                const double prev = sig2;
                for (double& d : dsig) d *= nat.b;
                dsig[0] += 1.0;
                dsig[1] += ep2;
                dsig[2] += prev;
                dsig[3] += neg;
                for (std::size_t c = 0; c < k; ++c) dsig[4 + c] += pr.x[t * pr.k + c];
            }
            sig2 = next;
        }
        if (!(sig2 > 0.0) || !std::isfinite(sig2)) return kInf;
        total += 0.5 * (std::log(sig2) + e2 / sig2);
        if (grad && t > 0) {
            const double w = 0.5 * (1.0 / sig2 - e2 / (sig2 * sig2));
            for (std::size_t i = 0; i < np; ++i) dnat[i] += w * dsig[i];
        }
    }
    const double dn = static_cast<double>(n);
    if (grad) {
        grad->assign(nat.m, 0.0);
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t c = 0; c < nat.m; ++c) (*grad)[c] += dnat[i] / dn * nat.j(i, c);
    }
    return total / dn;
}

GarchModel model_from(std::span<const double> th, GarchKind kind, const Prepared& pr) {
    const Natural nat = to_natural(th, kind, pr.k);
    GarchModel m;
    m.kind = kind;
    m.omega = nat.omega * pr.variance;
    m.a = nat.a;
    m.b = nat.b;
    m.gamma = nat.gamma;
    m.exog = nat.load;
    m.exog_scale = kind == GarchKind::kExogenous ? pr.scale : std::vector<double>{};
    m.variance_scale = pr.variance;
    m.mean = pr.mean;
    return m;
}

std::vector<double> start_theta(GarchKind kind, std::size_t k) {
    const double a = 0.05, b = 0.90;
    const double p = a + b;
    std::vector<double> th(theta_size(kind, k), 0.0);
    th[0] = std::log(1.0 - p);
    const double s = p / kPersistenceCap;
    th[1] = std::log(s / (1.0 - s));
    if (kind == GarchKind::kGjr) {
        // a = 2 p s1, gamma = 0 -> s2 = s1 = a / (2p), s3 = b / p
        th[2] = std::log(0.5 * a / b);
        th[3] = th[2];
    } else {
        th[2] = std::log(a / b);
    }
    for (std::size_t c = 0; kind == GarchKind::kExogenous && c < k; ++c) th[3 + c] = 0.1;
    return th;
}

}  // namespace

std::string to_string(GarchKind kind) {
    switch (kind) {
        case GarchKind::kPlain: return "GARCH";
        case GarchKind::kGjr: return "GJR-GARCH";
        case GarchKind::kExogenous: return "GARCH-X";
    }
    return "GARCH";
}

double garch_objective(std::span<const double> theta, GarchKind kind, std::span<const double> residuals,
                       std::span<const double> exogenous, std::size_t exog_cols) {
    const Prepared pr = prepare(residuals, kind, exogenous, exog_cols);
    if (theta.size() != theta_size(kind, pr.k)) throw Error(ErrorKind::kInvalidArgument, "parameter vector size");
    return evaluate(theta, kind, pr, nullptr);
}

std::vector<double> garch_objective_gradient(std::span<const double> theta, GarchKind kind,
                                             std::span<const double> residuals, std::span<const double> exogenous,
                                             std::size_t exog_cols) {
    const Prepared pr = prepare(residuals, kind, exogenous, exog_cols);
    if (theta.size() != theta_size(kind, pr.k)) throw Error(ErrorKind::kInvalidArgument, "parameter vector size");
    std::vector<double> g;
    evaluate(theta, kind, pr, &g);
    return g;
}

GarchFit fit_garch(std::span<const double> returns, GarchKind kind, std::span<const double> exogenous,
                   std::size_t exog_cols, const GarchOptions& options) {
    if (returns.size() < 100) throw Error(ErrorKind::kInsufficientData, "GARCH needs at least 100 returns");
    if (kind != GarchKind::kExogenous) exog_cols = 0;
    const Prepared pr = prepare(returns, kind, exogenous, exog_cols);
    if (!(pr.variance > 1e-300) || !std::isfinite(pr.variance))
        throw EstimationFailure("degenerate likelihood: return series has zero variance");

    const std::vector<double> th0 = start_theta(kind, pr.k);
    auto f = [&](const std::vector<double>& th) { return evaluate(th, kind, pr, nullptr); };
    auto g = [&](const std::vector<double>& th) {
        std::vector<double> out;
        if (!std::isfinite(evaluate(th, kind, pr, &out))) out.assign(th.size(), 0.0);
        return out;
    };
    optim::BfgsOptions bo;
    bo.gradient_tolerance = options.gradient_tolerance;
    bo.max_iterations = options.max_iterations;
    const optim::OptimResult res = optim::bfgs(f, g, th0, bo);
    if (!res.converged || !std::isfinite(res.value))
        throw EstimationFailure("GARCH likelihood optimisation did not converge (gradient norm " +
                                    std::to_string(res.gradient_norm) + ")",
                                res.x);

    const double n = static_cast<double>(returns.size());
    const double constant = 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * std::log(pr.variance);
    GarchFit fit;
    fit.model = model_from(res.x, kind, pr);
    fit.log_likelihood = -n * (res.value + constant);
    fit.initial_log_likelihood = -n * (f(th0) + constant);
    fit.iterations = res.iterations;
    fit.gradient_norm = res.gradient_norm;
    fit.variances = garch_variances(fit.model, pr.e, exogenous, pr.k, pr.variance);
    fit.state.last_residual = pr.e.back();
    fit.state.last_variance = fit.variances.back();
    return fit;
}

std::vector<double> garch_variances(const GarchModel& model, std::span<const double> residuals,
                                    std::span<const double> exogenous, std::size_t exog_cols,
                                    double initial_variance) {
    const std::size_t n = residuals.size();
    std::vector<double> s(n);
    if (n == 0) return s;
    const std::size_t k = model.kind == GarchKind::kExogenous ? exog_cols : 0;
    if (k > 0 && (exogenous.size() != n * k || model.exog.size() != k || model.exog_scale.size() != k))
        throw Error(ErrorKind::kInvalidArgument, "exogenous matrix does not match the model");
    s[0] = initial_variance;
    for (std::size_t t = 1; t < n; ++t) {
        const double e = residuals[t - 1];
        double v = model.omega + (model.a + (e < 0.0 ? model.gamma : 0.0)) * e * e + model.b * s[t - 1];
        for (std::size_t c = 0; c < k; ++c)
            v += model.variance_scale * model.exog[c] * std::abs(exogenous[t * k + c]) / model.exog_scale[c];
        s[t] = v;
    }
    return s;
}

double garch_next_variance(const GarchModel& model, const GarchState& state, std::span<const double> next_exog) {
    const double e = state.last_residual;
    double v = model.omega + (model.a + (e < 0.0 ? model.gamma : 0.0)) * e * e + model.b * state.last_variance;
    if (model.kind == GarchKind::kExogenous && !model.exog.empty()) {
        if (next_exog.size() != model.exog.size())
            throw Error(ErrorKind::kInvalidArgument, "exogenous vector does not match the model");
        for (std::size_t c = 0; c < next_exog.size(); ++c) {
            if (!std::isfinite(next_exog[c])) throw Error(ErrorKind::kMissingCovariate, "missing exogenous regressor");
            v += model.variance_scale * model.exog[c] * std::abs(next_exog[c]) / model.exog_scale[c];
        }
    }
    return v;
}

double forecast_var_garch(const GarchModel& model, const GarchState& state, double alpha,
                          std::span<const double> next_exog) {
    return stats::normal_quantile(alpha) * std::sqrt(garch_next_variance(model, state, next_exog));
}

}  // namespace qv::parametric
