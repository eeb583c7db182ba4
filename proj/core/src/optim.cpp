#include "quantvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qv::optim {
namespace {

double safe_eval(const Objective& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

OptimResult nelder_mead_once(const Objective& f, const std::vector<double>& x0, const NelderMeadOptions& opt,
                             std::size_t budget) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double step = opt.initial_step * std::max(std::abs(x0[i]), 0.01);
        simplex[i + 1][i] += step;
    }
    std::size_t evals = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        values[i] = safe_eval(f, simplex[i]);
        ++evals;
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    std::size_t iterations = 0;
    bool converged = false;

    auto point_along = [&](double coef, std::vector<double>& out, const std::vector<double>& worst) {
        for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
    };

    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::abs(simplex[i][j] - simplex[best][j]));
            diameter = std::max(diameter, d);
        }
        const double spread = values[worst] - values[best];
        if (std::isfinite(spread) && spread <= opt.f_tolerance * std::max(1.0, std::abs(values[best])) &&
            diameter <= opt.x_tolerance * std::max(1.0, norm2(simplex[best]))) {
            converged = true;
            break;
        }
        ++iterations;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        point_along(-1.0, trial, simplex[worst]);
        const double fr = safe_eval(f, trial);
        ++evals;
        if (fr < values[best]) {
            point_along(-2.0, trial2, simplex[worst]);
            const double fe = safe_eval(f, trial2);
            ++evals;
            if (fe < fr) {
                simplex[worst] = trial2;
                values[worst] = fe;
            } else {
                simplex[worst] = trial;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = trial;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        point_along(outside ? -0.5 : 0.5, trial2, simplex[worst]);
        const double fc = safe_eval(f, trial2);
        ++evals;
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = trial2;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            values[i] = safe_eval(f, simplex[i]);
            ++evals;
        }
    }

    const auto best_it = std::min_element(values.begin(), values.end());
    const auto best = static_cast<std::size_t>(best_it - values.begin());
    OptimResult r;
    r.x = simplex[best];
    r.value = values[best];
    r.evaluations = evals;
    r.iterations = iterations;
    r.converged = converged;
    return r;
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& options) {
    OptimResult total = nelder_mead_once(f, x0, options, options.max_evaluations);
    for (int r = 0; r < options.restarts && total.evaluations < options.max_evaluations; ++r) {
        OptimResult again = nelder_mead_once(f, total.x, options, options.max_evaluations - total.evaluations);
        total.evaluations += again.evaluations;
        total.iterations += again.iterations;
        if (again.value <= total.value) {
            total.x = std::move(again.x);
            total.value = again.value;
        }
        total.converged = again.converged;
    }
    return total;
}

std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x, double step) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

OptimResult bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& options) {
    const double step = options.fd_step;
    OptimResult r = bfgs(f, [&](const std::vector<double>& x) { return numeric_gradient(f, x, step); }, std::move(x0),
                         options);
    return r;
}

OptimResult bfgs(const Objective& f, const Gradient& grad, std::vector<double> x, const BfgsOptions& options) {
    const std::size_t n = x.size();
    std::vector<double> h_inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) h_inv[i * n + i] = 1.0;

    OptimResult r;
    double fx = safe_eval(f, x);
    r.evaluations = 1;
    std::vector<double> g = grad(x);
    std::vector<double> dir(n), x_new(n), s(n), y(n), hy(n);

    for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
        r.gradient_norm = norm2(g);
        if (r.gradient_norm < options.gradient_tolerance) {
            r.converged = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) d -= h_inv[i * n + j] * g[j];
            dir[i] = d;
        }
        double slope = std::inner_product(dir.begin(), dir.end(), g.begin(), 0.0);
        if (!(slope < 0.0)) {
            // Lost descent: reset curvature to steepest descent.
            std::fill(h_inv.begin(), h_inv.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                h_inv[i * n + i] = 1.0;
                dir[i] = -g[i];
            }
            slope = -r.gradient_norm * r.gradient_norm;
        }

        double step = 1.0;
        double f_new = 0.0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * dir[i];
            f_new = safe_eval(f, x_new);
            ++r.evaluations;
            if (f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no further decrease representable

        std::vector<double> g_new = grad(x_new);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += h_inv[i * n + j] * y[j];
                hy[i] = acc;
            }
            const double yhy = std::inner_product(y.begin(), y.end(), hy.begin(), 0.0);
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    h_inv[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x.swap(x_new);
        g.swap(g_new);
        fx = f_new;
    }
    r.gradient_norm = norm2(g);
    if (r.gradient_norm < options.gradient_tolerance) r.converged = true;
    r.x = std::move(x);
    r.value = fx;
    return r;
}

}  // namespace qv::optim
