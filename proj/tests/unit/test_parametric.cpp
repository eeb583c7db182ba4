#include "helpers.hpp"

#include "quantvar/error.hpp"
#include "quantvar/parametric.hpp"
#include "quantvar/sim.hpp"
#include "quantvar/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace qv;
using namespace qv::parametric;

namespace {

double brute_force_qr_objective(const std::vector<double>& x, const std::vector<double>& y, double alpha) {
    // Some optimal line passes through two data points.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (x[i] == x[j]) continue;
            const double slope = (y[j] - y[i]) / (x[j] - x[i]);
            const double icpt = y[i] - slope * x[i];
            double loss = 0.0;
            for (std::size_t t = 0; t < x.size(); ++t) loss += check_loss(y[t] - icpt - slope * x[t], alpha);
            best = std::min(best, loss);
        }
    return best;
}

}  // namespace

TEST_SUITE("parametric") {

TEST_CASE("check loss") {
    CHECK(check_loss(0.0, 0.05) == 0.0);
    CHECK(check_loss(1.0, 0.05) == doctest::Approx(0.05));
    CHECK(check_loss(-1.0, 0.05) == doctest::Approx(0.95));
    for (double u : {-2.0, -0.3, 0.0, 0.4, 3.0}) CHECK(check_loss(u, 0.2) >= 0.0);
}

TEST_CASE("quantile regression on a constant response") {
    const auto x = qvtest::normal_draws(60, 1.0, 1);
    const std::vector<double> y(60, 0.7);
    const auto m = fit_quantile_regression(x, 1, y, {"x"}, 0.05);
    CHECK(m.intercept == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(std::abs(m.coefficients[0]) < 1e-9);
    CHECK(m.objective < 1e-9);
    const double zero[] = {0.0};
    CHECK(forecast_var_qr(m, zero) == doctest::Approx(m.intercept));
}

TEST_CASE("five point median regression matches vertex enumeration") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{0.3, 1.4, 1.9, 3.8, 3.7};
    const auto m = fit_quantile_regression(x, 1, y, {"x"}, 0.5);
    CHECK(m.objective == doctest::Approx(brute_force_qr_objective(x, y, 0.5)).epsilon(1e-10));
    double direct = 0.0;
    for (std::size_t t = 0; t < 5; ++t) direct += check_loss(y[t] - m.intercept - m.coefficients[0] * x[t], 0.5);
    CHECK(direct == doctest::Approx(m.objective).epsilon(1e-10));
}

TEST_CASE("random small quantile regressions reach the vertex optimum") {
    auto rng = make_engine(5, {});
    std::normal_distribution<double> z;
    for (int inst = 0; inst < 25; ++inst) {
        const std::size_t n = 6 + static_cast<std::size_t>(inst % 7);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = z(rng);
            y[i] = 0.5 * x[i] + z(rng);
        }
        for (double alpha : {0.05, 0.25, 0.5}) {
            const auto m = fit_quantile_regression(x, 1, y, {"x"}, alpha);
            CHECK(m.objective == doctest::Approx(brute_force_qr_objective(x, y, alpha)).epsilon(1e-9));
        }
    }
}

TEST_CASE("duplicated covariate column is a singular design") {
    const auto a = qvtest::normal_draws(50, 1.0, 2);
    const auto y = qvtest::normal_draws(50, 1.0, 3);
    std::vector<double> x;
    for (double v : a) {
        x.push_back(v);
        x.push_back(v);
    }
    try {
        (void)fit_quantile_regression(x, 2, y, {"first", "second"}, 0.05);
        FAIL("expected SingularDesign");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kSingularDesign);
        CHECK(std::string(e.what()).find("second") != std::string::npos);
    }
}

TEST_CASE("SAV recursion examples") {
    SavModel m;
    m.beta1 = -0.01;
    m.beta2 = 0.5;
    m.beta3 = -0.3;
    CHECK(forecast_var_sav(m, -0.05, -0.02) == doctest::Approx(-0.041).epsilon(1e-12));
    m.beta2 = 0.0;
    m.beta3 = 0.0;
    CHECK(forecast_var_sav(m, -0.3, 0.7) == -0.01);

    const std::vector<double> r{0.01, -0.02, 0.03};
    const auto path = sav_path(r, -0.01, 0.5, -0.3, -0.05);
    REQUIRE(path.size() == 3);
    CHECK(path[0] == -0.05);
    CHECK(path[1] == doctest::Approx(-0.01 + 0.5 * -0.05 - 0.3 * 0.01));
}

TEST_CASE("SAV fit on iid returns is stationary near the true quantile") {
    const auto r = qvtest::normal_draws(3000, 0.02, 4);
    SavOptions opt;
    opt.num_starts = 300;
    opt.seed = 9;
    const auto m = fit_caviar_sav(r, 0.05, opt);
    CHECK(std::abs(m.beta2) < 1.0);
    double mean_abs = 0.0;
    for (double v : r) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(r.size());
    const double stationary = (m.beta1 + m.beta3 * mean_abs) / (1.0 - m.beta2);
    CHECK(stationary == doctest::Approx(-1.6449 * 0.02).epsilon(0.1));

    const auto again = fit_caviar_sav(r, 0.05, opt);
    CHECK(again.beta1 == m.beta1);
    CHECK(again.beta2 == m.beta2);
    CHECK(again.beta3 == m.beta3);
}

TEST_CASE("historical and normal VaR") {
    std::vector<double> w;
    for (int i = -100; i <= -1; ++i) w.push_back(i / 1000.0);
    std::shuffle(w.begin(), w.end(), make_engine(3, {}));
    // Type-1 at 0.05 on 100 points picks the 5th smallest.
    CHECK(hist_var(w, 0.05) == doctest::Approx(-0.096));
    CHECK(hist_var(std::vector<double>(30, 0.2), 0.05) == 0.2);
    CHECK(hist_var(w, 0.001) == doctest::Approx(-0.1));

    auto z = qvtest::normal_draws(5000, 1.0, 5);
    const double mu = stats::mean(z), sd = stats::sample_sd(z);
    for (double& x : z) x = (x - mu) / sd;
    CHECK(normfit_var(z, 0.05) == doctest::Approx(-1.6449).epsilon(1e-4));
    CHECK(std::abs(normfit_var(z, 0.5)) < 1e-12);
    CHECK_THROWS_AS((void)normfit_var(std::vector<double>(30, 1.0), 0.05), EstimationFailure);
}

TEST_CASE("GARCH forecast examples") {
    GarchModel m;
    m.omega = 0.0;
    m.a = 0.0;
    m.b = 1.0;
    GarchState s;
    s.last_residual = 0.0;
    s.last_variance = 0.0004;
    CHECK(forecast_var_garch(m, s, 0.05) == doctest::Approx(-0.0329).epsilon(1e-3));
    CHECK(std::abs(forecast_var_garch(m, s, 0.5)) < 1e-12);

    GarchModel plain;
    plain.kind = GarchKind::kGjr;
    plain.omega = 1e-5;
    plain.a = 0.05;
    plain.b = 0.9;
    GarchModel gjr = plain;
    gjr.gamma = 0.1;
    const GarchState shock{-0.08, 0.0004};
    CHECK(forecast_var_garch(gjr, shock, 0.05) < forecast_var_garch(plain, shock, 0.05));
}

TEST_CASE("GARCH analytic gradient matches finite differences") {
    const auto series = sim::simulate_garch({}, 800, false, 6);
    std::vector<double> e = series.returns;
    const double mu = stats::mean(e);
    for (double& v : e) v -= mu;
    std::vector<double> exog(800 * 2);
    const auto u = qvtest::normal_draws(1600, 1.0, 7);
    for (std::size_t i = 0; i < exog.size(); ++i) exog[i] = std::abs(u[i]);

    auto check_kind = [&](GarchKind kind, std::vector<double> theta, std::span<const double> x, std::size_t k) {
        const auto g = garch_objective_gradient(theta, kind, e, x, k);
        REQUIRE(g.size() == theta.size());
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double h = 1e-6;
            auto up = theta, dn = theta;
            up[j] += h;
            dn[j] -= h;
            const double fd = (garch_objective(up, kind, e, x, k) - garch_objective(dn, kind, e, x, k)) / (2 * h);
            CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
        }
    };
    check_kind(GarchKind::kPlain, {-2.0, -1.5, 1.0}, {}, 0);
    check_kind(GarchKind::kGjr, {-2.0, -1.5, 1.0, -2.5}, {}, 0);
    check_kind(GarchKind::kExogenous, {-2.0, -1.5, 1.0, -1.0, -2.0}, exog, 2);
}

TEST_CASE("GARCH QMLE recovers simulated parameters") {
    const int seeds = 8;
    double a_err = 0.0, b_err = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto series = sim::simulate_garch({}, 2000, false, static_cast<std::uint64_t>(100 + s));
        const auto fit = fit_garch(series.returns, GarchKind::kPlain);
        CHECK(fit.model.persistence() < 1.0);
        CHECK(fit.log_likelihood >= fit.initial_log_likelihood);
        a_err += std::abs(fit.model.a - 0.1);
        b_err += std::abs(fit.model.b - 0.8);
    }
    CHECK(a_err / seeds < 0.05);
    CHECK(b_err / seeds < 0.1);
}

TEST_CASE("GARCH on white noise matches the sample variance") {
    const auto r = qvtest::normal_draws(3000, 0.03, 8);
    const auto fit = fit_garch(r, GarchKind::kPlain);
    CHECK(fit.model.a < 0.05);
    CHECK(fit.model.unconditional_variance() == doctest::Approx(stats::sample_variance(r)).epsilon(0.1));
}

TEST_CASE("GARCH fails on a constant series") {
    CHECK_THROWS_AS((void)fit_garch(std::vector<double>(300, 0.01), GarchKind::kPlain), EstimationFailure);
    CHECK_THROWS_AS((void)fit_garch(std::vector<double>(50, 0.01), GarchKind::kPlain), Error);
}

}  // TEST_SUITE
