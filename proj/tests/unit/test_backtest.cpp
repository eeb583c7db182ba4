#include "helpers.hpp"

#include "quantvar/backtest.hpp"
#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qv;
using namespace qv::backtest;

namespace {

HitSeries make_hits(std::vector<int> g, double alpha = 0.05) {
    HitSeries h;
    h.hits = std::move(g);
    h.alpha = alpha;
    return h;
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

// Independent Bernoulli likelihood ratio.
double kupiec_oracle(double T, double x, double alpha) {
    const double pi = x / T;
    const double l0 = xlogy(T - x, 1 - alpha) + xlogy(x, alpha);
    const double l1 = xlogy(T - x, 1 - pi) + xlogy(x, pi);
    return -2.0 * (l0 - l1);
}

double markov_lr_oracle(const std::vector<int>& g) {
    double n[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t t = 1; t < g.size(); ++t) n[g[t - 1]][g[t]] += 1;
    const double p01 = n[0][1] / (n[0][0] + n[0][1]);
    const double p11 = (n[1][0] + n[1][1]) > 0 ? n[1][1] / (n[1][0] + n[1][1]) : 0.0;
    const double p = (n[0][1] + n[1][1]) / (n[0][0] + n[0][1] + n[1][0] + n[1][1]);
    const double l1 = xlogy(n[0][0], 1 - p01) + xlogy(n[0][1], p01) + xlogy(n[1][0], 1 - p11) + xlogy(n[1][1], p11);
    const double l0 = xlogy(n[0][0] + n[1][0], 1 - p) + xlogy(n[0][1] + n[1][1], p);
    return -2.0 * (l0 - l1);
}

}  // namespace

TEST_SUITE("backtest") {

TEST_CASE("hit sequence") {
    const std::vector<double> r{0.01, -0.03, -0.02, 0.00, -0.05};
    CHECK(hit_sequence(r, std::vector<double>(5, -1.0), 0.05).hits == std::vector<int>(5, 0));
    CHECK(hit_sequence(r, std::vector<double>(5, 1.0), 0.05).hits == std::vector<int>(5, 1));
    const std::vector<double> f{-0.02, -0.02, -0.02, 0.01, -0.04};
    CHECK(hit_sequence(r, f, 0.05).hits == std::vector<int>{0, 1, 0, 1, 1});
    CHECK_THROWS_AS((void)hit_sequence(r, std::vector<double>(4, 0.0), 0.05), Error);
}

TEST_CASE("actual over expected") {
    std::vector<int> g(1000, 0);
    for (int i = 0; i < 50; ++i) g[static_cast<std::size_t>(i * 20)] = 1;
    CHECK(aoe(make_hits(g)) == doctest::Approx(1.0));
    g[1] = g[3] = 1;
    CHECK(aoe(make_hits(g)) == doctest::Approx(1.04));
    CHECK(aoe(make_hits(std::vector<int>(100, 0))) == 0.0);
}

TEST_CASE("kupiec") {
    std::vector<int> g(100, 0);
    for (int i = 0; i < 5; ++i) g[static_cast<std::size_t>(i * 20)] = 1;
    auto k = kupiec_test(make_hits(g));
    CHECK(k.statistic == doctest::Approx(0.0).scale(1.0));
    CHECK(k.p_value == doctest::Approx(1.0));

    for (int i = 0; i < 5; ++i) g[static_cast<std::size_t>(i * 20 + 7)] = 1;
    k = kupiec_test(make_hits(g));
    CHECK(k.statistic == doctest::Approx(kupiec_oracle(100, 10, 0.05)).epsilon(1e-12));
    CHECK(k.p_value == doctest::Approx(stats::chi2_sf(k.statistic, 1)));
    CHECK(k.dof == 1);

    k = kupiec_test(make_hits(std::vector<int>(100, 0)));
    CHECK(k.statistic == doctest::Approx(-200.0 * std::log(0.95)).epsilon(1e-12));
    CHECK(k.statistic == doctest::Approx(10.26).epsilon(1e-3));
    CHECK_THROWS_AS((void)kupiec_test(make_hits({})), Error);
}

TEST_CASE("christoffersen") {
    std::vector<int> alt(200);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = static_cast<int>(i % 2);
    const auto c = christoffersen_test(make_hits(alt, 0.5));
    CHECK(christoffersen_independence_lr(make_hits(alt, 0.5)) == doctest::Approx(markov_lr_oracle(alt)));
    CHECK(c.p_value < 1e-10);
    CHECK(c.dof == 2);

    // Same count, scattered vs adjacent pairs.
    std::vector<int> spread(400, 0), paired(400, 0);
    for (std::size_t i = 0; i < 20; ++i) spread[i * 20 + 3] = 1;
    for (std::size_t i = 0; i < 10; ++i) paired[i * 40 + 3] = paired[i * 40 + 4] = 1;
    const double lr_spread = christoffersen_independence_lr(make_hits(spread));
    const double lr_paired = christoffersen_independence_lr(make_hits(paired));
    CHECK(lr_spread == doctest::Approx(markov_lr_oracle(spread)).epsilon(1e-10));
    CHECK(lr_paired == doctest::Approx(markov_lr_oracle(paired)).epsilon(1e-10));
    CHECK(christoffersen_test(make_hits(paired)).p_value < christoffersen_test(make_hits(spread)).p_value);

    const std::vector<int> zeros(100, 0);
    CHECK(christoffersen_independence_lr(make_hits(zeros)) == 0.0);
    CHECK(christoffersen_test(make_hits(zeros)).statistic == doctest::Approx(kupiec_test(make_hits(zeros)).statistic));
    CHECK_THROWS_AS((void)christoffersen_test(make_hits({1})), Error);
}

TEST_CASE("dq size under iid hits") {
    const int reps = 200;
    int rejected = 0;
    for (int rep = 0; rep < reps; ++rep) {
        auto rng = make_engine(31, {static_cast<std::uint64_t>(rep)});
        std::bernoulli_distribution hit(0.05);
        std::normal_distribution<double> z(0.0, 0.02);
        std::vector<int> g(1000);
        std::vector<double> f(1000), r(1000);
        for (std::size_t t = 0; t < 1000; ++t) {
            g[t] = hit(rng) ? 1 : 0;
            f[t] = -0.03 + 0.2 * z(rng);
            r[t] = z(rng);
        }
        if (dq_test(make_hits(g), f, r).p_value < 0.05) ++rejected;
    }
    const double rate = rejected / static_cast<double>(reps);
    CHECK(rate >= 0.01);
    CHECK(rate <= 0.10);
}

TEST_CASE("dq rejects clustered hits") {
    std::vector<int> g(500, 0);
    for (std::size_t t = 200; t < 225; ++t) g[t] = 1;
    const auto f = qvtest::normal_draws(500, 0.01, 2);
    const auto r = qvtest::normal_draws(500, 0.02, 3);
    const auto res = dq_test(make_hits(g), f, r);
    CHECK(res.p_value < 1e-6);
    CHECK(res.dof == 7);
}

TEST_CASE("dq drops all-zero hit lags") {
    const std::vector<int> g(300, 0);
    const auto f = qvtest::normal_draws(300, 0.01, 4);
    const auto r = qvtest::normal_draws(300, 0.02, 5);
    const auto res = dq_test(make_hits(g), f, r);
    CHECK(res.dropped.size() == 4);
    CHECK(res.dof == 3);
    // y = -alpha lies in the span of the intercept, so DQ = n alpha / (1 - alpha).
    CHECK(res.statistic == doctest::Approx(296 * 0.05 / 0.95).epsilon(1e-9));
    CHECK(res.p_value < 0.01);
}

TEST_CASE("evaluate bundles the tests") {
    const auto r = qvtest::normal_draws(600, 0.02, 6);
    const std::vector<double> f(600, -1.6449 * 0.02);
    const auto s = evaluate(r, f, 0.05);
    CHECK(s.n == 600);
    CHECK(s.exceedances == hit_sequence(r, f, 0.05).count());
    CHECK(s.aoe == doctest::Approx(s.exceedances / 30.0));
    CHECK(s.dq.test_name == "dq");
}

}  // TEST_SUITE
