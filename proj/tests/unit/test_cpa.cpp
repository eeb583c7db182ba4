#include "helpers.hpp"

#include "quantvar/cpa.hpp"
#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qv;
using namespace qv::cpa;

TEST_SUITE("cpa") {

TEST_CASE("rolling mean") {
    const std::vector<double> s{1, 2, 3, 4};
    const auto m = rolling_mean(s, 2);
    CHECK(std::isnan(m[0]));
    CHECK(m[1] == 1.5);
    CHECK(m[2] == 2.5);
    CHECK(m[3] == 3.5);
    CHECK(rolling_mean(s, 1) == s);
    const auto c = rolling_mean(std::vector<double>(10, 0.3), 4);
    for (std::size_t i = 3; i < 10; ++i) CHECK(c[i] == doctest::Approx(0.3));
}

TEST_CASE("identical losses are degenerate") {
    const auto l = qvtest::normal_draws(200, 1.0, 1);
    const auto r = cpa_test(l, l);
    CHECK(r.degenerate);
    CHECK(r.p_value == 1.0);
    CHECK(r.performance_share == 0.0);
    CHECK_FALSE(significantly_better(r));
}

TEST_CASE("too short a series is rejected") {
    CHECK_THROWS_AS((void)cpa_test(std::vector<double>(20, 1.0)), Error);
}

TEST_CASE("dominance fixture") {
    auto d = qvtest::normal_draws(500, 1e-3, 2);
    for (double& v : d) v -= 0.05;
    const auto r = cpa_test(d);
    CHECK(r.performance_share == doctest::Approx(1.0));
    CHECK(r.p_value < 1e-6);
    CHECK(significantly_better(r));
    CHECK(r.mean_difference == doctest::Approx(-0.05).epsilon(0.01));
}

TEST_CASE("size under mean-zero noise") {
    const int reps = 300;
    int rejected = 0;
    for (int rep = 0; rep < reps; ++rep) {
        const auto d = qvtest::normal_draws(1000, 1.0, 1000 + static_cast<std::uint64_t>(rep));
        if (cpa_test(d).p_value < 0.05) ++rejected;
    }
    const double rate = rejected / static_cast<double>(reps);
    CHECK(rate >= 0.02);
    CHECK(rate <= 0.10);
}

TEST_CASE("swapping the models") {
    auto d = qvtest::normal_draws(400, 1.0, 3);
    for (std::size_t t = 1; t < d.size(); ++t) d[t] += 0.3 * d[t - 1] + 0.05;
    std::vector<double> neg(d.size());
    for (std::size_t t = 0; t < d.size(); ++t) neg[t] = -d[t];
    const auto a = cpa_test(d), b = cpa_test(neg);
    CHECK(a.wald == doctest::Approx(b.wald).epsilon(1e-10));
    CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-10));
    for (std::size_t j = 0; j < a.beta.size(); ++j) CHECK(a.beta[j] == doctest::Approx(-b.beta[j] * (j == 0 ? 1 : -1)));
    std::size_t ties = 0;
    for (double f : a.fitted) ties += f == 0.0 ? 1 : 0;
    CHECK(b.performance_share ==
          doctest::Approx(1.0 - a.performance_share - ties / static_cast<double>(a.fitted.size())));
}

TEST_CASE("scaling both losses leaves the test unchanged") {
    const auto l1 = qvtest::normal_draws(300, 1.0, 4);
    auto l2 = qvtest::normal_draws(300, 1.0, 5);
    for (double& v : l2) v += 0.1;
    std::vector<double> s1 = l1, s2 = l2;
    for (double& v : s1) v *= 7.5;
    for (double& v : s2) v *= 7.5;
    const auto a = cpa_test(l1, l2), b = cpa_test(s1, s2);
    CHECK(a.wald == doctest::Approx(b.wald).epsilon(1e-9));
    CHECK(a.performance_share == b.performance_share);
}

TEST_CASE("fitted series aligns with the last n differences") {
    const auto d = qvtest::normal_draws(100, 1.0, 6);
    const auto r = cpa_test(d);
    CHECK(r.n == 99);
    CHECK(r.fitted.size() == 99);
    CHECK(r.fitted[0] == doctest::Approx(r.beta[0] + r.beta[1] * d[0]));
    const auto c = cpa_test(d, Instruments::kConstant);
    CHECK(c.q == 1);
}

}  // TEST_SUITE
