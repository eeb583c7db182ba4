#include "helpers.hpp"

#include "quantvar/csv.hpp"
#include "quantvar/data.hpp"
#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace qv;
using namespace qv::data;

TEST_SUITE("data") {

TEST_CASE("two prices give one log return") {
    const auto s = make_series("x", qvtest::daily(Date(2020, 1, 1), 2), {100.0, 110.0});
    REQUIRE(s.returns.size() == 1);
    CHECK(s.returns[0] == doctest::Approx(std::log(1.1)).epsilon(1e-15));
    CHECK(s.returns[0] == doctest::Approx(0.0953).epsilon(1e-3));
}

TEST_CASE("constant price gives zero returns") {
    const auto s = make_series("x", qvtest::daily(Date(2020, 1, 1), 3), {100.0, 100.0, 100.0});
    CHECK(s.returns == std::vector<double>{0.0, 0.0});
}

TEST_CASE("missing price row is dropped and returns bridge the gap") {
    std::istringstream in(
        "time,PriceUSD\n"
        "2020-01-01,100\n"
        "2020-01-02,102\n"
        "2020-01-03,\n"
        "2020-01-04,104\n"
        "2020-01-05,101\n"
        "2020-01-06,99\n");
    const auto s = load_coinmetrics_csv(in, "six.csv", "six");
    REQUIRE(s.prices.size() == 5);
    CHECK(s.dates[2] == Date(2020, 1, 4));
    REQUIRE(s.returns.size() == 4);
    CHECK(s.returns[1] == doctest::Approx(std::log(104.0 / 102.0)).epsilon(1e-14));
    CHECK(s.returns[3] == doctest::Approx(std::log(99.0 / 101.0)).epsilon(1e-14));
}

TEST_CASE("leading non-positive prices are skipped") {
    std::istringstream in("date,price\n2020-01-01,0\n2020-01-02,-3\n2020-01-03,5\n2020-01-04,6\n");
    const auto s = load_coinmetrics_csv(in, "lead.csv", "lead");
    CHECK(s.dates.front() == Date(2020, 1, 3));
    CHECK(s.returns.size() == 1);
}

TEST_CASE("malformed csv reports file and line") {
    std::istringstream in("time,PriceUSD\n2020-01-01,1\n2020-01-02,abc\n");
    try {
        (void)load_coinmetrics_csv(in, "bad.csv", "bad");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.file() == "bad.csv");
        CHECK(e.line() == 3);
    }
}

TEST_CASE("fewer than two valid prices is insufficient data") {
    std::istringstream in("time,PriceUSD\n2020-01-01,1\n2020-01-02,\n");
    try {
        (void)load_coinmetrics_csv(in, "short.csv", "short");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kInsufficientData);
    }
}

TEST_CASE("coinmetrics codes map to canonical external names") {
    std::istringstream in(
        "time,PriceUSD,CapMrktCurUSD,AdrActCnt,AdrBalCnt,AdrBalUSD100Cnt,AdrBalUSD10Cnt,SER,TxCnt,VelCur1yr\n"
        "2020-01-01,1,10,1,2,3,4,0.5,6,7\n"
        "2020-01-02,2,20,1,2,3,4,0.5,6,7\n");
    const auto s = load_coinmetrics_csv(in, "x.csv", "x");
    CHECK(s.external_count() == 7);
    for (auto name : kExternalNames) CHECK(s.externals.contains(std::string(name)));
    CHECK(s.externals.at("SER")[0] == 0.5);
    CHECK(s.market_cap[1] == 20.0);
}

TEST_CASE("rolling sd examples") {
    const std::vector<double> ones{1, 1, 1, 1};
    const auto sd = rolling_sd(ones, 3);
    CHECK(std::isnan(sd[0]));
    CHECK(std::isnan(sd[1]));
    CHECK(sd[2] == 0.0);
    CHECK(sd[3] == 0.0);

    const std::vector<double> two{0, 2};
    const auto s2 = rolling_sd(two, 2);
    CHECK(std::isnan(s2[0]));
    CHECK(s2[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    CHECK_THROWS_AS((void)rolling_sd(two, 3), Error);
    CHECK_THROWS_AS((void)rolling_sd(two, 1), Error);
}

TEST_CASE("rolling sd is shift invariant") {
    const auto r = qvtest::normal_draws(200, 0.03, 1);
    auto shifted = r;
    for (double& v : shifted) v += 0.7;
    for (int w : {3, 7, 30, 60}) {
        const auto a = rolling_sd(r, w);
        const auto b = rolling_sd(shifted, w);
        for (std::size_t t = static_cast<std::size_t>(w) - 1; t < r.size(); ++t)
            CHECK(a[t] == doctest::Approx(b[t]).epsilon(1e-9));
    }
}

TEST_CASE("prices are reproduced from cumulative returns") {
    const auto r = qvtest::normal_draws(500, 0.05, 2);
    std::vector<double> prices{250.0};
    for (double x : r) prices.push_back(prices.back() * std::exp(x));
    const auto s = make_series("x", qvtest::daily(Date(2018, 1, 1), prices.size()), prices);
    double cum = 0.0;
    for (std::size_t t = 0; t < s.returns.size(); ++t) {
        cum += s.returns[t];
        CHECK(std::abs(prices[0] * std::exp(cum) / prices[t + 1] - 1.0) < 1e-12);
    }
}

TEST_CASE("feature matrix of 70 prices has 9 rows") {
    const auto r = qvtest::normal_draws(69, 0.02, 3);
    std::vector<double> prices{1.0};
    for (double x : r) prices.push_back(prices.back() * std::exp(x));
    const auto s = make_series("x", qvtest::daily(Date(2020, 1, 1), 70), prices);
    const auto m = build_feature_matrix(s, false);
    CHECK(m.rows() == 9);
    CHECK(m.names() == std::vector<std::string>{"ret_lag1", "sd_3", "sd_7", "sd_30", "sd_60"});
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const std::size_t t = 60 + i;  // return index of the target
        CHECK(m.target()[i] == s.returns[t]);
        CHECK(m.at(i, 0) == s.returns[t - 1]);
        const std::span<const double> last3(s.returns.data() + t - 3, 3);
        CHECK(m.at(i, 1) == doctest::Approx(stats::sample_sd(last3)).epsilon(1e-12));
        CHECK(m.dates()[i] == s.return_date(t));
    }
}

TEST_CASE("constant returns give zero sd columns") {
    const std::vector<double> r(100, 0.01);
    const auto m = build_feature_matrix(r, FeatureSpec{});
    for (std::size_t i = 0; i < m.rows(); ++i) {
        CHECK(m.at(i, 0) == 0.01);
        for (std::size_t c = 1; c < m.cols(); ++c) CHECK(m.at(i, c) == doctest::Approx(0.0));
    }
}

TEST_CASE("requesting externals without them names the missing columns") {
    const auto s = make_series("plain", qvtest::daily(Date(2020, 1, 1), 100), std::vector<double>(100, 5.0));
    try {
        (void)build_feature_matrix(s, true);
        FAIL("expected MissingCovariate");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kMissingCovariate);
        CHECK(std::string(e.what()).find("SER") != std::string::npos);
    }
}

TEST_CASE("feature rows never depend on the target or later returns") {
    auto r = qvtest::normal_draws(300, 0.02, 4);
    const auto base = build_feature_matrix(r, FeatureSpec{});
    const std::size_t row = 100;
    const std::size_t t = 60 + row;
    for (std::size_t k = 0; k < 5; ++k) r[t + k] += 0.5;
    const auto bumped = build_feature_matrix(r, FeatureSpec{});
    for (std::size_t c = 0; c < base.cols(); ++c) CHECK(base.at(row, c) == bumped.at(row, c));
    CHECK(base.target()[row] != bumped.target()[row]);
}

TEST_CASE("externals enter lagged by one day") {
    const std::size_t n = 120;
    std::vector<double> prices(n), ser(n);
    for (std::size_t i = 0; i < n; ++i) {
        prices[i] = 100.0 + std::sin(static_cast<double>(i)) + 0.01 * static_cast<double>(i);
        ser[i] = 1000.0 + static_cast<double>(i);
    }
    std::map<std::string, std::vector<double>> ext;
    for (auto name : kExternalNames) ext[std::string(name)] = ser;
    const auto s = make_series("e", qvtest::daily(Date(2020, 1, 1), n), prices, ext);
    const auto m = build_feature_matrix(s, true);
    const std::size_t ser_col = m.column_index("SER");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        // Return t is dated dates[t+1]; the day before is dates[t].
        const std::size_t t = 60 + i;
        CHECK(m.at(i, ser_col) == ser[t]);
    }
}

TEST_CASE("slice bounds on a 1200-day series") {
    const auto dates = qvtest::daily(Date(2010, 1, 1), 1200);
    const PeriodSpec p{"mid", dates[600], dates[1099]};
    const auto b = slice_bounds(dates, p, 500);
    CHECK(b.begin == 100);
    CHECK(b.oos_begin == 600);
    CHECK(b.end == 1100);
    CHECK(b.end - b.begin == 1000);

    const PeriodSpec early{"early", dates[0], dates[300]};
    try {
        (void)slice_bounds(dates, early, 500);
        FAIL("expected InsufficientHistory");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kInsufficientHistory);
    }
}

TEST_CASE("period fully inside data has one forecast per day") {
    const auto dates = qvtest::daily(Date(2010, 1, 1), 900);
    const PeriodSpec p{"p", Date(2011, 6, 1), Date(2011, 8, 31)};
    const auto b = slice_bounds(dates, p, 500);
    CHECK(b.end - b.oos_begin == 92);
}

TEST_CASE("normalized asset csv round trips") {
    const auto s = load_coinmetrics_csv(qvtest::fixture("assets/ltc.csv"), "ltc");
    std::stringstream buf;
    write_asset_csv(buf, s);
    const auto back = load_coinmetrics_csv(buf, "norm.csv", "ltc");
    CHECK(back.dates == s.dates);
    CHECK(back.external_count() == 7);
    for (std::size_t i = 0; i < s.prices.size(); ++i)
        CHECK(back.prices[i] == doctest::Approx(s.prices[i]).epsilon(1e-15));
}

TEST_CASE("csv reader handles quoted fields") {
    std::istringstream in("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n");
    const auto t = csv::read(in, "q.csv");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "he said \"hi\"");
}

}  // TEST_SUITE
