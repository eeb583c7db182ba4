#include "forest_oracle.hpp"
#include "helpers.hpp"

#include "quantvar/error.hpp"
#include "quantvar/forest.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace qv;
using namespace qv::forest;

namespace {

struct Toy {
    std::vector<double> x;  // row-major n x p
    std::vector<double> y;
    std::size_t p = 0;
    std::vector<std::string> names;
};

Toy toy_data(std::size_t n, std::size_t p, std::uint64_t seed) {
    auto rng = make_engine(seed, {1});
    std::normal_distribution<double> z;
    Toy t;
    t.p = p;
    for (std::size_t j = 0; j < p; ++j) t.names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
        double scale = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = z(rng);
            t.x.push_back(v);
            if (j == 0) scale = 0.5 + std::abs(v);
        }
        t.y.push_back(scale * z(rng));
    }
    return t;
}

Tree leaf_tree(std::vector<std::uint32_t> members) {
    Tree t;
    t.nodes.emplace_back().members = members;
    t.split_rows = members;
    t.estimation_rows = members;
    return t;
}

bool same_structure(const Tree& a, const Tree& b, bool compare_values) {
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        const auto &x = a.nodes[i], &y = b.nodes[i];
        if (x.split_var != y.split_var || x.left != y.left || x.right != y.right || x.depth != y.depth) return false;
        if (compare_values && x.split_value != y.split_value) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("pseudo outcomes") {
    const std::vector<double> same(10, 3.0);
    const double tau[] = {0.05};
    for (int v : pseudo_outcomes(same, tau)) CHECK(v == 0);

    std::vector<double> hundred(100);
    std::iota(hundred.begin(), hundred.end(), 1.0);
    const auto rho = pseudo_outcomes(hundred, tau);
    for (std::size_t i = 0; i < 100; ++i) CHECK(rho[i] == (hundred[i] > 5.0 ? 1 : 0));

    const std::vector<double> four{1, 2, 3, 4};
    const double taus[] = {0.25, 0.75};
    CHECK(pseudo_outcomes(four, taus) == std::vector<int>{0, 1, 1, 2});
}

TEST_CASE("gini split loss") {
    const std::vector<int> ones{1, 1}, zeros{0, 0}, mix{0, 1};
    CHECK(gini_split_loss(ones, zeros) == 0.0);
    CHECK(gini_split_loss(mix, mix) == doctest::Approx(0.5));
    const std::vector<int> l{0, 0, 0, 1}, r{1};
    CHECK(gini_impurity(l) == doctest::Approx(0.375));
    CHECK(gini_split_loss(l, r) == doctest::Approx(0.3));
    const std::vector<int> empty;
    CHECK_THROWS_AS((void)gini_split_loss(empty, r), Error);
}

TEST_CASE("constant covariate gives single-leaf trees") {
    const std::vector<double> x(40, 1.0);
    const auto y = qvtest::normal_draws(40, 1.0, 3);
    const auto f = fit_forest(x, 1, y, {"c"}, ForestConfig::grf(0.5, 20, 1));
    for (const auto& t : f.trees()) CHECK(t.nodes.size() == 1);
}

TEST_CASE("step data splits at the boundary") {
    std::vector<double> x, y;
    for (int i = -10; i < 10; ++i) {
        x.push_back(i + 0.5);
        y.push_back(i < 0 ? -1.0 : 1.0);
    }
    ForestConfig c = ForestConfig::grf(0.5, 1, 9);
    c.sample_fraction = 1.0;
    c.honesty = false;
    c.min_node_size = 1;
    const auto f = fit_forest(x, 1, y, {"x"}, c);
    const auto& root = f.trees()[0].nodes[0];
    REQUIRE_FALSE(root.is_leaf());
    CHECK(root.split_value == doctest::Approx(0.0));
}

TEST_CASE("fixed seed gives identical forests and threads do not matter") {
    const auto d = toy_data(300, 3, 5);
    ForestConfig c = ForestConfig::grf(0.1, 30, 42);
    const auto a = fit_forest(d.x, d.p, d.y, d.names, c);
    c.num_threads = 3;
    const auto b = fit_forest(d.x, d.p, d.y, d.names, c);
    CHECK(to_json(a) == to_json(b));
}

TEST_CASE("single leaf weights are uniform") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> y{4, 3, 2, 1};
    QuantileForest f(ForestConfig::grf(0.5, 1), {"x"}, x, y, {leaf_tree({0, 1, 2, 3})});
    const double q[] = {2.5};
    for (double w : predict_weights(f, q)) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("two tree hand trace") {
    // Tree A: x <= 2 -> rows {0,1}; else {2,3}. Tree B: x <= 1 -> {0}; else {1,3}.
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> y{10, 20, 30, 40};
    Tree a;
    a.nodes.resize(3);
    a.nodes[0].split_var = 0;
    a.nodes[0].split_value = 2.5;
    a.nodes[0].left = 1;
    a.nodes[0].right = 2;
    a.nodes[1].members = {0, 1};
    a.nodes[2].members = {2, 3};
    Tree b = a;
    b.nodes[0].split_value = 1.5;
    b.nodes[1].members = {0};
    b.nodes[2].members = {1, 3};
    QuantileForest f(ForestConfig::grf(0.5, 2), {"x"}, x, y, {a, b});
    const double q[] = {3.0};
    const auto w = predict_weights(f, q);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(0.25));
    CHECK(w[3] == doctest::Approx(0.5));
}

TEST_CASE("abstaining trees are renormalized away") {
    const std::vector<double> x{1, 2};
    const std::vector<double> y{1, 2};
    Tree a;
    a.nodes.resize(3);
    a.nodes[0].split_var = 0;
    a.nodes[0].split_value = 1.5;
    a.nodes[0].left = 1;
    a.nodes[0].right = 2;
    a.nodes[1].members = {0};  // right leaf empty
    QuantileForest f(ForestConfig::grf(0.5, 2), {"x"}, x, y, {a, leaf_tree({0, 1})});
    const double q[] = {2.0};
    const auto w = predict_weights(f, q);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("uniform weights over 1..100 give the type-1 quantile") {
    std::vector<double> y(100), x(100);
    std::iota(y.begin(), y.end(), 1.0);
    std::iota(x.begin(), x.end(), 0.0);
    std::vector<std::uint32_t> all(100);
    std::iota(all.begin(), all.end(), 0U);
    QuantileForest f(ForestConfig::grf(0.05, 1), {"x"}, x, y, {leaf_tree(all)});
    const double q[] = {3.0};
    CHECK(predict_quantile(f, q, 0.05) == 5.0);
    CHECK(predict_quantile(f, q, 1e-9) == 1.0);
    CHECK(predict_quantile(f, q, 1.0 - 1e-9) == 100.0);
}

TEST_CASE("weights sum to one, predictions are ordered and bounded") {
    const auto d = toy_data(400, 3, 8);
    const auto f = fit_forest(d.x, d.p, d.y, d.names, ForestConfig::grf(0.05, 50, 3));
    const auto q = toy_data(50, 3, 9);
    const double lo = *std::min_element(d.y.begin(), d.y.end());
    const double hi = *std::max_element(d.y.begin(), d.y.end());
    const std::vector<double> levels{0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99};
    for (std::size_t i = 0; i < 50; ++i) {
        const std::span<const double> x(q.x.data() + i * 3, 3);
        const auto w = predict_weights(f, x);
        CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
        for (double v : w) CHECK(v >= 0.0);
        const auto preds = predict_quantiles(f, x, levels);
        for (std::size_t k = 1; k < preds.size(); ++k) CHECK(preds[k - 1] <= preds[k]);
        CHECK(preds.front() >= lo);
        CHECK(preds.back() <= hi);
    }
}

TEST_CASE("honest trees split on one half and fill leaves with the other") {
    const auto d = toy_data(200, 2, 10);
    const auto f = fit_forest(d.x, d.p, d.y, d.names, ForestConfig::grf(0.1, 10, 4));
    for (const auto& t : f.trees()) {
        std::vector<std::uint32_t> both;
        std::set_intersection(t.split_rows.begin(), t.split_rows.end(), t.estimation_rows.begin(),
                              t.estimation_rows.end(), std::back_inserter(both));
        CHECK(both.empty());
        CHECK(t.split_rows.size() == 50);
        CHECK(t.estimation_rows.size() == 50);
    }
}

TEST_CASE("estimation-half responses never change the split structure") {
    auto d = toy_data(200, 2, 11);
    const ForestConfig c = ForestConfig::grf(0.1, 5, 6);
    const auto a = fit_forest(d.x, d.p, d.y, d.names, c);
    for (std::uint32_t r : a.trees()[0].estimation_rows) d.y[r] = 1e3 * d.y[r] + 7.0;
    const auto b = fit_forest(d.x, d.p, d.y, d.names, c);
    CHECK(same_structure(a.trees()[0], b.trees()[0], true));
}

TEST_CASE("monotone covariate transforms leave structure and predictions unchanged") {
    const auto d = toy_data(300, 3, 12);
    auto t = d;
    for (std::size_t i = 0; i < 300; ++i) t.x[i * 3 + 1] = std::exp(2.0 * d.x[i * 3 + 1]) + 5.0;
    for (auto criterion : {SplitCriterion::kQuantileGini, SplitCriterion::kMse}) {
        ForestConfig c = criterion == SplitCriterion::kMse ? ForestConfig::qrf(20, 7) : ForestConfig::grf(0.05, 20, 7);
        const auto a = fit_forest(d.x, d.p, d.y, d.names, c);
        const auto b = fit_forest(t.x, t.p, t.y, t.names, c);
        for (std::size_t k = 0; k < a.trees().size(); ++k) CHECK(same_structure(a.trees()[k], b.trees()[k], false));
        for (std::size_t i = 0; i < 300; i += 7) {
            std::vector<double> xa(d.x.begin() + static_cast<long>(i * 3), d.x.begin() + static_cast<long>(i * 3 + 3));
            std::vector<double> xb(t.x.begin() + static_cast<long>(i * 3), t.x.begin() + static_cast<long>(i * 3 + 3));
            CHECK(predict_quantile(a, xa, 0.05) == predict_quantile(b, xb, 0.05));
        }
    }
}

TEST_CASE("single tree matches exhaustive search") {
    auto rng = make_engine(99, {});
    std::uniform_int_distribution<int> size(4, 12), nodesize(1, 3), grid(0, 6);
    std::normal_distribution<double> z;
    for (int inst = 0; inst < 60; ++inst) {
        const auto n = static_cast<std::size_t>(size(rng));
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = grid(rng) * 0.5;  // ties on purpose
            y[i] = z(rng);
        }
        ForestConfig c = ForestConfig::grf(inst % 2 ? 0.5 : 0.25, 1, static_cast<std::uint64_t>(inst));
        c.sample_fraction = 1.0;
        c.honesty = false;
        c.min_node_size = static_cast<std::size_t>(nodesize(rng));
        if (n < 2 * c.min_node_size) continue;
        const auto f = fit_forest(x, 1, y, {"x"}, c);
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const auto oracle = qvtest::oracle_tree(x, y, rows, c.pilot_levels[0], c.min_node_size);
        CHECK_MESSAGE(qvtest::compare_tree(f.trees()[0], 0, *oracle).empty(), "instance ", inst);
    }
}

TEST_CASE("importance layer weights and normalization") {
    const auto w = layer_weights(5, 2.0);
    CHECK(w[0] == doctest::Approx(1.0 / (1 + 0.25 + 1.0 / 9 + 1.0 / 16 + 0.04)).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(0.6832).epsilon(1e-4));

    const auto d = toy_data(300, 4, 13);
    const auto f = fit_forest(d.x, d.p, d.y, d.names, ForestConfig::grf(0.05, 30, 8));
    const auto imp = variable_importance(f, 5, 2.0);
    CHECK(std::accumulate(imp.importance.begin(), imp.importance.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    // Only the first column varies: all splits use it.
    auto single = d;
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 1; j < 4; ++j) single.x[i * 4 + j] = 0.0;
    ForestConfig c = ForestConfig::grf(0.05, 10, 8);
    c.mtry = 4;
    const auto g = fit_forest(single.x, single.p, single.y, single.names, c);
    CHECK(variable_importance(g, 5, 2.0).of("x0") == doctest::Approx(1.0));

    const std::vector<double> flat(40, 2.0);
    const auto y = qvtest::normal_draws(40, 1.0, 1);
    const auto h = fit_forest(flat, 1, y, {"c"}, ForestConfig::grf(0.5, 5, 1));
    CHECK(variable_importance(h, 5, 2.0).importance[0] == 0.0);
}

TEST_CASE("json round trip preserves predictions") {
    const auto d = toy_data(200, 2, 14);
    const auto f = fit_forest(d.x, d.p, d.y, d.names, ForestConfig::qrf(15, 2));
    const auto g = from_json(to_json(f));
    CHECK(to_json(g) == to_json(f));
    const double q[] = {0.3, -0.2};
    CHECK(predict_quantile(f, q, 0.05) == predict_quantile(g, q, 0.05));
    CHECK_THROWS_AS((void)from_json("{\"format\":\"other\"}"), Error);
}

TEST_CASE("config validation") {
    const std::vector<double> x(20, 0.0), y(20, 0.0);
    ForestConfig c = ForestConfig::grf(0.05, 1);
    c.sample_fraction = 0.0;
    CHECK_THROWS_AS((void)fit_forest(x, 1, y, {"x"}, c), Error);
    c = ForestConfig::grf(0.05, 1);
    c.pilot_levels = {0.5, 0.2};
    CHECK_THROWS_AS((void)fit_forest(x, 1, y, {"x"}, c), Error);
    const std::vector<double> tiny_x(5, 0.0), tiny_y(5, 0.0);
    CHECK_THROWS_AS((void)fit_forest(tiny_x, 1, tiny_y, {"x"}, ForestConfig::grf(0.05, 1)), Error);
}

}  // TEST_SUITE
