#include "quantvar/forest.hpp"

#include "quantvar/error.hpp"
#include "quantvar/rng.hpp"
#include "quantvar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <thread>

namespace qv::forest {

std::string to_string(SplitCriterion c) { return c == SplitCriterion::kQuantileGini ? "quantile-gini" : "mse"; }

SplitCriterion parse_criterion(std::string_view text) {
    if (text == "quantile-gini" || text == "gini") return SplitCriterion::kQuantileGini;
    if (text == "mse") return SplitCriterion::kMse;
    throw Error(ErrorKind::kInvalidArgument, "unknown split criterion '" + std::string(text) + "'");
}

std::size_t ForestConfig::effective_mtry(std::size_t p) const noexcept {
    if (mtry != 0) return std::min(mtry, p);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
}

void ForestConfig::validate(std::size_t p) const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, "forest config: " + msg); };
    if (num_trees == 0) fail("num_trees must be positive");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) fail("sample_fraction must lie in (0, 1]");
    if (p == 0) fail("at least one covariate required");
    if (mtry > p) fail("mtry exceeds the number of covariates");
    if (min_node_size == 0) fail("min_node_size must be positive");
    if (pilot_levels.empty()) fail("at least one pilot level required");
    for (std::size_t k = 0; k < pilot_levels.size(); ++k) {
        if (!(pilot_levels[k] > 0.0 && pilot_levels[k] < 1.0)) fail("pilot levels must lie in (0, 1)");
        if (k > 0 && !(pilot_levels[k - 1] < pilot_levels[k])) fail("pilot levels must be strictly increasing");
    }
}

ForestConfig ForestConfig::grf(double alpha, std::size_t num_trees, std::uint64_t seed) {
    ForestConfig c;
    c.num_trees = num_trees;
    c.pilot_levels = {alpha};
    c.criterion = SplitCriterion::kQuantileGini;
    c.honesty = true;
    c.seed = seed;
    return c;
}

ForestConfig ForestConfig::qrf(std::size_t num_trees, std::uint64_t seed) {
    ForestConfig c;
    c.num_trees = num_trees;
    c.criterion = SplitCriterion::kMse;
    c.honesty = false;
    c.seed = seed;
    return c;
}

std::size_t Tree::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.split_var)] <= n.split_value ? n.left : n.right);
    }
    return i;
}

std::size_t Tree::num_splits() const noexcept {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

QuantileForest::QuantileForest(ForestConfig config, std::vector<std::string> names, std::vector<double> covariates,
                               std::vector<double> responses, std::vector<Tree> trees)
    : config_(std::move(config)),
      names_(std::move(names)),
      covariates_(std::move(covariates)),
      responses_(std::move(responses)),
      trees_(std::move(trees)) {
    if (covariates_.size() != responses_.size() * names_.size()) {
        throw Error(ErrorKind::kInvalidArgument, "forest training matrix dimensions inconsistent");
    }
}

std::vector<int> pseudo_outcomes(std::span<const double> responses, std::span<const double> levels) {
    std::vector<int> out(responses.size(), 0);
    if (responses.empty()) return out;
    std::vector<double> scratch;
    for (double tau : levels) {
        scratch.assign(responses.begin(), responses.end());
        const double theta = stats::type1_quantile_inplace(scratch, tau);
        for (std::size_t i = 0; i < responses.size(); ++i) out[i] += responses[i] > theta ? 1 : 0;
    }
    return out;
}

double gini_impurity(std::span<const int> labels) {
    if (labels.empty()) throw Error(ErrorKind::kInvalidSplit, "Gini impurity of an empty node");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    std::vector<double> counts(static_cast<std::size_t>(max_label) + 1, 0.0);
    for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
    const double n = static_cast<double>(labels.size());
    double g = 1.0;
    for (double c : counts) g -= (c / n) * (c / n);
    return g;
}

double gini_split_loss(std::span<const int> left, std::span<const int> right) {
    if (left.empty() || right.empty()) throw Error(ErrorKind::kInvalidSplit, "split with an empty side");
    const double nl = static_cast<double>(left.size());
    const double nr = static_cast<double>(right.size());
    return (nl * gini_impurity(left) + nr * gini_impurity(right)) / (nl + nr);
}

namespace {

struct SplitCandidate {
    bool found = false;
    std::size_t var = 0;
    double value = 0.0;
    double loss = 0.0;
};

/// Grows one tree on its split rows; the caller fills leaves afterwards.
/// `order` holds, per covariate, all row indices sorted by (value, row).
class TreeGrower {
public:
    TreeGrower(std::span<const double> x, std::size_t p, std::span<const double> y, const ForestConfig& config,
               std::span<const std::uint32_t> order)
        : x_(x), p_(p), y_(y), config_(config), order_(order) {}

    Tree grow(std::size_t tree_index) const {
        RandomEngine rng = make_engine(config_.seed, {tree_index});
        const std::size_t n = y_.size();
        std::vector<std::uint32_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0U);
        const auto sample_size =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(config_.sample_fraction * static_cast<double>(n))));
        for (std::size_t i = 0; i < sample_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(rows[i], rows[pick(rng)]);
        }
        rows.resize(sample_size);

        Tree tree;
        if (config_.honesty && sample_size >= 2) {
            const std::size_t half = sample_size / 2;
            tree.split_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(half));
            tree.estimation_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(half), rows.end());
        } else {
            tree.split_rows = rows;
            tree.estimation_rows = rows;
        }
        std::sort(tree.split_rows.begin(), tree.split_rows.end());
        std::sort(tree.estimation_rows.begin(), tree.estimation_rows.end());

        Scratch scratch(n);
        grow_nodes(tree, rng, scratch);

        if (config_.honesty) {
            for (auto& node : tree.nodes) node.members.clear();
            for (std::uint32_t r : tree.estimation_rows) {
                const std::size_t leaf = tree.leaf_for(x_.subspan(static_cast<std::size_t>(r) * p_, p_));
                tree.nodes[leaf].members.push_back(r);
            }
        }
        return tree;
    }

private:
    struct Scratch {
        explicit Scratch(std::size_t n) : label(n, 0), value(n, 0.0), flag(n, 0) {}
        std::vector<int> label;
        std::vector<double> value;
        std::vector<char> flag;
        std::vector<std::uint32_t> sorted;  // p blocks of m rows, each sorted by its covariate
        std::vector<std::uint32_t> buffer;
        std::vector<double> node_y;
        std::vector<double> thetas;
        std::vector<double> counts_left, counts_total;
        std::size_t m = 0;

        std::uint32_t* block(std::size_t var) { return sorted.data() + var * m; }
    };

    double xv(std::uint32_t row, std::size_t var) const { return x_[static_cast<std::size_t>(row) * p_ + var]; }

    void grow_nodes(Tree& tree, RandomEngine& rng, Scratch& s) const {
        struct Pending {
            std::size_t node, lo, hi;
        };
        const std::size_t n = y_.size();
        s.m = tree.split_rows.size();
        s.sorted.resize(p_ * s.m);
        s.buffer.resize(s.m);
        for (std::uint32_t r : tree.split_rows) s.flag[r] = 1;
        for (std::size_t v = 0; v < p_; ++v) {
            std::uint32_t* out = s.block(v);
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint32_t r = order_[v * n + i];
                if (s.flag[r]) *out++ = r;
            }
        }
        for (std::uint32_t r : tree.split_rows) s.flag[r] = 0;

        std::deque<Pending> queue;
        tree.nodes.emplace_back();
        queue.push_back({0, 0, s.m});

        std::vector<std::size_t> vars(p_);
        std::vector<std::size_t> candidates;
        const std::size_t mtry = config_.effective_mtry(p_);
        while (!queue.empty()) {
            const Pending cur = queue.front();
            queue.pop_front();
            const auto depth = static_cast<std::size_t>(tree.nodes[cur.node].depth);
            const std::size_t size = cur.hi - cur.lo;

            SplitCandidate best;
            const bool depth_ok = config_.max_depth == 0 || depth < config_.max_depth;
            if (depth_ok && size >= 2 * config_.min_node_size) {
                std::iota(vars.begin(), vars.end(), 0);
                for (std::size_t i = 0; i < mtry; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(i, p_ - 1);
                    std::swap(vars[i], vars[pick(rng)]);
                }
                candidates.assign(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(mtry));
                std::sort(candidates.begin(), candidates.end());
                best = find_split(cur.lo, cur.hi, candidates, s);
            }

            if (!best.found) {
                const std::uint32_t* rows = s.block(0) + cur.lo;
                auto& members = tree.nodes[cur.node].members;
                members.assign(rows, rows + size);
                std::sort(members.begin(), members.end());
                continue;
            }

            // Stable partition of every covariate block keeps each side sorted.
            std::size_t n_left = 0;
            for (std::size_t i = cur.lo; i < cur.hi; ++i) {
                const std::uint32_t r = s.block(0)[i];
                s.flag[r] = xv(r, best.var) <= best.value ? 1 : 0;
                n_left += s.flag[r];
            }
            for (std::size_t v = 0; v < p_; ++v) {
                std::uint32_t* seg = s.block(v) + cur.lo;
                std::size_t l = 0, r = 0;
                for (std::size_t i = 0; i < size; ++i) {
                    if (s.flag[seg[i]]) seg[l++] = seg[i];
                    else s.buffer[r++] = seg[i];
                }
                std::copy(s.buffer.begin(), s.buffer.begin() + static_cast<std::ptrdiff_t>(r), seg + l);
            }

            const auto left = static_cast<std::int32_t>(tree.nodes.size());
            const auto child_depth = static_cast<std::int32_t>(depth + 1);
            tree.nodes.emplace_back().depth = child_depth;
            tree.nodes.emplace_back().depth = child_depth;
            TreeNode& node = tree.nodes[cur.node];
            node.split_var = static_cast<std::int32_t>(best.var);
            node.split_value = best.value;
            node.left = left;
            node.right = left + 1;
            queue.push_back({static_cast<std::size_t>(left), cur.lo, cur.lo + n_left});
            queue.push_back({static_cast<std::size_t>(left + 1), cur.lo + n_left, cur.hi});
        }
    }

    /// Labels for the node's rows: pseudo-outcomes from node-level pilot
    /// quantiles (Gini) or node-centred responses (MSE). Returns the parent
    /// impurity on the same scale as the split loss.
    double label_node(std::span<const std::uint32_t> rows, Scratch& s) const {
        const double m = static_cast<double>(rows.size());
        if (config_.criterion == SplitCriterion::kQuantileGini) {
            const std::size_t classes = config_.pilot_levels.size() + 1;
            s.thetas.clear();
            for (double tau : config_.pilot_levels) {
                s.node_y.clear();
                for (std::uint32_t r : rows) s.node_y.push_back(y_[r]);
                s.thetas.push_back(stats::type1_quantile_inplace(s.node_y, tau));
            }
            s.counts_total.assign(classes, 0.0);
            for (std::uint32_t r : rows) {
                int l = 0;
                for (double th : s.thetas) l += y_[r] > th ? 1 : 0;
                s.label[r] = l;
                s.counts_total[static_cast<std::size_t>(l)] += 1.0;
            }
            double sq = 0.0;
            for (double c : s.counts_total) sq += c * c;
            return 1.0 - sq / (m * m);
        }
        double mean = 0.0;
        for (std::uint32_t r : rows) mean += y_[r];
        mean /= m;
        double sse = 0.0;
        for (std::uint32_t r : rows) {
            s.value[r] = y_[r] - mean;
            sse += s.value[r] * s.value[r];
        }
        return sse / m;
    }

    SplitCandidate find_split(std::size_t lo, std::size_t hi, const std::vector<std::size_t>& candidates,
                              Scratch& s) const {
        const std::size_t m = hi - lo;
        const double parent = label_node({s.block(0) + lo, m}, s);
        SplitCandidate best;
        if (!(parent > 0.0)) return best;  // pure node
        const double tol = 1e-10 * parent;
        best.loss = parent;
        const double md = static_cast<double>(m);
        const std::size_t nmin = config_.min_node_size;
        const bool gini = config_.criterion == SplitCriterion::kQuantileGini;
        const std::size_t classes = config_.pilot_levels.size() + 1;

        double total_sum = 0.0, total_sq = 0.0;
        if (!gini) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double v = s.value[s.block(0)[i]];
                total_sum += v;
                total_sq += v * v;
            }
        }

        for (std::size_t var : candidates) {
            const std::uint32_t* sorted = s.block(var) + lo;
            if (xv(sorted[0], var) == xv(sorted[m - 1], var)) continue;

            s.counts_left.assign(classes, 0.0);
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                const std::uint32_t r = sorted[i];
                if (gini) {
                    s.counts_left[static_cast<std::size_t>(s.label[r])] += 1.0;
                } else {
                    left_sum += s.value[r];
                    left_sq += s.value[r] * s.value[r];
                }
                const std::size_t nl = i + 1;
                const std::size_t nr = m - nl;
                if (nl < nmin) continue;
                if (nr < nmin) break;
                const double xa = xv(r, var);
                const double xb = xv(sorted[i + 1], var);
                if (xa == xb) continue;

                const double nld = static_cast<double>(nl), nrd = static_cast<double>(nr);
                double loss;
                if (gini) {
                    double sql = 0.0, sqr = 0.0;
                    for (std::size_t k = 0; k < classes; ++k) {
                        const double cl = s.counts_left[k];
                        const double cr = s.counts_total[k] - cl;
                        sql += cl * cl;
                        sqr += cr * cr;
                    }
                    loss = (nld - sql / nld + nrd - sqr / nrd) / md;
                } else {
                    const double right_sum = total_sum - left_sum;
                    const double right_sq = total_sq - left_sq;
                    const double sse_l = std::max(0.0, left_sq - left_sum * left_sum / nld);
                    const double sse_r = std::max(0.0, right_sq - right_sum * right_sum / nrd);
                    loss = (sse_l + sse_r) / md;
                }
                if (loss < best.loss - tol) {
                    double mid = xa + 0.5 * (xb - xa);
                    if (!(mid < xb)) mid = xa;
                    best.found = true;
                    best.var = var;
                    best.value = mid;
                    best.loss = loss;
                }
            }
        }
        return best;
    }

    std::span<const double> x_;
    std::size_t p_;
    std::span<const double> y_;
    const ForestConfig& config_;
    std::span<const std::uint32_t> order_;
};

}  // namespace

QuantileForest fit_forest(std::span<const double> covariates, std::size_t p, std::span<const double> responses,
                          std::vector<std::string> names, const ForestConfig& config) {
    config.validate(p);
    const std::size_t n = responses.size();
    if (covariates.size() != n * p) throw Error(ErrorKind::kInvalidArgument, "covariate matrix size mismatch");
    if (names.size() != p) throw Error(ErrorKind::kInvalidArgument, "covariate names size mismatch");
    if (n < 2 * config.min_node_size || n < 2) {
        throw Error(ErrorKind::kInsufficientData,
                    "forest needs at least " + std::to_string(2 * config.min_node_size) + " rows, have " +
                        std::to_string(n));
    }
    if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorKind::kInvalidArgument, "too many rows");

    std::vector<std::uint32_t> order(p * n);
    for (std::size_t v = 0; v < p; ++v) {
        auto first = order.begin() + static_cast<std::ptrdiff_t>(v * n);
        std::iota(first, first + static_cast<std::ptrdiff_t>(n), 0U);
        std::sort(first, first + static_cast<std::ptrdiff_t>(n), [&](std::uint32_t a, std::uint32_t b) {
            const double xa = covariates[a * p + v], xb = covariates[b * p + v];
            return xa < xb || (xa == xb && a < b);
        });
    }
    const TreeGrower grower(covariates, p, responses, config, order);
    std::vector<Tree> trees(config.num_trees);
    const std::size_t threads = std::clamp<std::size_t>(config.num_threads, 1, config.num_trees);
    if (threads == 1) {
        for (std::size_t t = 0; t < config.num_trees; ++t) trees[t] = grower.grow(t);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < config.num_trees; t += threads) trees[t] = grower.grow(t);
            });
        }
    }
    return QuantileForest(config, std::move(names), {covariates.begin(), covariates.end()},
                          {responses.begin(), responses.end()}, std::move(trees));
}

QuantileForest fit_forest(const data::FeatureMatrix& matrix, const ForestConfig& config) {
    return fit_forest(matrix.values(), matrix.cols(), matrix.target(), matrix.names(), config);
}

std::vector<double> predict_weights(const QuantileForest& forest, std::span<const double> x) {
    if (x.size() != forest.num_cols()) throw Error(ErrorKind::kInvalidArgument, "query dimension mismatch");
    std::vector<double> w(forest.num_rows(), 0.0);
    std::size_t contributing = 0;
    for (const Tree& tree : forest.trees()) {
        const auto& members = tree.nodes[tree.leaf_for(x)].members;
        if (members.empty()) continue;
        const double share = 1.0 / static_cast<double>(members.size());
        for (std::uint32_t r : members) w[r] += share;
        ++contributing;
    }
    if (contributing == 0) {
        // Every tree abstained; fall back to the unconditional distribution.
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    const double inv = 1.0 / static_cast<double>(contributing);
    for (double& v : w) v *= inv;
    return w;
}

std::vector<double> predict_quantiles(const QuantileForest& forest, std::span<const double> x,
                                      std::span<const double> alphas) {
    const std::vector<double> w = predict_weights(forest, x);
    const auto& y = forest.responses();
    std::vector<std::pair<double, double>> support;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) support.emplace_back(y[i], w[i]);
    }
    std::sort(support.begin(), support.end());
    std::vector<double> out;
    out.reserve(alphas.size());
    for (double alpha : alphas) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "quantile level outside (0,1)");
        double cum = 0.0;
        double q = support.back().first;
        for (const auto& [value, weight] : support) {
            cum += weight;
            if (cum >= alpha - 1e-12) {
                q = value;
                break;
            }
        }
        out.push_back(q);
    }
    return out;
}

double predict_quantile(const QuantileForest& forest, std::span<const double> x, double alpha) {
    const double a[] = {alpha};
    return predict_quantiles(forest, x, a).front();
}

double ImportanceReport::of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return importance[i];
    }
    throw Error(ErrorKind::kMissingCovariate, "no covariate '" + std::string(name) + "' in importance report");
}

std::vector<double> layer_weights(std::size_t d_max, double decay) {
    if (!(decay > 0.0)) throw Error(ErrorKind::kInvalidArgument, "importance decay must be positive");
    std::vector<double> w(d_max);
    double total = 0.0;
    for (std::size_t l = 0; l < d_max; ++l) {
        w[l] = std::pow(static_cast<double>(l + 1), -decay);
        total += w[l];
    }
    for (double& v : w) v /= total;
    return w;
}

ImportanceReport variable_importance(const QuantileForest& forest, std::size_t d_max, double decay) {
    const std::size_t p = forest.num_cols();
    const std::vector<double> weights = layer_weights(d_max, decay);
    std::vector<std::vector<double>> counts(d_max, std::vector<double>(p, 0.0));
    for (const Tree& tree : forest.trees()) {
        for (const TreeNode& node : tree.nodes) {
            if (node.is_leaf()) continue;
            const auto layer = static_cast<std::size_t>(node.depth);
            if (layer < d_max) counts[layer][static_cast<std::size_t>(node.split_var)] += 1.0;
        }
    }
    ImportanceReport report{forest.names(), std::vector<double>(p, 0.0)};
    double used_weight = 0.0;
    for (std::size_t l = 0; l < d_max; ++l) {
        const double total = std::accumulate(counts[l].begin(), counts[l].end(), 0.0);
        if (total == 0.0) continue;
        used_weight += weights[l];
        for (std::size_t j = 0; j < p; ++j) report.importance[j] += weights[l] * counts[l][j] / total;
    }
    if (used_weight > 0.0) {
        for (double& v : report.importance) v /= used_weight;
    }
    return report;
}

}  // namespace qv::forest
