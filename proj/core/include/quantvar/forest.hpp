#pragma once

#include "quantvar/data.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qv::forest {

enum class SplitCriterion {
    kQuantileGini,  // pseudo-outcome relabelling + Gini impurity (GRF)
    kMse,           // variance reduction on raw responses (Meinshausen QRF)
};

[[nodiscard]] std::string to_string(SplitCriterion c);
[[nodiscard]] SplitCriterion parse_criterion(std::string_view text);

struct ForestConfig {
    std::size_t num_trees = 500;
    double sample_fraction = 0.5;  // drawn without replacement
    bool honesty = true;           // split half / estimation half
    std::size_t mtry = 0;          // 0 selects ceil(sqrt(p))
    std::size_t min_node_size = 5;
    std::size_t max_depth = 0;     // 0 means unlimited
    std::vector<double> pilot_levels = {0.05};  // tau_1 < ... < tau_K
    SplitCriterion criterion = SplitCriterion::kQuantileGini;
    std::uint64_t seed = 1;
    std::size_t num_threads = 1;  // trees are independent; results do not depend on this

    /// Throws InvalidArgument when a field is out of range for p covariates.
    void validate(std::size_t p) const;
    [[nodiscard]] std::size_t effective_mtry(std::size_t p) const noexcept;

    /// Quantile-tailored forest with K = 1 pilot level at alpha.
    [[nodiscard]] static ForestConfig grf(double alpha, std::size_t num_trees = 500, std::uint64_t seed = 1);
    /// Meinshausen quantile regression forest: MSE splits, no honesty.
    [[nodiscard]] static ForestConfig qrf(std::size_t num_trees = 500, std::uint64_t seed = 1);
};

/// Node of a flattened tree. Internal nodes route x[split_var] <= split_value
/// to `left`. Leaves list the training rows that populate them (the
/// estimation half when the tree is honest).
struct TreeNode {
    std::int32_t split_var = -1;
    double split_value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t depth = 0;
    std::vector<std::uint32_t> members;

    [[nodiscard]] bool is_leaf() const noexcept { return split_var < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<std::uint32_t> split_rows;
    std::vector<std::uint32_t> estimation_rows;  // equals split_rows when not honest

    [[nodiscard]] std::size_t leaf_for(std::span<const double> x) const;
    [[nodiscard]] std::size_t num_splits() const noexcept;
};

class QuantileForest {
public:
    QuantileForest(ForestConfig config, std::vector<std::string> names, std::vector<double> covariates,
                   std::vector<double> responses, std::vector<Tree> trees);

    [[nodiscard]] const ForestConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<Tree>& trees() const noexcept { return trees_; }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<double>& responses() const noexcept { return responses_; }
    [[nodiscard]] const std::vector<double>& covariates() const noexcept { return covariates_; }
    [[nodiscard]] std::size_t num_rows() const noexcept { return responses_.size(); }
    [[nodiscard]] std::size_t num_cols() const noexcept { return names_.size(); }

private:
    ForestConfig config_;
    std::vector<std::string> names_;
    std::vector<double> covariates_;  // row-major training covariates
    std::vector<double> responses_;
    std::vector<Tree> trees_;
};

/// rho_t = #{k : r_t > theta_k} with theta_k the type-1 tau_k-quantile of
/// `responses`.
[[nodiscard]] std::vector<int> pseudo_outcomes(std::span<const double> responses, std::span<const double> levels);

/// Size-weighted Gini impurity of a candidate split. Classes are the
/// distinct label values 0..K.
[[nodiscard]] double gini_split_loss(std::span<const int> left, std::span<const int> right);

/// Impurity 1 - sum_k p_k^2 of one label multiset.
[[nodiscard]] double gini_impurity(std::span<const int> labels);

[[nodiscard]] QuantileForest fit_forest(const data::FeatureMatrix& matrix, const ForestConfig& config);
[[nodiscard]] QuantileForest fit_forest(std::span<const double> covariates, std::size_t p,
                                        std::span<const double> responses, std::vector<std::string> names,
                                        const ForestConfig& config);

/// Leaf co-membership weights over the training rows, averaged over trees.
/// A tree whose leaf has no estimation rows abstains.
[[nodiscard]] std::vector<double> predict_weights(const QuantileForest& forest, std::span<const double> x);

/// Left-continuous inverse of the weighted empirical CDF.
[[nodiscard]] double predict_quantile(const QuantileForest& forest, std::span<const double> x, double alpha);
[[nodiscard]] std::vector<double> predict_quantiles(const QuantileForest& forest, std::span<const double> x,
                                                    std::span<const double> alphas);

struct ImportanceReport {
    std::vector<std::string> names;
    std::vector<double> importance;  // sums to 1 when the forest has any split

    [[nodiscard]] double of(std::string_view name) const;
};

/// Depth-weighted split frequency: per layer l (root split = layer 1) the
/// share of splits on each covariate, combined with w_l proportional to
/// l^-decay over layers 1..d_max. Empty layers drop out and the remaining
/// weights are renormalized.
[[nodiscard]] ImportanceReport variable_importance(const QuantileForest& forest, std::size_t d_max, double decay);

/// w_l = l^-decay / sum_{j=1}^{d_max} j^-decay.
[[nodiscard]] std::vector<double> layer_weights(std::size_t d_max, double decay);

// Serialization (see docs/forest_format.md).
[[nodiscard]] std::string to_json(const QuantileForest& forest);
[[nodiscard]] QuantileForest from_json(std::string_view text);
void save(const QuantileForest& forest, const std::string& path);
[[nodiscard]] QuantileForest load(const std::string& path);

}  // namespace qv::forest
