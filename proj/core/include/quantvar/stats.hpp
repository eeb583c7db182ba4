#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace qv {

/// Marker for absent values in numeric series (rolling-window burn-in,
/// missing covariates).
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_missing(double v) noexcept { return std::isnan(v); }

namespace stats {

[[nodiscard]] double mean(std::span<const double> xs);

/// Sample standard deviation with denominator n - 1. Requires n >= 2.
[[nodiscard]] double sample_sd(std::span<const double> xs);

[[nodiscard]] double sample_variance(std::span<const double> xs);

/// Type-1 empirical quantile (inverse of the empirical CDF): the smallest
/// order statistic x_(k) with k/n >= p. Used for every empirical quantile in
/// the library so that all models share one convention.
[[nodiscard]] double type1_quantile(std::span<const double> xs, double p);

/// Same as type1_quantile but consumes a scratch copy the caller owns.
[[nodiscard]] double type1_quantile_inplace(std::vector<double>& scratch, double p);

/// Index (0-based) of the order statistic selected by type1_quantile.
[[nodiscard]] std::size_t type1_rank(std::size_t n, double p) noexcept;

[[nodiscard]] double median(std::span<const double> xs);

[[nodiscard]] double normal_quantile(double p);
[[nodiscard]] double normal_cdf(double x);

/// Upper-tail probability P(X > x) for X ~ chi-squared with `dof` degrees.
[[nodiscard]] double chi2_sf(double x, double dof);

/// Quantile of the Student t distribution (used for the unit-variance t5
/// oracle VaR in simulations).
[[nodiscard]] double student_t_quantile(double p, double dof);

}  // namespace stats
}  // namespace qv
