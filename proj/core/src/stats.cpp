#include "quantvar/stats.hpp"

#include "quantvar/error.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace qv::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw Error(ErrorKind::kInvalidArgument, "mean of empty series");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw Error(ErrorKind::kInvalidArgument, "sample variance needs at least 2 values");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

double sample_sd(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

std::size_t type1_rank(std::size_t n, double p) noexcept {
    // ceil(n p) - 1, guarded against representation error in n * p.
    const double np = static_cast<double>(n) * p;
    auto k = static_cast<std::ptrdiff_t>(std::ceil(np - 1e-9 * std::max(1.0, np)));
    k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(n));
    return static_cast<std::size_t>(k - 1);
}

double type1_quantile_inplace(std::vector<double>& scratch, double p) {
    if (scratch.empty()) throw Error(ErrorKind::kInvalidArgument, "quantile of empty series");
    const std::size_t k = type1_rank(scratch.size(), p);
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
    return scratch[k];
}

double type1_quantile(std::span<const double> xs, double p) {
    std::vector<double> scratch(xs.begin(), xs.end());
    return type1_quantile_inplace(scratch, p);
}

double median(std::span<const double> xs) {
    if (xs.empty()) throw Error(ErrorKind::kInvalidArgument, "median of empty series");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::kInvalidArgument, "normal quantile level outside (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>{}, x); }

double chi2_sf(double x, double dof) {
    if (dof <= 0.0) throw Error(ErrorKind::kInvalidArgument, "chi-squared dof must be positive");
    if (!(x > 0.0)) return 1.0;
    if (!std::isfinite(x)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>{dof}, x));
}

double student_t_quantile(double p, double dof) {
    return boost::math::quantile(boost::math::students_t_distribution<double>{dof}, p);
}

}  // namespace qv::stats
