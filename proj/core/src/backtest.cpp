#include "quantvar/backtest.hpp"

#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace qv::backtest {
namespace {

// n ln p with 0 ln 0 = 0.
double xlogy(double n, double p) { return n == 0.0 ? 0.0 : n * std::log(p); }

double bernoulli_loglik(double ones, double zeros, double p) { return xlogy(ones, p) + xlogy(zeros, 1.0 - p); }

}  // namespace

std::size_t HitSeries::count() const noexcept {
    std::size_t c = 0;
    for (int h : hits) c += h != 0;
    return c;
}

HitSeries hit_sequence(std::span<const double> returns, std::span<const double> forecasts, double alpha) {
    if (returns.size() != forecasts.size())
        throw Error(ErrorKind::kInvalidArgument, "returns and forecasts differ in length");
    HitSeries h;
    h.alpha = alpha;
    h.hits.resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) h.hits[t] = returns[t] < forecasts[t] ? 1 : 0;
    return h;
}

double aoe(const HitSeries& hits) {
    if (hits.size() == 0) throw Error(ErrorKind::kInvalidArgument, "AoE of an empty hit series");
    return static_cast<double>(hits.count()) / (hits.alpha * static_cast<double>(hits.size()));
}

BacktestResult kupiec_test(const HitSeries& hits) {
    if (hits.size() == 0) throw Error(ErrorKind::kInvalidArgument, "Kupiec test on an empty hit series");
    const double t = static_cast<double>(hits.size());
    const double x = static_cast<double>(hits.count());
    const double lr = -2.0 * bernoulli_loglik(x, t - x, hits.alpha) + 2.0 * bernoulli_loglik(x, t - x, x / t);
    BacktestResult r;
    r.test_name = "kupiec";
    r.statistic = std::max(lr, 0.0);
    r.dof = 1;
    r.p_value = stats::chi2_sf(r.statistic, 1.0);
    return r;
}

double christoffersen_independence_lr(const HitSeries& hits) {
    if (hits.size() < 2) throw Error(ErrorKind::kInvalidArgument, "Christoffersen test needs at least 2 hits");
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (std::size_t t = 1; t < hits.size(); ++t) {
        const int a = hits.hits[t - 1], b = hits.hits[t];
        if (a == 0) (b == 0 ? n00 : n01) += 1;
        else (b == 0 ? n10 : n11) += 1;
    }
    const double pi01 = n00 + n01 > 0 ? n01 / (n00 + n01) : 0.0;
    const double pi11 = n10 + n11 > 0 ? n11 / (n10 + n11) : 0.0;
    const double pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    const double restricted = bernoulli_loglik(n01 + n11, n00 + n10, pi);
    const double markov = bernoulli_loglik(n01, n00, pi01) + bernoulli_loglik(n11, n10, pi11);
    return std::max(2.0 * (markov - restricted), 0.0);
}

BacktestResult christoffersen_test(const HitSeries& hits) {
    if (hits.size() < 2) throw Error(ErrorKind::kInvalidArgument, "Christoffersen test needs at least 2 hits");
    BacktestResult r;
    r.test_name = "christoffersen";
    r.statistic = kupiec_test(hits).statistic + christoffersen_independence_lr(hits);
    r.dof = 2;
    r.p_value = stats::chi2_sf(r.statistic, 2.0);
    return r;
}

BacktestResult dq_test(const HitSeries& hits, std::span<const double> forecasts, std::span<const double> returns,
                       int lags) {
    const std::size_t n = hits.size();
    if (forecasts.size() != n || returns.size() != n)
        throw Error(ErrorKind::kInvalidArgument, "DQ inputs differ in length");
    if (lags < 1) throw Error(ErrorKind::kInvalidArgument, "DQ needs at least one hit lag");
    const auto L = static_cast<std::size_t>(lags);
    if (n <= L + 10) throw Error(ErrorKind::kInsufficientData, "DQ test needs more than lags + 10 observations");

    const double alpha = hits.alpha;
    const auto rows = static_cast<Eigen::Index>(n - L);
    const auto cols = static_cast<Eigen::Index>(L + 3);
    std::vector<std::string> names{"const"};
    for (std::size_t j = 1; j <= L; ++j) names.push_back("hit_lag" + std::to_string(j));
    names.emplace_back("var");
    names.emplace_back("ret_lag1_sq");

    Eigen::MatrixXd x(rows, cols);
    Eigen::VectorXd y(rows);
    for (std::size_t t = L; t < n; ++t) {
        const auto i = static_cast<Eigen::Index>(t - L);
        y[i] = hits.hits[t] - alpha;
        x(i, 0) = 1.0;
        for (std::size_t j = 1; j <= L; ++j) x(i, static_cast<Eigen::Index>(j)) = hits.hits[t - j];
        x(i, static_cast<Eigen::Index>(L + 1)) = forecasts[t];
        x(i, static_cast<Eigen::Index>(L + 2)) = returns[t - 1] * returns[t - 1];
    }

    BacktestResult r;
    r.test_name = "dq";
    // Drop constant-zero columns (e.g. hit lags of an all-zero series), then
    // any remaining collinear columns via rank-revealing QR.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double scale = x.col(j).cwiseAbs().maxCoeff();
        if (scale == 0.0) {
            r.dropped.push_back(names[static_cast<std::size_t>(j)]);
            continue;
        }
        keep.push_back(j);
    }
    Eigen::MatrixXd xk(rows, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        const Eigen::Index c = keep[j];
        xk.col(static_cast<Eigen::Index>(j)) = x.col(c) / x.col(c).cwiseAbs().maxCoeff();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xk);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    std::vector<Eigen::Index> basis;
    for (Eigen::Index j = 0; j < rank; ++j) basis.push_back(qr.colsPermutation().indices()[j]);
    std::sort(basis.begin(), basis.end());
    for (Eigen::Index j = rank; j < xk.cols(); ++j)
        r.dropped.push_back(names[static_cast<std::size_t>(keep[static_cast<std::size_t>(qr.colsPermutation().indices()[j])])]);
    if (rank == 0) throw Error(ErrorKind::kSingularDesign, "DQ design has no usable regressors");

    Eigen::MatrixXd xb(rows, rank);
    for (Eigen::Index j = 0; j < rank; ++j) xb.col(j) = xk.col(basis[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd b = xb.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd fitted = xb * b;
    r.statistic = std::max(fitted.squaredNorm() / (alpha * (1.0 - alpha)), 0.0);
    r.dof = static_cast<int>(rank);
    r.p_value = stats::chi2_sf(r.statistic, r.dof);
    return r;
}

EvalSummary evaluate(std::span<const double> returns, std::span<const double> forecasts, double alpha) {
    EvalSummary s;
    const HitSeries h = hit_sequence(returns, forecasts, alpha);
    s.n = h.size();
    s.exceedances = h.count();
    s.aoe = aoe(h);
    s.kupiec = kupiec_test(h);
    s.christoffersen = christoffersen_test(h);
    s.dq = dq_test(h, forecasts, returns);
    return s;
}

}  // namespace qv::backtest
