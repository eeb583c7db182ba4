#include "quantvar/cpa.hpp"

#include "quantvar/error.hpp"
#include "quantvar/stats.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace qv::cpa {

CpaResult cpa_test(std::span<const double> loss1, std::span<const double> loss2, Instruments instruments) {
    if (loss1.size() != loss2.size()) throw Error(ErrorKind::kInvalidArgument, "loss series differ in length");
    std::vector<double> d(loss1.size());
    for (std::size_t t = 0; t < d.size(); ++t) d[t] = loss1[t] - loss2[t];
    return cpa_test(d, instruments);
}

CpaResult cpa_test(std::span<const double> dl, Instruments instruments) {
    const std::size_t T = dl.size();
    if (T < 30) throw Error(ErrorKind::kInsufficientData, "CPA test needs at least 30 loss differences");
    for (double v : dl)
        if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "loss differences must be finite");

    CpaResult r;
    const bool lag = instruments == Instruments::kConstantAndLag;
    r.q = lag ? 2 : 1;
    const std::size_t start = lag ? 1 : 0;
    r.n = T - start;
    const auto n = static_cast<Eigen::Index>(r.n);
    const Eigen::Index q = r.q;

    Eigen::MatrixXd h(n, q);
    Eigen::VectorXd y(n);
    for (std::size_t t = start; t < T; ++t) {
        const auto i = static_cast<Eigen::Index>(t - start);
        h(i, 0) = 1.0;
        if (lag) h(i, 1) = dl[t - 1];
        y[i] = dl[t];
    }

    std::size_t wins = 0;
    double sum = 0.0;
    for (double v : dl) {
        wins += v < 0.0;
        sum += v;
    }
    r.loss_win_share = static_cast<double>(wins) / static_cast<double>(T);
    r.mean_difference = sum / static_cast<double>(T);

    const Eigen::MatrixXd z = h.array().colwise() * y.array();
    const Eigen::VectorXd zbar = z.colwise().mean();
    const Eigen::MatrixXd omega = (z.transpose() * z) / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    const double top = eig.eigenvalues().maxCoeff();
    const double bottom = eig.eigenvalues().minCoeff();
    if (!(top > 0.0) || bottom <= 1e-12 * top) {
        r.degenerate = true;
        r.wald = 0.0;
        r.p_value = 1.0;
        r.performance_share = 0.0;
        r.beta.assign(static_cast<std::size_t>(q), 0.0);
        r.fitted.assign(r.n, 0.0);
        return r;
    }
    r.wald = static_cast<double>(n) * zbar.dot(omega.ldlt().solve(zbar));
    r.wald = std::max(r.wald, 0.0);
    r.p_value = stats::chi2_sf(r.wald, static_cast<double>(q));

    const Eigen::VectorXd beta = h.colPivHouseholderQr().solve(y);
    r.beta.assign(beta.data(), beta.data() + q);
    const Eigen::VectorXd fitted = h * beta;
    r.fitted.assign(fitted.data(), fitted.data() + n);
    std::size_t below = 0;
    for (double v : r.fitted) below += v < 0.0;
    r.performance_share = static_cast<double>(below) / static_cast<double>(r.n);
    return r;
}

std::vector<double> rolling_mean(std::span<const double> series, std::size_t window) {
    if (window < 1) throw Error(ErrorKind::kInvalidArgument, "rolling window must be at least 1");
    if (window > series.size()) throw Error(ErrorKind::kInvalidArgument, "rolling window longer than the series");
    std::vector<double> out(series.size(), kMissing);
    for (std::size_t t = window - 1; t < series.size(); ++t) {
        double acc = 0.0;
        for (std::size_t j = t + 1 - window; j <= t; ++j) acc += series[j];
        out[t] = acc / static_cast<double>(window);
    }
    return out;
}

}  // namespace qv::cpa
