#include "quantvar/error.hpp"
#include "quantvar/parametric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qv::parametric {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double objective_of(const MatrixXd& x, const VectorXd& y, const VectorXd& beta, double tau) {
    const VectorXd r = y - x * beta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) s += check_loss(r[i], tau);
    return s;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
    return step;
}

// Frisch-Newton interior point (Mehrotra predictor-corrector) on the dual
//   max y'd  s.t.  X'd = (1 - tau) X'1,  0 <= d <= 1
// written as min c'x with c = -y, d = x. Returns the primal coefficients.
VectorXd frisch_newton(const MatrixXd& X, const VectorXd& y, double tau) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    const VectorXd c = -y;
    VectorXd x = VectorXd::Constant(n, 1.0 - tau);
    VectorXd s = VectorXd::Constant(n, tau);
    const VectorXd b = X.transpose() * x;

    VectorXd lam = X.colPivHouseholderQr().solve(c);
    VectorXd r = c - X * lam;
    const double delta = std::max(0.1 * r.cwiseAbs().mean(), 1e-8);
    VectorXd z = r.cwiseMax(0.0).array() + delta;
    VectorXd w = (-r).cwiseMax(0.0).array() + delta;

    const double beta_frac = 0.99995;
    for (int it = 0; it < 200; ++it) {
        const double gap = x.dot(z) + s.dot(w);
        const double scale = 1.0 + std::abs(c.dot(x));
        const VectorXd rp = b - X.transpose() * x;
        const VectorXd rd = c - X * lam - z + w;
        if (gap < 1e-12 * scale && rp.norm() < 1e-10 * (1.0 + b.norm()) && rd.norm() < 1e-10 * (1.0 + c.norm()))
            break;

        const VectorXd dinv = (z.array() / x.array() + w.array() / s.array()).inverse();
        const MatrixXd m = X.transpose() * dinv.asDiagonal() * X;
        const Eigen::LDLT<MatrixXd> ldlt(m);
        if (ldlt.info() != Eigen::Success) break;

        // affine predictor
        VectorXd q = rd + z - w;
        VectorXd dlam = ldlt.solve(rp + X.transpose() * (dinv.array() * q.array()).matrix());
        VectorXd dx = (dinv.array() * (X * dlam - q).array()).matrix();
        VectorXd ds = -dx;
        VectorXd dz = (-z.array() - z.array() * dx.array() / x.array()).matrix();
        VectorXd dw = (-w.array() - w.array() * ds.array() / s.array()).matrix();
        double ap = std::min(beta_frac * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
        double ad = std::min(beta_frac * std::min(max_step(z, dz), max_step(w, dw)), 1.0);
        const double mu_aff =
            (x + ap * dx).dot(z + ad * dz) + (s + ap * ds).dot(w + ad * dw);
        const double sigma = std::pow(mu_aff / gap, 3.0);
        const double mu = sigma * gap / static_cast<double>(2 * n);

        // corrector
        const VectorXd cx = (mu - x.array() * z.array() - dx.array() * dz.array()).matrix();
        const VectorXd cs = (mu - s.array() * w.array() - ds.array() * dw.array()).matrix();
        q = (rd.array() - cx.array() / x.array() + cs.array() / s.array()).matrix();
        dlam = ldlt.solve(rp + X.transpose() * (dinv.array() * q.array()).matrix());
        dx = (dinv.array() * (X * dlam - q).array()).matrix();
        ds = -dx;
        dz = ((cx.array() - z.array() * dx.array()) / x.array()).matrix();
        dw = ((cs.array() - w.array() * ds.array()) / s.array()).matrix();
        ap = std::min(beta_frac * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
        ad = std::min(beta_frac * std::min(max_step(z, dz), max_step(w, dw)), 1.0);

        x += ap * dx;
        s += ap * ds;
        lam += ad * dlam;
        z += ad * dz;
        w += ad * dw;
    }
    (void)k;
    return -lam;
}

// Moves an interior solution to a basic one: interpolate the k rows with the
// smallest absolute residuals that form a nonsingular basis.
VectorXd polish(const MatrixXd& X, const VectorXd& y, const VectorXd& beta) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    const VectorXd r = (y - X * beta).cwiseAbs();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return r[a] < r[b]; });

    MatrixXd basis(k, k);
    VectorXd rhs(k);
    Eigen::Index used = 0;
    for (Eigen::Index idx : order) {
        basis.row(used) = X.row(idx);
        const Eigen::FullPivLU<MatrixXd> lu(basis.topRows(used + 1));
        if (lu.rank() < used + 1) continue;
        rhs[used] = y[idx];
        if (++used == k) break;
    }
    if (used < k) return beta;
    return basis.partialPivLu().solve(rhs);
}

std::string column_label(Eigen::Index j, const std::vector<std::string>& names) {
    if (j == 0) return "(intercept)";
    return names.at(static_cast<std::size_t>(j - 1));
}

}  // namespace

double QrModel::lag_coefficient() const noexcept {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == "ret_lag1") return coefficients[j];
    return 0.0;
}

QrModel fit_quantile_regression(std::span<const double> xs, std::size_t p, std::span<const double> ys,
                                std::vector<std::string> names, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must lie in (0,1)");
    const std::size_t n = ys.size();
    if (xs.size() != n * p) throw Error(ErrorKind::kInvalidArgument, "design size does not match responses");
    if (names.size() != p) throw Error(ErrorKind::kInvalidArgument, "column names do not match design width");
    if (n <= p + 2) throw Error(ErrorKind::kInsufficientData, "quantile regression needs more than p + 2 rows");

    const auto k = static_cast<Eigen::Index>(p + 1);
    MatrixXd X(static_cast<Eigen::Index>(n), k);
    VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = xs[i * p + j];
        y[static_cast<Eigen::Index>(i)] = ys[i];
    }
    if (!X.allFinite() || !y.allFinite()) throw Error(ErrorKind::kMissingCovariate, "quantile regression input has missing values");

    VectorXd col_scale(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double m = X.col(j).cwiseAbs().maxCoeff();
        col_scale[j] = m > 0.0 ? m : 1.0;
    }
    const MatrixXd xsd = X * col_scale.cwiseInverse().asDiagonal();

    const Eigen::ColPivHouseholderQR<MatrixXd> qr(xsd);
    if (qr.rank() < k) {
        std::string msg = "linearly dependent design columns:";
        for (Eigen::Index j = qr.rank(); j < k; ++j) msg += " " + column_label(qr.colsPermutation().indices()[j], names);
        throw Error(ErrorKind::kSingularDesign, msg);
    }

    const double y_scale = std::max(y.cwiseAbs().maxCoeff(), 0.0);
    VectorXd beta_s = VectorXd::Zero(k);
    if (y_scale > 0.0) {
        const VectorXd yn = y / y_scale;
        VectorXd ip = frisch_newton(xsd, yn, alpha);
        const VectorXd vertex = polish(xsd, yn, ip);
        if (vertex.allFinite() && objective_of(xsd, yn, vertex, alpha) <= objective_of(xsd, yn, ip, alpha) * (1 + 1e-12) + 1e-15)
            ip = vertex;
        beta_s = ip * y_scale;
    }
    const VectorXd beta = col_scale.cwiseInverse().asDiagonal() * beta_s;

    QrModel model;
    model.alpha = alpha;
    model.intercept = beta[0];
    model.names = std::move(names);
    model.coefficients.assign(beta.data() + 1, beta.data() + k);
    model.objective = objective_of(X, y, beta, alpha);
    return model;
}

QrModel fit_quantile_regression(const data::FeatureMatrix& matrix, double alpha) {
    return fit_quantile_regression(matrix.values(), matrix.cols(), matrix.target(), matrix.names(), alpha);
}

double forecast_var_qr(const QrModel& model, std::span<const double> covariates) {
    if (covariates.size() != model.coefficients.size())
        throw Error(ErrorKind::kInvalidArgument, "covariate vector does not match the fitted model");
    double f = model.intercept;
    for (std::size_t j = 0; j < covariates.size(); ++j) f += model.coefficients[j] * covariates[j];
    return f;
}

}  // namespace qv::parametric
