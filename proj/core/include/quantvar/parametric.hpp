#pragma once

#include "quantvar/data.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qv::parametric {

/// rho_alpha(u) = u (alpha - 1{u <= 0}).
[[nodiscard]] double check_loss(double u, double alpha);

/// Sum of check losses of realized values against forecasts.
[[nodiscard]] double total_check_loss(std::span<const double> realized, std::span<const double> forecasts, double alpha);

// ---------------------------------------------------------------- quantile regression

/// Linear conditional quantile: intercept + sum_j coef_j x_j.
struct QrModel {
    double alpha = 0.05;
    double intercept = 0.0;
    std::vector<std::string> names;
    std::vector<double> coefficients;  // aligned with names
    double objective = 0.0;            // in-sample total check loss

    /// Coefficient on the lagged return (column ret_lag1), 0 when absent.
    [[nodiscard]] double lag_coefficient() const noexcept;
};

/// Minimises the total check loss over [1, X] exactly (interior point on the
/// dual LP followed by a basic-solution polish). Throws SingularDesign
/// naming linearly dependent columns.
[[nodiscard]] QrModel fit_quantile_regression(const data::FeatureMatrix& matrix, double alpha);
[[nodiscard]] QrModel fit_quantile_regression(std::span<const double> x, std::size_t p, std::span<const double> y,
                                              std::vector<std::string> names, double alpha);

[[nodiscard]] double forecast_var_qr(const QrModel& model, std::span<const double> covariates);

// ---------------------------------------------------------------- CAViaR SAV

struct SavModel {
    double alpha = 0.05;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;
    double f0 = 0.0;          // initial VaR of the in-sample recursion
    double last_var = 0.0;    // f_n, VaR for the last in-sample return
    double last_return = 0.0; // r_n
    double objective = 0.0;
};

struct SavOptions {
    std::size_t num_starts = 1000;
    std::size_t num_refined = 10;
    double tolerance = 1e-7;
    std::uint64_t seed = 1;
    // Box for the uniform multistart draws.
    double beta1_lo = -0.3, beta1_hi = 0.0;
    double beta2_lo = 0.0, beta2_hi = 0.99;
    double beta3_lo = -1.0, beta3_hi = 0.0;
};

/// Runs f_t = b1 + b2 f_{t-1} + b3 |r_{t-1}| from f_1 = f0 and returns f_1..f_n.
[[nodiscard]] std::vector<double> sav_path(std::span<const double> returns, double b1, double b2, double b3, double f0);

/// f0 convention: type-1 alpha-quantile of the first 10% of the window.
[[nodiscard]] double sav_initial_value(std::span<const double> returns, double alpha);

[[nodiscard]] SavModel fit_caviar_sav(std::span<const double> returns, double alpha, const SavOptions& options = {});

/// One step of the recursion from (f_t, r_t).
[[nodiscard]] double forecast_var_sav(const SavModel& model, double current_var, double current_return);
/// Next-day VaR after the fitted window.
[[nodiscard]] double forecast_var_sav(const SavModel& model);

// ---------------------------------------------------------------- GARCH family

enum class GarchKind { kPlain, kGjr, kExogenous };

[[nodiscard]] std::string to_string(GarchKind kind);

/// sigma2_t = omega + (a + gamma 1{e_{t-1} < 0}) e_{t-1}^2 + b sigma2_{t-1}
///            + scale * sum_j c_j^2 x_{j,t-1}
/// with e the demeaned returns and x exogenous columns normalised by their
/// in-sample mean absolute value.
struct GarchModel {
    GarchKind kind = GarchKind::kPlain;
    double omega = 0.0;
    double a = 0.0;
    double b = 0.0;
    double gamma = 0.0;
    std::vector<double> exog;        // c_j^2 (nonnegative loadings)
    std::vector<double> exog_scale;  // per-column normaliser
    double variance_scale = 1.0;     // sample variance multiplying exogenous terms
    double mean = 0.0;               // in-sample mean removed before filtering

    [[nodiscard]] double persistence() const noexcept { return a + b + 0.5 * gamma; }
    [[nodiscard]] double unconditional_variance() const noexcept { return omega / (1.0 - persistence()); }
};

/// Filter state at the end of the estimation window.
struct GarchState {
    double last_residual = 0.0;
    double last_variance = 0.0;
};

struct GarchFit {
    GarchModel model;
    GarchState state;
    double log_likelihood = 0.0;
    double initial_log_likelihood = 0.0;  // at the variance-targeting start
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    std::vector<double> variances;  // sigma2_1..sigma2_n
};

struct GarchOptions {
    double gradient_tolerance = 1e-6;
    std::size_t max_iterations = 500;
};

/// Gaussian QMLE. `exogenous` is row-major n x k (kind == kExogenous only);
/// row t holds the regressors entering sigma2_t, i.e. values observed the
/// day before return t. Row 0 is unused because sigma2_1 is the sample
/// variance.
[[nodiscard]] GarchFit fit_garch(std::span<const double> returns, GarchKind kind,
                                 std::span<const double> exogenous = {}, std::size_t exog_cols = 0,
                                 const GarchOptions& options = {});

/// Conditional variance path for given parameters (sigma2_1 = sample variance).
[[nodiscard]] std::vector<double> garch_variances(const GarchModel& model, std::span<const double> residuals,
                                                  std::span<const double> exogenous, std::size_t exog_cols,
                                                  double initial_variance);

/// Next-day sigma^2 from the end-of-window state; `next_exog` holds the
/// raw regressors for the forecast date (GARCH-X only).
[[nodiscard]] double garch_next_variance(const GarchModel& model, const GarchState& state,
                                         std::span<const double> next_exog = {});

/// Phi^{-1}(alpha) * sigma_{t+1}.
[[nodiscard]] double forecast_var_garch(const GarchModel& model, const GarchState& state, double alpha,
                                        std::span<const double> next_exog = {});

/// Gradient of the mean negative Gaussian log-likelihood with respect to the
/// unconstrained parameters (exposed for testing against finite differences).
[[nodiscard]] std::vector<double> garch_objective_gradient(std::span<const double> theta, GarchKind kind,
                                                           std::span<const double> residuals,
                                                           std::span<const double> exogenous, std::size_t exog_cols);
[[nodiscard]] double garch_objective(std::span<const double> theta, GarchKind kind, std::span<const double> residuals,
                                     std::span<const double> exogenous, std::size_t exog_cols);

// ---------------------------------------------------------------- unconditional

/// Historical simulation: type-1 alpha-quantile of the window (K >= 20).
[[nodiscard]] double hist_var(std::span<const double> window, double alpha);

struct NormFitModel {
    double mu = 0.0;
    double sigma = 0.0;
};

[[nodiscard]] NormFitModel fit_normal(std::span<const double> window);
[[nodiscard]] double normfit_var(std::span<const double> window, double alpha);

}  // namespace qv::parametric
