#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace qv::optim {

using Objective = std::function<double(const std::vector<double>&)>;
using Gradient = std::function<std::vector<double>(const std::vector<double>&)>;

struct NelderMeadOptions {
    double f_tolerance = 1e-7;  // simplex spread in objective
    double x_tolerance = 1e-7;  // simplex diameter
    std::size_t max_evaluations = 4000;
    double initial_step = 0.05;  // relative to max(|x_i|, 0.01)
    int restarts = 1;           // re-seed the simplex at the optimum
};

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;  // BFGS only
};

/// Derivative-free minimization. Non-finite objective values are treated as
/// +infinity, which lets callers express hard constraints.
[[nodiscard]] OptimResult nelder_mead(const Objective& f, std::vector<double> x0,
                                      const NelderMeadOptions& options = {});

struct BfgsOptions {
    double gradient_tolerance = 1e-6;
    std::size_t max_iterations = 500;
    double fd_step = 1e-6;
};

/// Quasi-Newton minimization with central finite-difference gradients and
/// Armijo backtracking.
[[nodiscard]] OptimResult bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& options = {});

/// BFGS with a caller-supplied gradient.
[[nodiscard]] OptimResult bfgs(const Objective& f, const Gradient& grad, std::vector<double> x0,
                               const BfgsOptions& options = {});

[[nodiscard]] std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x, double step);

}  // namespace qv::optim
