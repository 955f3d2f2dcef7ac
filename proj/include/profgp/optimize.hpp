#pragma once

// Box-constrained quasi-Newton maximization.

#include <functional>

#include <Eigen/Dense>

namespace profgp {

/// Returns the objective value and writes the gradient into `grad`. May throw
/// NumericalError; the optimizer treats that point as infeasible.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizeOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;  ///< on the max-norm of the gradient
};

struct OptimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

/// BFGS ascent with an Armijo backtracking line search. Points outside
/// [lower, upper] are rejected by the line search. `x0` must lie inside the
/// box and be a finite point of the objective.
OptimizeResult maximize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const OptimizeOptions& options = {});

}  // namespace profgp
