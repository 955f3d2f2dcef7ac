#include "profgp/optimize.hpp"

#include <cmath>
#include <limits>

#include "profgp/errors.hpp"

namespace profgp {

namespace {

struct Point {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    bool ok = false;
};

Point evaluate(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
               const Eigen::VectorXd& upper) {
    Point p;
    p.x = x;
    if ((x.array() < lower.array()).any() || (x.array() > upper.array()).any()) return p;
    try {
        p.grad = Eigen::VectorXd::Zero(x.size());
        p.value = f(x, p.grad);
        p.ok = std::isfinite(p.value) && p.grad.allFinite();
    } catch (const NumericalError&) {
        p.ok = false;
    }
    return p;
}

}  // namespace

OptimizeResult maximize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const OptimizeOptions& options) {
    const Eigen::Index n = x0.size();
    if (lower.size() != n || upper.size() != n) throw ValidationError("bounds dimension mismatch");

    Point cur = evaluate(f, x0, lower, upper);
    if (!cur.ok) throw NumericalError("optimizer start point is infeasible");

    // minimize -f: gradient g = -grad
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    OptimizeResult result;
    bool first_step = true;

    for (int it = 0; it < options.max_iterations; ++it) {
        result.iterations = it;
        if (cur.grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        const Eigen::VectorXd g = -cur.grad;
        Eigen::VectorXd dir = -h * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            h.setIdentity();
            dir = -g;
            slope = g.dot(dir);
        }

        Point next;
        bool found = false;
        for (int attempt = 0; attempt < 2 && !found; ++attempt) {
            double t = 1.0;
            for (int k = 0; k < 50; ++k, t *= 0.5) {
                next = evaluate(f, cur.x + t * dir, lower, upper);
                if (next.ok && -next.value <= -cur.value + 1e-4 * t * slope) {
                    found = true;
                    break;
                }
            }
            if (!found && attempt == 0) {
                h.setIdentity();
                dir = -g;
                slope = g.dot(dir);
            }
        }
        if (!found) break;  // stalled

        const Eigen::VectorXd s = next.x - cur.x;
        const Eigen::VectorXd yv = (-next.grad) - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (first_step) {
                h *= sy / yv.squaredNorm();
                first_step = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            h = (eye - rho * s * yv.transpose()) * h * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        const bool tiny = s.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + cur.x.lpNorm<Eigen::Infinity>());
        cur = std::move(next);
        result.iterations = it + 1;
        if (tiny) break;
    }
    if (!result.converged && cur.grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
        result.converged = true;
    }
    result.x = cur.x;
    result.value = cur.value;
    result.gradient = cur.grad;
    return result;
}

}  // namespace profgp
