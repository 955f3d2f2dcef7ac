#include "profgp/linalg.hpp"

#include <cmath>
#include <sstream>

#include "profgp/errors.hpp"

namespace profgp {

double JitteredCholesky::log_determinant() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd JitteredCholesky::solve_lower(const Eigen::Ref<const Eigen::MatrixXd>& b) const {
    return llt.matrixL().solve(b);
}

Eigen::VectorXd JitteredCholesky::multiply_lower(const Eigen::Ref<const Eigen::VectorXd>& b) const {
    return llt.matrixL() * b;
}

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& a, const JitterPolicy& policy) {
    if (a.rows() != a.cols() || a.rows() == 0) throw NumericalError("cholesky: matrix must be square and nonempty");
    const double mean_diag = a.diagonal().mean();
    if (!std::isfinite(mean_diag) || !(mean_diag > 0.0) || !a.allFinite()) {
        std::ostringstream msg;
        msg << "cholesky: matrix " << a.rows() << "x" << a.cols() << " has non-finite entries or mean diagonal "
            << mean_diag;
        throw NumericalError(msg.str());
    }

    JitteredCholesky out;
    const double limit = policy.maximum * mean_diag * (1.0 + 1e-12);
    for (double rel = policy.initial; rel * mean_diag <= limit; rel *= policy.growth) {
        const double jitter = rel * mean_diag;
        Eigen::MatrixXd shifted = a;
        shifted.diagonal().array() += jitter;
        out.llt.compute(shifted);
        if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
            out.jitter = jitter;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "cholesky failed after jitter escalation to " << policy.maximum << " x mean diagonal (n=" << a.rows()
        << ", mean diag=" << mean_diag << ", min diag=" << a.diagonal().minCoeff()
        << ", max diag=" << a.diagonal().maxCoeff() << ")";
    throw NumericalError(msg.str());
}

}  // namespace profgp
