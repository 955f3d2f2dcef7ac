#pragma once

#include <Eigen/Dense>

namespace profgp {

/// Diagonal jitter ladder, relative to the mean diagonal of the matrix.
struct JitterPolicy {
    double initial = 1e-8;
    double growth = 10.0;
    double maximum = 1e-4;
};

/// Cholesky factor of A + jitter * I.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;  ///< absolute jitter added to the diagonal

    Eigen::Index size() const { return llt.rows(); }
    Eigen::MatrixXd lower() const { return llt.matrixL(); }

    /// log det(A + jitter I)
    double log_determinant() const;

    /// (A + jitter I)^{-1} b
    template <typename Derived>
    auto solve(const Eigen::MatrixBase<Derived>& b) const {
        return llt.solve(b).eval();
    }

    /// L^{-1} b
    Eigen::MatrixXd solve_lower(const Eigen::Ref<const Eigen::MatrixXd>& b) const;
    /// L b
    Eigen::VectorXd multiply_lower(const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

/// Starts at policy.initial * mean(diag A) and multiplies by policy.growth on
/// failure; throws NumericalError (with matrix diagnostics) once the jitter
/// would exceed policy.maximum * mean(diag A).
JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& a, const JitterPolicy& policy = {});

}  // namespace profgp
