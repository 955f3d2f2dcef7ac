#pragma once

// Exact GP algebra: marginal likelihood with analytic gradient, Gaussian
// posterior prediction and noise-free conditioning on latent values.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "profgp/kernels.hpp"
#include "profgp/likelihoods.hpp"
#include "profgp/linalg.hpp"
#include "profgp/profiles.hpp"

namespace profgp {

struct GPModel {
    KernelConfig kernel = Matern52{};
    double mean = 0.0;
    GaussianLik noise;
    /// Per-point noise variance multipliers: var_i = sigma_n^2 * w_i. Empty
    /// means homoscedastic.
    std::vector<double> noise_weights;

    void validate() const;
};

struct PredictiveGrid {
    std::vector<double> psi_star;
    std::vector<double> mean;
    std::vector<double> std;
};

inline constexpr int kDefaultGridSize = 220;

/// `n` points uniform on [0, 1.1].
std::vector<double> prediction_grid(int n = kDefaultGridSize);

struct MarginalLikelihood {
    double value = 0.0;
    /// d value / du for the kernel's unconstrained parameters followed by
    /// d value / d log(sigma_n). Empty when not requested.
    Eigen::VectorXd gradient;
};

MarginalLikelihood log_marginal_likelihood(const GPModel& model, std::span<const double> psi,
                                           std::span<const double> y, bool with_gradient = true);
MarginalLikelihood log_marginal_likelihood(const GPModel& model, const Dataset& data, bool with_gradient = true);

/// Factorized Gaussian-likelihood posterior, reusable for several grids.
class GaussianPosterior {
public:
    GaussianPosterior(GPModel model, std::span<const double> psi, std::span<const double> y);

    double log_marginal_likelihood() const;

    /// Predictive mean and latent variance var_*(psi) = K** - K*^T A^{-1} K*.
    /// Small negative variances are clamped to 0; below -1e-6 of the prior
    /// variance they raise NumericalError.
    void predict(std::span<const double> grid, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;

    const JitteredCholesky& factor() const { return chol_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }

private:
    GPModel model_;
    std::vector<double> psi_;
    Eigen::VectorXd centered_;
    JitteredCholesky chol_;
    Eigen::VectorXd alpha_;
};

PredictiveGrid posterior_predictive(const GPModel& model, const Dataset& data, std::span<const double> grid);

/// Noise-free conditioning through the whitened factor of K at the data
/// coordinates: mean + (L^{-1} K*)^T v with v = L^{-1} (f - mean).
class LatentConditioner {
public:
    LatentConditioner(const KernelConfig& kernel, double mean, std::span<const double> psi,
                      std::span<const double> grid);
    /// Reuses a factor of gram(kernel, psi) computed elsewhere.
    LatentConditioner(const KernelConfig& kernel, double mean, std::span<const double> psi,
                      std::span<const double> grid, JitteredCholesky factor);

    const JitteredCholesky& factor() const { return chol_; }

    Eigen::VectorXd whiten(const Eigen::Ref<const Eigen::VectorXd>& f) const;
    Eigen::VectorXd unwhiten(const Eigen::Ref<const Eigen::VectorXd>& v) const;

    Eigen::VectorXd condition_whitened(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    Eigen::VectorXd condition(const Eigen::Ref<const Eigen::VectorXd>& f) const { return condition_whitened(whiten(f)); }

private:
    double mean_;
    JitteredCholesky chol_;
    Eigen::MatrixXd cross_;  // L^{-1} K(psi, grid)
};

/// mean + K*^T K^{-1} (f - mean) through the jittered Cholesky of K.
std::vector<double> condition_latent(const GPModel& model, std::span<const double> psi, std::span<const double> f,
                                     std::span<const double> grid);

/// CSV `psi,mean,std`.
std::string predictive_csv(const PredictiveGrid& grid);

}  // namespace profgp
