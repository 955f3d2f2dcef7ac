#pragma once

// Adaptive random-walk Metropolis proposals.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "profgp/rng.hpp"

namespace profgp {

struct AdaptationSettings {
    double target_accept = 0.25;
    int adapt_interval = 100;
};

/// Gaussian random-walk proposal x' = x + exp(log_scale) * L z with L the
/// Cholesky factor of the proposal covariance. While adapting, every
/// `adapt_interval` recorded steps the scale is nudged toward the target
/// acceptance rate and, once at least 50 states per dimension are
/// available, the covariance is re-estimated from the recent half
/// of the recorded states.
class AdaptiveMetropolis {
public:
    AdaptiveMetropolis(const Eigen::VectorXd& initial_scales, AdaptationSettings settings);
    /// Starts from a full proposal covariance (symmetric positive definite).
    AdaptiveMetropolis(const Eigen::MatrixXd& initial_covariance, AdaptationSettings settings);

    Eigen::VectorXd propose(const Eigen::VectorXd& current, Rng& rng) const;

    /// Record the post-step state. Drives adaptation until freeze().
    void record(const Eigen::VectorXd& state, bool accepted);

    /// Stop adapting and reset acceptance counters; the proposal is fixed
    /// from here on so the retained chain is a valid Markov chain.
    void freeze();

    bool adapting() const { return adapting_; }
    double acceptance_rate() const;
    double scale() const;
    const Eigen::MatrixXd& covariance() const { return covariance_; }

private:
    void refresh_factor();

    AdaptationSettings settings_;
    Eigen::Index dim_;
    double log_scale_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd factor_;
    bool adapting_ = true;

    long accepted_ = 0;
    long steps_ = 0;
    long window_accepted_ = 0;
    long window_steps_ = 0;
    long windows_ = 0;

    // Welford accumulator over recent states
    long acc_count_ = 0;
    Eigen::VectorXd acc_mean_;
    Eigen::MatrixXd acc_m2_;
};

struct MetropolisRun {
    std::vector<Eigen::VectorXd> samples;
    double acceptance_rate = 0.0;
};

/// Plain adaptive Metropolis over an arbitrary log density: `n_burn`
/// adapted steps, then `n_samples` steps keeping every `thin`-th state.
MetropolisRun run_adaptive_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_density,
                                      const Eigen::VectorXd& start, const Eigen::VectorXd& initial_scales,
                                      int n_burn, int n_samples, int thin, AdaptationSettings settings, Rng& rng);

/// Batch-means Monte-Carlo standard error of the mean of a scalar chain.
double batch_means_standard_error(const std::vector<double>& chain, int n_batches = 25);

}  // namespace profgp
