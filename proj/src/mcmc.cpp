#include "profgp/mcmc.hpp"

#include <cmath>

#include "profgp/errors.hpp"

namespace profgp {

AdaptiveMetropolis::AdaptiveMetropolis(const Eigen::VectorXd& initial_scales, AdaptationSettings settings)
    : AdaptiveMetropolis(Eigen::MatrixXd(initial_scales.array().square().matrix().asDiagonal()), settings) {}

AdaptiveMetropolis::AdaptiveMetropolis(const Eigen::MatrixXd& initial_covariance, AdaptationSettings settings)
    : settings_(settings), dim_(initial_covariance.rows()) {
    if (dim_ == 0) throw ValidationError("adaptive Metropolis needs at least one dimension");
    if (initial_covariance.cols() != dim_) throw ValidationError("proposal covariance must be square");
    if (!(settings.target_accept > 0.0 && settings.target_accept < 1.0)) {
        throw ValidationError("target_accept must lie in (0, 1)");
    }
    if (settings.adapt_interval <= 0) throw ValidationError("adapt_interval must be positive");
    log_scale_ = std::log(2.38 / std::sqrt(static_cast<double>(dim_)));
    covariance_ = initial_covariance;
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) throw ValidationError("proposal covariance is not positive definite");
    factor_ = llt.matrixL();
    acc_mean_ = Eigen::VectorXd::Zero(dim_);
    acc_m2_ = Eigen::MatrixXd::Zero(dim_, dim_);
}

void AdaptiveMetropolis::refresh_factor() {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() == Eigen::Success) factor_ = llt.matrixL();
}

Eigen::VectorXd AdaptiveMetropolis::propose(const Eigen::VectorXd& current, Rng& rng) const {
    Eigen::VectorXd z(dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) z[i] = rng.normal();
    return current + std::exp(log_scale_) * (factor_ * z);
}

void AdaptiveMetropolis::record(const Eigen::VectorXd& state, bool accepted) {
    ++steps_;
    accepted_ += accepted ? 1 : 0;
    if (!adapting_) return;

    ++acc_count_;
    const Eigen::VectorXd delta = state - acc_mean_;
    acc_mean_ += delta / static_cast<double>(acc_count_);
    acc_m2_.noalias() += delta * (state - acc_mean_).transpose();

    ++window_steps_;
    window_accepted_ += accepted ? 1 : 0;
    if (window_steps_ < settings_.adapt_interval) return;

    ++windows_;
    const double rate = static_cast<double>(window_accepted_) / static_cast<double>(window_steps_);
    log_scale_ += (rate - settings_.target_accept) / std::sqrt(static_cast<double>(windows_));
    window_steps_ = 0;
    window_accepted_ = 0;

    // a few hundred correlated states per dimension are needed before the
    // sample covariance beats the initial one; earlier estimates collapse
    // the wide directions
    const long min_count = std::max<long>(settings_.adapt_interval, 50 * dim_);
    if (acc_count_ >= min_count) {
        Eigen::MatrixXd cov = acc_m2_ / static_cast<double>(acc_count_ - 1);
        const double mean_diag = cov.diagonal().mean();
        if (std::isfinite(mean_diag) && mean_diag > 0.0) {
            cov.diagonal().array() += 1e-10 * mean_diag;
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() == Eigen::Success) {
                covariance_ = cov;
                factor_ = llt.matrixL();
            }
        }
    }
    // forget the older half of the history at windows 2, 4, 8, ...
    if ((windows_ & (windows_ - 1)) == 0 && windows_ >= 2) {
        acc_count_ = 0;
        acc_mean_.setZero();
        acc_m2_.setZero();
    }
}

void AdaptiveMetropolis::freeze() {
    adapting_ = false;
    accepted_ = 0;
    steps_ = 0;
}

double AdaptiveMetropolis::acceptance_rate() const {
    return steps_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(steps_);
}

double AdaptiveMetropolis::scale() const { return std::exp(log_scale_); }

MetropolisRun run_adaptive_metropolis(const std::function<double(const Eigen::VectorXd&)>& log_density,
                                      const Eigen::VectorXd& start, const Eigen::VectorXd& initial_scales,
                                      int n_burn, int n_samples, int thin, AdaptationSettings settings, Rng& rng) {
    AdaptiveMetropolis proposal(initial_scales, settings);
    Eigen::VectorXd x = start;
    double lp = log_density(x);
    if (!std::isfinite(lp)) throw ValidationError("starting point has zero density");

    MetropolisRun run;
    for (int it = 0; it < n_burn + n_samples; ++it) {
        if (it == n_burn) proposal.freeze();
        const Eigen::VectorXd cand = proposal.propose(x, rng);
        const double lp_cand = log_density(cand);
        const bool accept = std::isfinite(lp_cand) && std::log(1.0 - rng.uniform()) < lp_cand - lp;
        if (accept) {
            x = cand;
            lp = lp_cand;
        }
        proposal.record(x, accept);
        if (it >= n_burn && (it - n_burn + 1) % thin == 0) run.samples.push_back(x);
    }
    run.acceptance_rate = proposal.acceptance_rate();
    return run;
}

double batch_means_standard_error(const std::vector<double>& chain, int n_batches) {
    const auto n = static_cast<long>(chain.size());
    if (n < 2 * n_batches) throw ValidationError("chain too short for batch means");
    const long size = n / n_batches;
    std::vector<double> means(static_cast<std::size_t>(n_batches), 0.0);
    for (int b = 0; b < n_batches; ++b) {
        for (long i = 0; i < size; ++i) means[b] += chain[b * size + i];
        means[b] /= static_cast<double>(size);
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= n_batches;
    double var = 0.0;
    for (double m : means) var += (m - grand) * (m - grand);
    var /= (n_batches - 1);
    return std::sqrt(var / n_batches);
}

}  // namespace profgp
