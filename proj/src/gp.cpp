#include "profgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

#include "profgp/csv.hpp"
#include "profgp/errors.hpp"

namespace profgp {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
}

Eigen::MatrixXd noisy_gram(const GPModel& model, std::span<const double> psi) {
    Eigen::MatrixXd a = gram(model.kernel, psi);
    const double s2 = model.noise.sigma_n * model.noise.sigma_n;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        a(i, i) += s2 * (model.noise_weights.empty() ? 1.0 : model.noise_weights[i]);
    }
    return a;
}

void check_inputs(const GPModel& model, std::span<const double> psi, std::span<const double> y) {
    if (psi.empty()) throw ValidationError("GP: no data points");
    if (psi.size() != y.size()) throw ValidationError("GP: psi and y lengths differ");
    if (!model.noise_weights.empty() && model.noise_weights.size() != psi.size()) {
        throw ValidationError("GP: noise_weights length differs from data length");
    }
}

}  // namespace

void GPModel::validate() const {
    profgp::validate(kernel);
    profgp::validate(LikelihoodConfig{noise});
    if (!std::isfinite(mean)) throw ValidationError("GP mean must be finite");
    for (double w : noise_weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("noise weights must be > 0");
    }
}

std::vector<double> prediction_grid(int n) {
    if (n < 2) throw ValidationError("prediction grid needs at least 2 points");
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[i] = kDomainMax * i / (n - 1);
    return grid;
}

MarginalLikelihood log_marginal_likelihood(const GPModel& model, std::span<const double> psi,
                                           std::span<const double> y, bool with_gradient) {
    check_inputs(model, psi, y);
    model.validate();
    const auto n = static_cast<Eigen::Index>(psi.size());
    const Eigen::VectorXd centered = as_vector(y).array() - model.mean;

    const Eigen::MatrixXd a = noisy_gram(model, psi);
    const JitteredCholesky chol = jittered_cholesky(a);
    const Eigen::VectorXd alpha = chol.solve(centered);

    MarginalLikelihood out;
    out.value = -0.5 * centered.dot(alpha) - 0.5 * chol.log_determinant() -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    // d/du = 1/2 tr((alpha alpha^T - A^{-1}) dA/du)
    Eigen::MatrixXd w = -chol.solve(Eigen::MatrixXd::Identity(n, n));
    w.noalias() += alpha * alpha.transpose();

    // the jitter is a fixed fraction of the mean diagonal, so it moves with
    // the parameters too: dA/du gains (jitter / mean diag) * mean(diag dA/du) * I
    const double rel_jitter = chol.jitter / a.diagonal().mean();
    const double trace_w = w.trace();

    const auto dk = gram_gradients(model.kernel, psi);
    out.gradient.resize(static_cast<Eigen::Index>(dk.size()) + 1);
    for (std::size_t j = 0; j < dk.size(); ++j) {
        out.gradient[j] = 0.5 * (w.cwiseProduct(dk[j]).sum() + rel_jitter * dk[j].diagonal().mean() * trace_w);
    }

    const double s2 = model.noise.sigma_n * model.noise.sigma_n;
    double noise_term = 0.0, noise_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = 2.0 * s2 * (model.noise_weights.empty() ? 1.0 : model.noise_weights[i]);
        noise_term += w(i, i) * d;
        noise_diag += d;
    }
    out.gradient[static_cast<Eigen::Index>(dk.size())] =
        0.5 * (noise_term + rel_jitter * noise_diag / static_cast<double>(n) * trace_w);
    return out;
}

MarginalLikelihood log_marginal_likelihood(const GPModel& model, const Dataset& data, bool with_gradient) {
    return log_marginal_likelihood(model, data.psi, data.y, with_gradient);
}

GaussianPosterior::GaussianPosterior(GPModel model, std::span<const double> psi, std::span<const double> y)
    : model_(std::move(model)), psi_(psi.begin(), psi.end()) {
    check_inputs(model_, psi, y);
    model_.validate();
    centered_ = as_vector(y).array() - model_.mean;
    chol_ = jittered_cholesky(noisy_gram(model_, psi_));
    alpha_ = chol_.solve(centered_);
}

double GaussianPosterior::log_marginal_likelihood() const {
    return -0.5 * centered_.dot(alpha_) - 0.5 * chol_.log_determinant() -
           0.5 * static_cast<double>(psi_.size()) * std::log(2.0 * std::numbers::pi);
}

void GaussianPosterior::predict(std::span<const double> grid, Eigen::VectorXd& mean,
                                Eigen::VectorXd& variance) const {
    const Eigen::MatrixXd cross = gram(model_.kernel, psi_, grid);  // n x m
    mean = (cross.transpose() * alpha_).array() + model_.mean;
    const Eigen::MatrixXd v = chol_.solve_lower(cross);
    variance.resize(static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index j = 0; j < variance.size(); ++j) {
        const double prior = evaluate(model_.kernel, grid[j], grid[j]);
        const double var = prior - v.col(j).squaredNorm();
        if (var < -1e-6 * std::max(prior, 1e-300)) {
            std::ostringstream msg;
            msg << "predictive variance " << var << " at psi=" << grid[j] << " is below tolerance (prior " << prior
                << ")";
            throw NumericalError(msg.str());
        }
        variance[j] = std::max(var, 0.0);
    }
}

PredictiveGrid posterior_predictive(const GPModel& model, const Dataset& data, std::span<const double> grid) {
    const GaussianPosterior post(model, data.psi, data.y);
    Eigen::VectorXd mean, var;
    post.predict(grid, mean, var);
    PredictiveGrid out;
    out.psi_star.assign(grid.begin(), grid.end());
    out.mean.assign(mean.data(), mean.data() + mean.size());
    out.std.resize(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) out.std[j] = std::sqrt(var[static_cast<Eigen::Index>(j)]);
    return out;
}

LatentConditioner::LatentConditioner(const KernelConfig& kernel, double mean, std::span<const double> psi,
                                     std::span<const double> grid)
    : mean_(mean), chol_(jittered_cholesky(gram(kernel, psi))), cross_(chol_.solve_lower(gram(kernel, psi, grid))) {}

LatentConditioner::LatentConditioner(const KernelConfig& kernel, double mean, std::span<const double> psi,
                                     std::span<const double> grid, JitteredCholesky factor)
    : mean_(mean), chol_(std::move(factor)) {
    if (chol_.size() != static_cast<Eigen::Index>(psi.size())) {
        throw ValidationError("LatentConditioner: factor size differs from data length");
    }
    cross_ = chol_.solve_lower(gram(kernel, psi, grid));
}

Eigen::VectorXd LatentConditioner::whiten(const Eigen::Ref<const Eigen::VectorXd>& f) const {
    const Eigen::VectorXd centered = f.array() - mean_;
    return chol_.solve_lower(centered);
}

Eigen::VectorXd LatentConditioner::unwhiten(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    return chol_.multiply_lower(v).array() + mean_;
}

Eigen::VectorXd LatentConditioner::condition_whitened(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (v.size() != cross_.rows()) throw ValidationError("latent vector length differs from data length");
    return (cross_.transpose() * v).array() + mean_;
}

std::vector<double> condition_latent(const GPModel& model, std::span<const double> psi, std::span<const double> f,
                                     std::span<const double> grid) {
    if (psi.size() != f.size()) throw ValidationError("condition_latent: f length differs from data length");
    validate(model.kernel);
    const LatentConditioner cond(model.kernel, model.mean, psi, grid);
    const Eigen::VectorXd out = cond.condition(as_vector(f));
    return {out.data(), out.data() + out.size()};
}

std::string predictive_csv(const PredictiveGrid& grid) {
    std::ostringstream out;
    out << "psi,mean,std\n";
    for (std::size_t i = 0; i < grid.psi_star.size(); ++i) {
        out << format_double(grid.psi_star[i]) << ',' << format_double(grid.mean[i]) << ','
            << format_double(grid.std[i]) << '\n';
    }
    return out.str();
}

}  // namespace profgp
