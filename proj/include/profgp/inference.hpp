#pragma once

// Empirical-Bayes and full-Bayes fitting engines.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "profgp/gp.hpp"
#include "profgp/kernels.hpp"
#include "profgp/likelihoods.hpp"
#include "profgp/profiles.hpp"
#include "profgp/transforms.hpp"

namespace profgp {

/// Gaussian prior N(location, width^2) on the unconstrained value.
struct HyperPrior {
    std::string name;
    Transform transform = Transform::Log;
    double location = 0.0;
    double width = 1.0;

    double log_density(double u) const;
    void validate() const;
};

enum class NoiseMode {
    Learned,   ///< likelihood scale is a hyperparameter
    Reported,  ///< per-point scale fixed to the reported error bars
};

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

/// Priors for the kernel parameters followed by the learned likelihood
/// parameters, in the order of parameter_names().
std::vector<HyperPrior> default_priors(const KernelConfig& kernel, const LikelihoodConfig& lik, const Dataset& data,
                                       NoiseMode mode = NoiseMode::Learned);

struct ChainConfig {
    int n_burn = 2000;
    int n_samples = 5000;
    int thin = 5;
    std::uint64_t seed = 0;
    double target_accept = 0.25;
    int adapt_interval = 100;

    void validate() const;
    int retained() const { return n_samples / thin; }
};

enum class LatentScheme {
    Auto,                ///< Marginal for Gaussian, ScaleMixture for Student's t, Whitened otherwise
    Marginal,            ///< latent integrated out analytically (Gaussian only)
    ScaleMixture,        ///< Metropolis-within-Gibbs with exact latent draws (Gaussian, Student's t)
    WhitenedMetropolis,  ///< one adaptive random walk over (hyperparameters, whitened latent)
};

std::string to_string(LatentScheme scheme);
LatentScheme latent_scheme_from_string(const std::string& name);

struct EmpiricalBayesOptions {
    int restarts = 8;
    std::uint64_t seed = 0;
    NoiseMode noise_mode = NoiseMode::Learned;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    double bound_widths = 5.0;  ///< search box half-width, in prior widths
    std::vector<double> grid;   ///< empty: prediction_grid()
    bool record_timing = true;
};

struct FullBayesOptions {
    ChainConfig chain;
    LatentScheme scheme = LatentScheme::Auto;
    NoiseMode noise_mode = NoiseMode::Learned;
    /// Keep kernel and likelihood at their given values and sample only
    /// what remains (the latent function, and mixing weights for t).
    bool fix_hyperparameters = false;
    /// Start the kernel and noise scale at a single-start empirical-Bayes
    /// optimum instead of the given values. Ignored when hyperparameters
    /// are fixed.
    bool warm_start = true;
    /// Keep every retained curve (grid followed by data coordinates).
    bool keep_curves = false;
    std::vector<double> grid;
    bool record_timing = true;
};

struct FitResult {
    std::string method;  ///< "empirical_bayes" or "full_bayes"
    std::string kernel;
    std::string likelihood;
    std::string scheme;
    NoiseMode noise_mode = NoiseMode::Learned;

    PredictiveGrid grid;
    std::vector<double> data_psi;
    std::vector<double> mean_at_data;
    std::vector<double> std_at_data;

    std::vector<std::string> parameter_names;  ///< kernel then likelihood
    std::vector<double> point_estimate;        ///< empirical Bayes
    std::vector<std::vector<double>> samples;  ///< full Bayes, one array per parameter
    std::optional<KernelConfig> fitted_kernel;
    std::optional<LikelihoodConfig> fitted_likelihood;

    double log_marginal_likelihood = 0.0;  ///< empirical Bayes best optimum
    int restarts_converged = 0;
    int restarts_failed = 0;
    double acceptance_rate = 0.0;          ///< full Bayes, after burn-in
    std::vector<std::string> warnings;
    double runtime_s = 0.0;
    std::optional<double> rmse;            ///< at the data coordinates vs truth
    std::vector<std::vector<double>> curve_samples;  ///< only with keep_curves

    bool is_full_bayes() const { return method == "full_bayes"; }
    const std::vector<double>* parameter_samples(const std::string& name) const;
};

/// Maximizes the log marginal likelihood from `restarts` starting points:
/// the prior locations first, then prior draws. Gaussian likelihood only.
FitResult fit_empirical_bayes(const KernelConfig& kernel, const Dataset& data, const EmpiricalBayesOptions& options = {});

/// MCMC over hyperparameters (and latents, depending on the scheme). The
/// curve is the pointwise mean of the conditioned sample curves and the std
/// is their pointwise spread (plus the analytic latent variance when the
/// latent is marginalized). `kernel` and `lik` seed the chain and are the
/// fixed values under fix_hyperparameters.
FitResult fit_full_bayes(const KernelConfig& kernel, const LikelihoodConfig& lik, const Dataset& data,
                         const FullBayesOptions& options = {});

struct Histogram {
    std::string parameter;
    std::vector<double> edges;  ///< bins + 1 edges
    std::vector<long> counts;
};

/// Equal-width histograms of each sampled hyperparameter. A constant array
/// gives one bin. Throws UnsupportedOperation for empirical-Bayes results.
std::vector<Histogram> extract_histograms(const FitResult& result, int bins = 30);

/// CSV `parameter,bin_lo,bin_hi,count`.
std::string histogram_csv(const std::vector<Histogram>& histograms);

/// Metadata and hyperparameter summaries (samples are summarized, not dumped).
nlohmann::json fit_result_json(const FitResult& result);

double median(std::vector<double> values);

}  // namespace profgp
