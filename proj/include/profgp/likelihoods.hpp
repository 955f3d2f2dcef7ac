#pragma once

// Observation-noise densities for the residual y - f.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "profgp/transforms.hpp"

namespace profgp {

struct GaussianLik {
    double sigma_n = 0.1;
    bool operator==(const GaussianLik&) const = default;
};

struct StudentTLik {
    double sigma_t = 0.1;
    double nu = 2.0;  ///< > 1 so the predictive mean exists
    bool operator==(const StudentTLik&) const = default;
};

enum class HeavyTailFamily { Laplace, Logistic };

struct HeavyTailLik {
    HeavyTailFamily family = HeavyTailFamily::Laplace;
    double scale = 0.1;
    bool operator==(const HeavyTailLik&) const = default;
};

using LikelihoodConfig = std::variant<GaussianLik, StudentTLik, HeavyTailLik>;

/// log p(residual). Student's t is evaluated at x = residual / sigma_t with
/// the -log(sigma_t) Jacobian. Throws ValidationError on a non-finite residual.
double log_density(const LikelihoodConfig& lik, double residual);

/// Sum of per-point log densities; 0 for an empty span.
double joint_log_likelihood(const LikelihoodConfig& lik, std::span<const double> residuals);

void validate(const LikelihoodConfig& lik);
std::string likelihood_name(const LikelihoodConfig& lik);

std::vector<std::string> parameter_names(const LikelihoodConfig& lik);
std::vector<Transform> parameter_transforms(const LikelihoodConfig& lik);
Eigen::VectorXd to_unconstrained(const LikelihoodConfig& lik);
LikelihoodConfig with_unconstrained(const LikelihoodConfig& lik, const Eigen::Ref<const Eigen::VectorXd>& u);

void to_json(nlohmann::json& j, const LikelihoodConfig& lik);
void from_json(const nlohmann::json& j, LikelihoodConfig& lik);

}  // namespace profgp
