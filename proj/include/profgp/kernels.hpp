#pragma once

// Covariance functions on the 1-D flux coordinate and Gram-matrix assembly.

#include <concepts>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "profgp/transforms.hpp"

namespace profgp {

struct StationaryParams {
    double theta_v = 1.0;  ///< amplitude
    double theta_l = 0.5;  ///< correlation length

    bool operator==(const StationaryParams&) const = default;
};

/// Gibbs kernel whose length scale follows
/// l(psi) = (l_core + l_edge)/2 - (l_core - l_edge)/2 * tanh((psi - psi_0)/w_l).
struct GibbsTanhParams {
    double theta_v = 1.0;
    double l_core = 0.5;
    double l_edge = 0.05;
    double psi_0 = 0.95;
    double w_l = 0.02;

    double length_scale(double psi) const;

    bool operator==(const GibbsTanhParams&) const = default;
};

/// Two Matern 5/2 kernels blended by logistic transfer weights. Kernel B is
/// active on [c1, c2]; kernel A covers both outer regions with one parameter
/// set via w_A = 1 - w_B.
struct ChangePointConfig {
    StationaryParams kernel_a{1.0, 0.5};
    StationaryParams kernel_b{1.0, 0.1};
    double c1 = 0.9;
    double c2 = 1.0;
    double transfer_width = 0.01;

    /// w_B(psi) = s(psi; c1) * (1 - s(psi; c2)).
    double weight_b(double psi) const;
    double weight_a(double psi) const { return 1.0 - weight_b(psi); }

    bool operator==(const ChangePointConfig&) const = default;
};

/// theta_v * exp(-(a-b)^2 / (2 theta_l^2)); amplitude enters unsquared.
double k_sek(const StationaryParams& p, double a, double b);

/// theta_v^2 (1 + sqrt5 d/l + 5 d^2/(3 l^2)) exp(-sqrt5 d/l).
double k_matern52(const StationaryParams& p, double a, double b);

/// theta_v^2 sqrt(2 l(a) l(b) / (l(a)^2 + l(b)^2)) exp(-(a-b)^2 / (l(a)^2 + l(b)^2)).
double k_gibbs_tanh(const GibbsTanhParams& p, double a, double b);

double k_changepoint(const ChangePointConfig& c, double a, double b);

struct SquaredExponential {
    StationaryParams params;
    bool operator==(const SquaredExponential&) const = default;
};

struct Matern52 {
    StationaryParams params;
    bool operator==(const Matern52&) const = default;
};

using KernelConfig = std::variant<SquaredExponential, Matern52, GibbsTanhParams, ChangePointConfig>;

double evaluate(const KernelConfig& kernel, double a, double b);
std::string kernel_name(const KernelConfig& kernel);

/// Throws ValidationError on non-positive scales, c1 >= c2, etc.
void validate(const KernelConfig& kernel);

// Learned hyperparameters. The change-point locations and transfer width are
// fixed and not exposed here.
std::vector<std::string> parameter_names(const KernelConfig& kernel);
std::vector<Transform> parameter_transforms(const KernelConfig& kernel);
Eigen::VectorXd to_unconstrained(const KernelConfig& kernel);
KernelConfig with_unconstrained(const KernelConfig& kernel, const Eigen::Ref<const Eigen::VectorXd>& u);

/// M(i, j) = k(xs[i], xs2[j]) for any callable k(double, double).
template <typename KernelFn>
    requires std::invocable<KernelFn, double, double>
Eigen::MatrixXd gram(KernelFn&& k, std::span<const double> xs, std::span<const double> xs2) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs2.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs2.size(); ++j) m(i, j) = k(xs[i], xs2[j]);
    return m;
}

Eigen::MatrixXd gram(const KernelConfig& kernel, std::span<const double> xs, std::span<const double> xs2);
Eigen::MatrixXd gram(const KernelConfig& kernel, std::span<const double> xs);

/// dK/du_j for each unconstrained hyperparameter u_j, on the square Gram of xs.
std::vector<Eigen::MatrixXd> gram_gradients(const KernelConfig& kernel, std::span<const double> xs);

void to_json(nlohmann::json& j, const KernelConfig& kernel);
void from_json(const nlohmann::json& j, KernelConfig& kernel);

}  // namespace profgp
