#include "profgp/likelihoods.hpp"

#include <cmath>
#include <numbers>

#include "profgp/errors.hpp"
#include "profgp/special.hpp"

namespace profgp {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

}  // namespace

double log_density(const LikelihoodConfig& lik, double r) {
    if (!std::isfinite(r)) throw ValidationError("log_density: residual is not finite");
    return std::visit(
        [r](const auto& l) -> double {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GaussianLik>) {
                const double z = r / l.sigma_n;
                return -kHalfLogTwoPi - std::log(l.sigma_n) - 0.5 * z * z;
            } else if constexpr (std::is_same_v<L, StudentTLik>) {
                const double x = r / l.sigma_t;
                const double nu = l.nu;
                return log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
                       0.5 * (nu + 1.0) * std::log1p(x * x / nu) - std::log(l.sigma_t);
            } else {
                const double z = std::abs(r) / l.scale;
                if (l.family == HeavyTailFamily::Laplace) return -std::log(2.0 * l.scale) - z;
                return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(l.scale);
            }
        },
        lik);
}

double joint_log_likelihood(const LikelihoodConfig& lik, std::span<const double> residuals) {
    double total = 0.0;
    for (double r : residuals) total += log_density(lik, r);
    return total;
}

void validate(const LikelihoodConfig& lik) {
    std::visit(
        [](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GaussianLik>) {
                if (!(l.sigma_n > 0.0) || !std::isfinite(l.sigma_n)) throw ValidationError("sigma_n must be > 0");
            } else if constexpr (std::is_same_v<L, StudentTLik>) {
                if (!(l.sigma_t > 0.0) || !std::isfinite(l.sigma_t)) throw ValidationError("sigma_t must be > 0");
                if (!(l.nu > 1.0) || !std::isfinite(l.nu)) throw ValidationError("nu must be > 1");
            } else {
                if (!(l.scale > 0.0) || !std::isfinite(l.scale)) throw ValidationError("scale must be > 0");
            }
        },
        lik);
}

std::string likelihood_name(const LikelihoodConfig& lik) {
    if (lik.index() == 0) return "gaussian";
    if (lik.index() == 1) return "student_t";
    return std::get<HeavyTailLik>(lik).family == HeavyTailFamily::Laplace ? "laplace" : "logistic";
}

std::vector<std::string> parameter_names(const LikelihoodConfig& lik) {
    if (lik.index() == 0) return {"sigma_n"};
    if (lik.index() == 1) return {"sigma_t", "nu"};
    return {"scale"};
}

std::vector<Transform> parameter_transforms(const LikelihoodConfig& lik) {
    if (lik.index() == 1) return {Transform::Log, Transform::LogMinusOne};
    return {Transform::Log};
}

Eigen::VectorXd to_unconstrained(const LikelihoodConfig& lik) {
    const auto transforms = parameter_transforms(lik);
    Eigen::VectorXd u(static_cast<Eigen::Index>(transforms.size()));
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GaussianLik>) {
                u[0] = std::log(l.sigma_n);
            } else if constexpr (std::is_same_v<L, StudentTLik>) {
                u[0] = std::log(l.sigma_t);
                u[1] = to_unconstrained(l.nu, Transform::LogMinusOne);
            } else {
                u[0] = std::log(l.scale);
            }
        },
        lik);
    return u;
}

LikelihoodConfig with_unconstrained(const LikelihoodConfig& lik, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() != static_cast<Eigen::Index>(parameter_names(lik).size())) {
        throw ValidationError("likelihood hyperparameter vector has wrong length");
    }
    return std::visit(
        [&](auto l) -> LikelihoodConfig {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GaussianLik>) {
                l.sigma_n = std::exp(u[0]);
            } else if constexpr (std::is_same_v<L, StudentTLik>) {
                l.sigma_t = std::exp(u[0]);
                l.nu = from_unconstrained(u[1], Transform::LogMinusOne);
            } else {
                l.scale = std::exp(u[0]);
            }
            return l;
        },
        lik);
}

void to_json(nlohmann::json& j, const LikelihoodConfig& lik) {
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GaussianLik>) j = {{"sigma_n", l.sigma_n}};
            else if constexpr (std::is_same_v<L, StudentTLik>) j = {{"sigma_t", l.sigma_t}, {"nu", l.nu}};
            else j = {{"scale", l.scale}};
        },
        lik);
    j["family"] = likelihood_name(lik);
}

void from_json(const nlohmann::json& j, LikelihoodConfig& lik) {
    const auto family = j.at("family").get<std::string>();
    if (family == "gaussian") lik = GaussianLik{j.at("sigma_n").get<double>()};
    else if (family == "student_t") lik = StudentTLik{j.at("sigma_t").get<double>(), j.at("nu").get<double>()};
    else if (family == "laplace") lik = HeavyTailLik{HeavyTailFamily::Laplace, j.at("scale").get<double>()};
    else if (family == "logistic") lik = HeavyTailLik{HeavyTailFamily::Logistic, j.at("scale").get<double>()};
    else throw ValidationError("unknown likelihood family '" + family + "'");
    validate(lik);
}

}  // namespace profgp
