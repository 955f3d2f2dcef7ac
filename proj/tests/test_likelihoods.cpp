#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "profgp/errors.hpp"
#include "profgp/likelihoods.hpp"
#include "profgp/rng.hpp"
#include "profgp/special.hpp"

using namespace profgp;

namespace {

LikelihoodConfig random_lik(Rng& rng, int kind) {
    const double scale = std::exp(std::log(0.05) + std::log(100.0) * rng.uniform());
    switch (kind % 4) {
        case 0: return GaussianLik{scale};
        case 1: return StudentTLik{scale, 1.05 + 30.0 * rng.uniform() * rng.uniform()};
        case 2: return HeavyTailLik{HeavyTailFamily::Laplace, scale};
        default: return HeavyTailLik{HeavyTailFamily::Logistic, scale};
    }
}

double scale_of(const LikelihoodConfig& lik) {
    if (const auto* g = std::get_if<GaussianLik>(&lik)) return g->sigma_n;
    if (const auto* t = std::get_if<StudentTLik>(&lik)) return t->sigma_t;
    return std::get<HeavyTailLik>(lik).scale;
}

// exact probability mass on [-50 s, 50 s]
double expected_mass(const LikelihoodConfig& lik) {
    if (const auto* t = std::get_if<StudentTLik>(&lik)) {
        const boost::math::students_t dist(t->nu);
        return boost::math::cdf(dist, 50.0) - boost::math::cdf(dist, -50.0);
    }
    return 1.0;  // Gaussian, Laplace and logistic tails beyond 50 scales are < 1e-21
}

}  // namespace

TEST(Likelihoods, GaussianMode) {
    EXPECT_NEAR(log_density(GaussianLik{1.0}, 0.0), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(log_density(GaussianLik{1.0}, 0.0), -0.9189385332046727, 1e-15);
}

TEST(Likelihoods, StudentTKnownValues) {
    // nu = 3, unit scale, x = 1: Gamma(2)/(sqrt(3 pi) Gamma(1.5)) (4/3)^-2
    const double ref = std::log(1.0 / (std::sqrt(3 * std::numbers::pi) * 0.5 * std::sqrt(std::numbers::pi)) *
                                std::pow(4.0 / 3.0, -2.0));
    EXPECT_NEAR(log_density(StudentTLik{1.0, 3.0}, 1.0), ref, 1e-13);
    // scale enters through x = r / sigma and a -log(sigma) Jacobian
    EXPECT_NEAR(log_density(StudentTLik{2.0, 3.0}, 2.0), ref - std::log(2.0), 1e-13);
    const boost::math::students_t dist(1.7);
    EXPECT_NEAR(log_density(StudentTLik{1.0, 1.7}, -4.2), std::log(boost::math::pdf(dist, -4.2)), 1e-12);
}

TEST(Likelihoods, StudentTGaussianLimit) {
    double sup_density = 0.0, sup_log = 0.0;
    for (double x = -5.0; x <= 5.0; x += 0.01) {
        const double lt = log_density(StudentTLik{1.0, 1e6}, x);
        const double lg = log_density(GaussianLik{1.0}, x);
        sup_log = std::max(sup_log, std::abs(lt - lg));
        sup_density = std::max(sup_density, std::abs(std::exp(lt) - std::exp(lg)));
    }
    EXPECT_LT(sup_log, 1e-3);
    EXPECT_LT(sup_density, 1e-4);
}

TEST(Likelihoods, StudentTHeavierTail) {
    EXPECT_GT(log_density(StudentTLik{1.0, 1.5}, 10.0), log_density(GaussianLik{1.0}, 10.0));
}

TEST(Likelihoods, JointIsSum) {
    EXPECT_EQ(joint_log_likelihood(GaussianLik{1.0}, {}), 0.0);
    const std::vector<double> two = {0.7, 0.7};
    const StudentTLik t{0.3, 2.5};
    EXPECT_NEAR(joint_log_likelihood(t, two), 2.0 * log_density(t, 0.7), 1e-15);
    const std::vector<double> pm = {1.0, -1.0};
    EXPECT_NEAR(joint_log_likelihood(GaussianLik{1.0}, pm), -std::log(2 * std::numbers::pi) - 1.0, 1e-14);
    EXPECT_NEAR(joint_log_likelihood(GaussianLik{1.0}, pm), -2.8378770664093453, 1e-14);
}

TEST(Likelihoods, NonFiniteResidualThrows) {
    EXPECT_THROW(log_density(GaussianLik{1.0}, NAN), ValidationError);
    EXPECT_THROW(log_density(StudentTLik{1.0, 2.0}, INFINITY), ValidationError);
    const std::vector<double> bad = {0.0, NAN};
    EXPECT_THROW(joint_log_likelihood(HeavyTailLik{}, bad), ValidationError);
}

TEST(Likelihoods, Normalization) {
    Rng rng(17);
    for (int kind = 0; kind < 4; ++kind) {
        for (int t = 0; t < 20; ++t) {
            const LikelihoodConfig lik = random_lik(rng, kind);
            const double s = scale_of(lik);
            auto f = [&](double x) { return std::exp(log_density(lik, x)); };
            // split at the mode so the kink of the Laplace density sits on a boundary
            double mass = 0.0;
            const double cuts[] = {-50 * s, -10 * s, -1 * s, 0.0, 1 * s, 10 * s, 50 * s};
            for (int k = 0; k + 1 < 7; ++k) {
                mass += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1], 15,
                                                                                     1e-14);
            }
            EXPECT_NEAR(mass, expected_mass(lik), 1e-6) << likelihood_name(lik);
        }
    }
}

TEST(Likelihoods, SymmetricAndMonotoneTails) {
    Rng rng(23);
    for (int kind = 0; kind < 4; ++kind) {
        for (int t = 0; t < 5; ++t) {
            const LikelihoodConfig lik = random_lik(rng, kind);
            const double s = scale_of(lik);
            double prev = log_density(lik, 0.0);
            for (double x = 0.01 * s; x < 30 * s; x += 0.01 * s) {
                const double v = log_density(lik, x);
                EXPECT_EQ(v, log_density(lik, -x));
                EXPECT_LT(v, prev);
                prev = v;
            }
        }
    }
}

TEST(Likelihoods, Validation) {
    EXPECT_THROW(validate(LikelihoodConfig{GaussianLik{0.0}}), ValidationError);
    EXPECT_THROW(validate(LikelihoodConfig{StudentTLik{1.0, 1.0}}), ValidationError);
    EXPECT_THROW(validate(LikelihoodConfig{HeavyTailLik{HeavyTailFamily::Logistic, -1.0}}), ValidationError);
}

TEST(Likelihoods, TransformsRoundTrip) {
    const LikelihoodConfig t = StudentTLik{0.2, 1.7};
    const Eigen::VectorXd u = to_unconstrained(t);
    EXPECT_NEAR(u[0], std::log(0.2), 1e-15);
    EXPECT_NEAR(u[1], std::log(0.7), 1e-15);
    const auto back = std::get<StudentTLik>(with_unconstrained(t, u));
    EXPECT_NEAR(back.sigma_t, 0.2, 1e-15);
    EXPECT_NEAR(back.nu, 1.7, 1e-15);
}

TEST(Likelihoods, JsonRoundTrip) {
    for (const LikelihoodConfig& lik : {LikelihoodConfig{GaussianLik{0.3}}, LikelihoodConfig{StudentTLik{0.1, 4.0}},
                                        LikelihoodConfig{HeavyTailLik{HeavyTailFamily::Logistic, 0.2}}}) {
        const nlohmann::json j = lik;
        EXPECT_EQ(j.at("family").get<std::string>(), likelihood_name(lik));
        EXPECT_TRUE(j.get<LikelihoodConfig>() == lik);
    }
}

TEST(LogGamma, MatchesStdLgamma) {
    for (double x = 0.5; x < 1e7; x *= 1.07) {
        const double ref = std::lgamma(x);
        EXPECT_NEAR(log_gamma(x), ref, 1e-12 * std::max(1.0, std::abs(ref))) << x;
    }
    EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-12);
    EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-12);
    EXPECT_THROW(log_gamma(0.0), ValidationError);
}
