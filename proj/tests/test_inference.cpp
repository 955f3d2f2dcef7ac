#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "profgp/bench.hpp"
#include "profgp/errors.hpp"
#include "profgp/inference.hpp"
#include "profgp/mcmc.hpp"
#include "profgp/rng.hpp"
#include "test_util.hpp"

using namespace profgp;

namespace {

// n points uniform on [0, 1.1], y drawn from the GP prior plus noise sigma
Dataset gp_sample(const KernelConfig& kernel, double sigma, int n, Rng& rng) {
    Dataset d;
    d.psi = testutil::random_points(rng, n);
    const JitteredCholesky chol = jittered_cholesky(gram(kernel, d.psi));
    Eigen::VectorXd z(n);
    for (auto& x : z) x = rng.normal();
    const Eigen::VectorXd f = chol.multiply_lower(z);
    for (int i = 0; i < n; ++i) {
        d.truth.push_back(f[i]);
        d.y.push_back(f[i] + sigma * rng.normal());
        d.sigma_reported.push_back(sigma);
    }
    return d;
}

Dataset profile_data(Regime regime, int n_outliers, double sigma_frac, std::uint64_t seed) {
    ProfileSpec spec;
    spec.regime = regime;
    NoiseSpec noise;
    noise.sigma_frac = sigma_frac;
    noise.n_outliers = n_outliers;
    noise.seed = seed;
    return generate_dataset(spec, noise, make_grid());
}

ChainConfig short_chain(std::uint64_t seed) {
    ChainConfig c;
    c.n_burn = 500;
    c.n_samples = 1000;
    c.thin = 5;
    c.seed = seed;
    return c;
}

double quantile_fraction_below(const std::vector<double>& v, double x) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double s) { return s < x; })) /
           static_cast<double>(v.size());
}

}  // namespace

TEST(EmpiricalBayes, RecoversLengthScale) {
    // about ten correlation lengths across the domain, so the estimate is
    // identified well enough for the 20% band
    const double true_l = 0.1;
    const KernelConfig truth = SquaredExponential{{1.0, true_l}};
    Rng rng(77);
    int hits = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Dataset d = gp_sample(truth, 0.05, 200, rng);
        EmpiricalBayesOptions opt;
        opt.restarts = 2;
        opt.seed = 100 + static_cast<std::uint64_t>(trial);
        opt.noise_mode = NoiseMode::Reported;  // sigma known
        opt.grid = {0.0, 1.1};
        const FitResult r = fit_empirical_bayes(SquaredExponential{}, d, opt);
        const double l = std::get<SquaredExponential>(*r.fitted_kernel).params.theta_l;
        if (std::abs(l - true_l) <= 0.2 * true_l) ++hits;
    }
    EXPECT_GE(hits, 40);
}

TEST(EmpiricalBayes, MoreRestartsNeverWorse) {
    const Dataset d = profile_data(Regime::Hmode, 3, 0.1, 11);
    EmpiricalBayesOptions one;
    one.restarts = 1;
    one.seed = 5;
    one.grid = {0.0, 1.1};
    EmpiricalBayesOptions eight = one;
    eight.restarts = 8;
    const FitResult a = fit_empirical_bayes(ChangePointConfig{}, d, one);
    const FitResult b = fit_empirical_bayes(ChangePointConfig{}, d, eight);
    EXPECT_GE(b.log_marginal_likelihood, a.log_marginal_likelihood);
    EXPECT_EQ(b.restarts_converged + b.restarts_failed, 8);
}

TEST(EmpiricalBayes, NoiseFreeLinear) {
    Dataset d;
    d.psi = make_grid();
    for (double p : d.psi) {
        const double f = 1.0 - 0.6 * p;
        d.y.push_back(f);
        d.truth.push_back(f);
        d.sigma_reported.push_back(1e-3);
    }
    EmpiricalBayesOptions opt;
    opt.seed = 3;
    const FitResult r = fit_empirical_bayes(SquaredExponential{}, d, opt);
    ASSERT_TRUE(r.rmse.has_value());
    EXPECT_LT(*r.rmse, 1e-2);
    EXPECT_EQ(r.grid.psi_star.size(), 220u);
}

TEST(EmpiricalBayes, RejectsNonGaussianAndEmpty) {
    EXPECT_THROW(fit_empirical_bayes(Matern52{}, Dataset{}), ValidationError);
}

class FixedHyperOracle : public ::testing::TestWithParam<LatentScheme> {};

// Sampled mean vs the exact Gaussian posterior with the same hyperparameters.
TEST_P(FixedHyperOracle, MatchesAnalyticPosterior) {
    Rng rng(2);
    const KernelConfig kernel = Matern52{{1.0, 0.3}};
    const Dataset d = gp_sample(kernel, 0.1, 20, rng);
    const std::vector<double> grid = prediction_grid(20);

    FullBayesOptions opt;
    opt.chain = ChainConfig{};
    opt.chain.seed = 42;
    opt.scheme = GetParam();
    opt.fix_hyperparameters = true;
    opt.keep_curves = true;
    opt.grid = grid;
    const FitResult r = fit_full_bayes(kernel, GaussianLik{0.1}, d, opt);

    GPModel m;
    m.kernel = kernel;
    m.noise.sigma_n = 0.1;
    const PredictiveGrid exact = posterior_predictive(m, d, grid);

    ASSERT_EQ(r.curve_samples.size(), static_cast<std::size_t>(opt.chain.retained()));
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<double> chain;
        for (const auto& c : r.curve_samples) chain.push_back(c[j]);
        const double mcse = batch_means_standard_error(chain);
        EXPECT_LE(std::abs(r.grid.mean[j] - exact.mean[j]), 3.0 * mcse) << "psi=" << grid[j];
    }
}

INSTANTIATE_TEST_SUITE_P(Schemes, FixedHyperOracle,
                         ::testing::Values(LatentScheme::WhitenedMetropolis, LatentScheme::ScaleMixture));

TEST(FullBayes, MarginalSchemeWithFixedHypersIsExact) {
    Rng rng(6);
    const KernelConfig kernel = Matern52{{1.0, 0.3}};
    const Dataset d = gp_sample(kernel, 0.1, 20, rng);
    FullBayesOptions opt;
    opt.chain = short_chain(1);
    opt.scheme = LatentScheme::Marginal;
    opt.fix_hyperparameters = true;
    opt.grid = prediction_grid(15);
    const FitResult r = fit_full_bayes(kernel, GaussianLik{0.1}, d, opt);
    GPModel m;
    m.kernel = kernel;
    m.noise.sigma_n = 0.1;
    const PredictiveGrid exact = posterior_predictive(m, d, opt.grid);
    for (std::size_t j = 0; j < opt.grid.size(); ++j) {
        EXPECT_NEAR(r.grid.mean[j], exact.mean[j], 1e-10);
        EXPECT_NEAR(r.grid.std[j], exact.std[j], 1e-10);
    }
}

TEST(Metropolis, TwoDimensionalGaussianMoments) {
    const Eigen::Vector2d mu(1.0, -2.0);
    Eigen::Matrix2d cov;
    cov << 1.0, 0.6, 0.6, 0.5;
    const Eigen::Matrix2d prec = cov.inverse();
    auto logp = [&](const Eigen::VectorXd& x) {
        const Eigen::Vector2d d = x - mu;
        return -0.5 * d.dot(prec * d);
    };
    Rng rng(123);
    const MetropolisRun run = run_adaptive_metropolis(logp, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones(), 5000,
                                                      100000, 5, AdaptationSettings{}, rng);
    ASSERT_EQ(run.samples.size(), 20000u);
    EXPECT_GT(run.acceptance_rate, 0.1);
    EXPECT_LT(run.acceptance_rate, 0.5);

    std::vector<double> xs[2];
    for (const auto& s : run.samples) {
        xs[0].push_back(s[0]);
        xs[1].push_back(s[1]);
    }
    double mean[2];
    for (int i = 0; i < 2; ++i) {
        mean[i] = std::accumulate(xs[i].begin(), xs[i].end(), 0.0) / static_cast<double>(xs[i].size());
        EXPECT_LE(std::abs(mean[i] - mu[i]), 3.0 * batch_means_standard_error(xs[i])) << i;
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = i; j < 2; ++j) {
            std::vector<double> prod;
            for (std::size_t k = 0; k < xs[0].size(); ++k) prod.push_back((xs[i][k] - mu[i]) * (xs[j][k] - mu[j]));
            const double c = std::accumulate(prod.begin(), prod.end(), 0.0) / static_cast<double>(prod.size());
            EXPECT_LE(std::abs(c - cov(i, j)), 3.0 * batch_means_standard_error(prod)) << i << j;
        }
    }
}

TEST(Metropolis, BatchMeansOfIidChain) {
    Rng rng(1);
    std::vector<double> v(10000);
    for (auto& x : v) x = rng.normal();
    EXPECT_NEAR(batch_means_standard_error(v), 0.01, 0.004);
    EXPECT_THROW(batch_means_standard_error(std::vector<double>(10, 1.0)), ValidationError);
}

TEST(FullBayes, StudentTBeatsGaussianWithOutliers) {
    const Dataset d = profile_data(Regime::Lmode, 10, 0.05, 2024);
    MethodSettings s;
    s.record_timing = false;
    const std::vector<double> grid = {0.0, 1.1};
    const FitResult t = fit_method(Method::FB_ChangePoint_StudentT, d, s, 9, grid);
    const FitResult g = fit_method(Method::FB_ChangePoint_Gaussian, d, s, 9, grid);
    ASSERT_TRUE(t.rmse && g.rmse);
    EXPECT_LT(*t.rmse, *g.rmse);
}

TEST(FullBayes, HmodeHistograms) {
    const Dataset d = profile_data(Regime::Hmode, 10, 0.05, 99);
    MethodSettings s;
    s.record_timing = false;
    const FitResult r = fit_method(Method::FB_ChangePoint_StudentT, d, s, 4, {0.0, 1.1});

    const auto hists = extract_histograms(r, 30);
    ASSERT_EQ(hists.size(), r.parameter_names.size());
    for (const auto& h : hists) {
        if (h.parameter != "nu") continue;
        const auto mode = static_cast<std::size_t>(std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
        const double centre = 0.5 * (h.edges[mode] + h.edges[mode + 1]);
        EXPECT_GE(centre, 1.0);
        EXPECT_LE(centre, 3.0);
    }
    // pedestal length scale mostly short
    const auto* lp = r.parameter_samples("theta_l_b");
    ASSERT_NE(lp, nullptr);
    EXPECT_GT(quantile_fraction_below(*lp, 0.1), 0.5);
}

TEST(Histograms, EmpiricalBayesUnsupported) {
    FitResult eb;
    eb.method = "empirical_bayes";
    EXPECT_THROW(extract_histograms(eb), UnsupportedOperation);
}

TEST(Histograms, ConstantArrayOneBin) {
    FitResult r;
    r.method = "full_bayes";
    r.parameter_names = {"a", "b"};
    r.samples = {{2.0, 2.0, 2.0}, {0.0, 1.0, 1.0, 3.0}};
    const auto h = extract_histograms(r, 3);
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[0].counts, std::vector<long>{3});
    ASSERT_EQ(h[1].counts.size(), 3u);
    EXPECT_EQ(h[1].counts, (std::vector<long>{1, 2, 1}));
    EXPECT_DOUBLE_EQ(h[1].edges.front(), 0.0);
    EXPECT_DOUBLE_EQ(h[1].edges.back(), 3.0);
    const std::string csv = histogram_csv(h);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "parameter,bin_lo,bin_hi,count");
}

TEST(FullBayes, SeededDeterminism) {
    const Dataset d = profile_data(Regime::Hmode, 3, 0.1, 5);
    for (auto lik : {LikelihoodConfig{GaussianLik{0.1}}, LikelihoodConfig{StudentTLik{0.1, 2.0}}}) {
        FullBayesOptions opt;
        opt.chain = short_chain(17);
        opt.record_timing = false;
        opt.grid = prediction_grid(30);
        const FitResult a = fit_full_bayes(ChangePointConfig{}, lik, d, opt);
        const FitResult b = fit_full_bayes(ChangePointConfig{}, lik, d, opt);
        EXPECT_EQ(a.grid.mean, b.grid.mean);
        EXPECT_EQ(a.grid.std, b.grid.std);
        EXPECT_EQ(a.samples, b.samples);
        EXPECT_EQ(fit_result_json(a).dump(), fit_result_json(b).dump());
        opt.chain.seed = 18;
        const FitResult c = fit_full_bayes(ChangePointConfig{}, lik, d, opt);
        EXPECT_NE(a.samples, c.samples);
    }
}

TEST(FullBayes, WhitenedRunsOnHeavyTail) {
    const Dataset d = profile_data(Regime::Lmode, 3, 0.1, 8);
    FullBayesOptions opt;
    opt.chain = short_chain(3);
    opt.grid = prediction_grid(25);
    const FitResult r = fit_full_bayes(Matern52{}, HeavyTailLik{HeavyTailFamily::Laplace, 0.1}, d, opt);
    EXPECT_EQ(r.scheme, "whitened");
    EXPECT_EQ(r.samples.size(), r.parameter_names.size());
    for (const auto& s : r.samples) EXPECT_EQ(s.size(), 200u);
    for (double v : r.grid.std) EXPECT_GE(v, 0.0);
    EXPECT_THROW(
        {
            FullBayesOptions bad = opt;
            bad.scheme = LatentScheme::Marginal;
            fit_full_bayes(Matern52{}, HeavyTailLik{}, d, bad);
        },
        ValidationError);
}

TEST(FullBayes, PosteriorContraction) {
    ProfileSpec spec;
    const KernelConfig kernel = SquaredExponential{{1.0, 0.3}};
    auto fit_with = [&](int n) {
        Dataset d;
        for (int i = 0; i < n; ++i) {
            const double p = kDomainMax * i / (n - 1);
            d.psi.push_back(p);
            d.y.push_back(eval_profile(spec, p));
            d.truth.push_back(d.y.back());
            d.sigma_reported.push_back(1e-3);
        }
        FullBayesOptions opt;
        opt.chain = short_chain(1);
        opt.fix_hyperparameters = true;
        opt.grid = prediction_grid(50);
        const FitResult r = fit_full_bayes(kernel, GaussianLik{1e-3}, d, opt);
        return std::accumulate(r.grid.std.begin(), r.grid.std.end(), 0.0) / 50.0;
    };
    EXPECT_LT(fit_with(22), fit_with(11));
}

TEST(Priors, DefaultsFollowParameterOrder) {
    const Dataset d = profile_data(Regime::Hmode, 0, 0.1, 1);
    const auto p = default_priors(ChangePointConfig{}, StudentTLik{}, d);
    ASSERT_EQ(p.size(), 6u);
    EXPECT_EQ(p[1].name, "theta_l_a");
    EXPECT_NEAR(p[1].location, std::log(0.5), 1e-15);
    EXPECT_NEAR(p[3].location, std::log(0.1), 1e-15);
    EXPECT_EQ(p[5].name, "nu");
    EXPECT_EQ(p[5].location, 0.0);
    for (const auto& h : p) EXPECT_EQ(h.width, 1.0);
    EXPECT_EQ(default_priors(ChangePointConfig{}, StudentTLik{}, d, NoiseMode::Reported).size(), 5u);
}

TEST(ChainConfig, Validation) {
    ChainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.retained(), 1000);
    c.thin = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.n_burn = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.target_accept = 1.0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.thin = 6000;
    EXPECT_THROW(c.validate(), ValidationError);
    EXPECT_EQ(latent_scheme_from_string("scale-mixture"), LatentScheme::ScaleMixture);
    EXPECT_THROW(latent_scheme_from_string("hmc"), ValidationError);
}

TEST(FitResult, JsonSummaries) {
    FitResult r;
    r.method = "full_bayes";
    r.parameter_names = {"nu"};
    r.samples = {{1.0, 2.0, 3.0}};
    const auto j = fit_result_json(r);
    EXPECT_EQ(j.at("parameters").at(0).at("median").get<double>(), 2.0);
    EXPECT_FALSE(j.contains("rmse"));
    EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
}
