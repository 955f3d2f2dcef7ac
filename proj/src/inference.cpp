#include "profgp/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "profgp/bench.hpp"
#include "profgp/csv.hpp"
#include "profgp/errors.hpp"
#include "profgp/linalg.hpp"
#include "profgp/mcmc.hpp"
#include "profgp/optimize.hpp"
#include "profgp/rng.hpp"
#include "profgp/special.hpp"

namespace profgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Maps the free unconstrained vector to a (kernel, likelihood) pair. Under
// NoiseMode::Reported the likelihood scale is pinned to 1 and the per-point
// scales come from the reported error bars through `weights`.
struct Layout {
    KernelConfig kernel0;
    LikelihoodConfig lik0;
    NoiseMode mode = NoiseMode::Learned;
    Eigen::Index nk = 0;
    Eigen::Index nl = 0;  // free likelihood parameters
    std::vector<std::string> names;
    std::vector<Transform> transforms;
    std::vector<double> weights;  // variance multipliers; empty when learned

    Layout(const KernelConfig& kernel, const LikelihoodConfig& lik, const Dataset& data, NoiseMode m)
        : kernel0(kernel), lik0(lik), mode(m) {
        names = parameter_names(kernel);
        transforms = parameter_transforms(kernel);
        nk = static_cast<Eigen::Index>(names.size());
        auto lnames = parameter_names(lik);
        auto ltrans = parameter_transforms(lik);
        const std::size_t first = mode == NoiseMode::Reported ? 1 : 0;
        for (std::size_t i = first; i < lnames.size(); ++i) {
            names.push_back(lnames[i]);
            transforms.push_back(ltrans[i]);
        }
        nl = static_cast<Eigen::Index>(lnames.size() - first);
        if (mode == NoiseMode::Reported) {
            Eigen::VectorXd lu = to_unconstrained(lik0);
            lu[0] = 0.0;
            lik0 = with_unconstrained(lik0, lu);
            weights.resize(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double s = data.sigma_reported[i];
                if (!(s > 0.0)) throw ValidationError("reported sigma must be > 0 for noise_mode=reported");
                weights[i] = s * s;
            }
        }
    }

    Eigen::Index size() const { return nk + nl; }

    Eigen::VectorXd initial() const {
        Eigen::VectorXd u(size());
        u.head(nk) = to_unconstrained(kernel0);
        const Eigen::VectorXd lu = to_unconstrained(lik0);
        u.tail(nl) = lu.tail(nl);
        return u;
    }

    KernelConfig kernel(const Eigen::VectorXd& u) const { return with_unconstrained(kernel0, u.head(nk)); }

    LikelihoodConfig likelihood(const Eigen::VectorXd& u) const {
        Eigen::VectorXd lu = to_unconstrained(lik0);
        lu.tail(nl) = u.tail(nl);
        return with_unconstrained(lik0, lu);
    }

    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }

    std::vector<double> constrained(const Eigen::VectorXd& u) const {
        std::vector<double> out(static_cast<std::size_t>(u.size()));
        for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = from_unconstrained(u[i], transforms[i]);
        return out;
    }
};

double likelihood_scale(const LikelihoodConfig& lik) {
    if (const auto* g = std::get_if<GaussianLik>(&lik)) return g->sigma_n;
    if (const auto* t = std::get_if<StudentTLik>(&lik)) return t->sigma_t;
    return std::get<HeavyTailLik>(lik).scale;
}

LikelihoodConfig with_scale(LikelihoodConfig lik, double scale) {
    if (auto* g = std::get_if<GaussianLik>(&lik)) g->sigma_n = scale;
    else if (auto* t = std::get_if<StudentTLik>(&lik)) t->sigma_t = scale;
    else std::get<HeavyTailLik>(lik).scale = scale;
    return lik;
}

double prior_log_density(const std::vector<HyperPrior>& priors, const Eigen::VectorXd& u) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) lp += priors[i].log_density(u[i]);
    return lp;
}

std::vector<double> evaluation_points(const std::vector<double>& grid, const Dataset& data) {
    std::vector<double> pts = grid.empty() ? prediction_grid() : grid;
    pts.insert(pts.end(), data.psi.begin(), data.psi.end());
    return pts;
}

void check_data(const Dataset& data) {
    if (data.size() == 0) throw ValidationError("dataset is empty");
    if (data.y.size() != data.size() || data.sigma_reported.size() != data.size()) {
        throw ValidationError("dataset columns have different lengths");
    }
}

void finish_curves(FitResult& out, const std::vector<double>& points, std::size_t n_grid, const Eigen::VectorXd& mean,
                   const Eigen::VectorXd& second_moment_or_var, bool is_variance, const Dataset& data) {
    out.grid.psi_star.assign(points.begin(), points.begin() + static_cast<long>(n_grid));
    out.grid.mean.resize(n_grid);
    out.grid.std.resize(n_grid);
    out.data_psi = data.psi;
    out.mean_at_data.resize(data.size());
    out.std_at_data.resize(data.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto idx = static_cast<Eigen::Index>(j);
        const double var =
            is_variance ? second_moment_or_var[idx] : second_moment_or_var[idx] - mean[idx] * mean[idx];
        const double sd = std::sqrt(std::max(var, 0.0));
        if (j < n_grid) {
            out.grid.mean[j] = mean[idx];
            out.grid.std[j] = sd;
        } else {
            out.mean_at_data[j - n_grid] = mean[idx];
            out.std_at_data[j - n_grid] = sd;
        }
    }
    if (data.has_truth()) out.rmse = rmse(out.mean_at_data, data.truth);
}

// collapsed Gaussian log density log N(y; mean, K + diag(d)) ------------------

struct Collapsed {
    double value = kNegInf;
    JitteredCholesky chol;
};

Collapsed collapsed_log_density(const Eigen::MatrixXd& k, const Eigen::VectorXd& d, const Eigen::VectorXd& centered) {
    Eigen::MatrixXd a = k;
    a.diagonal() += d;
    Collapsed out;
    out.chol = jittered_cholesky(a);
    const Eigen::VectorXd alpha = out.chol.solve(centered);
    out.value = -0.5 * centered.dot(alpha) - 0.5 * out.chol.log_determinant() -
                0.5 * static_cast<double>(centered.size()) * std::log(2.0 * std::numbers::pi);
    return out;
}

double log_gamma_density(double x, double shape, double rate) {
    return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// Curve accumulator over the evaluation points.
struct CurveStats {
    Eigen::VectorXd sum;
    Eigen::VectorXd sum_sq;
    long count = 0;
    bool keep = false;
    std::vector<std::vector<double>> curves;

    CurveStats(Eigen::Index n, bool keep_curves)
        : sum(Eigen::VectorXd::Zero(n)), sum_sq(Eigen::VectorXd::Zero(n)), keep(keep_curves) {}

    void add(const Eigen::VectorXd& curve) {
        sum += curve;
        sum_sq += curve.cwiseAbs2();
        ++count;
        if (keep) curves.emplace_back(curve.data(), curve.data() + curve.size());
    }
};

void record_acceptance(FitResult& out, double rate) {
    out.acceptance_rate = rate;
    if (rate < 0.05 || rate > 0.8) {
        std::ostringstream msg;
        msg << "acceptance rate " << rate << " outside [0.05, 0.8]";
        out.warnings.push_back(msg.str());
    }
}

struct SamplerContext {
    const Layout& layout;
    const std::vector<HyperPrior>& priors;
    const Dataset& data;
    const FullBayesOptions& options;
    const std::vector<double>& points;
    Eigen::VectorXd y;
    Eigen::VectorXd u0;
};

AdaptationSettings adaptation(const ChainConfig& chain) { return {chain.target_accept, chain.adapt_interval}; }

Eigen::VectorXd hyper_scales(const std::vector<HyperPrior>& priors) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(priors.size()));
    for (std::size_t i = 0; i < priors.size(); ++i) s[static_cast<Eigen::Index>(i)] = 0.1 * priors[i].width;
    return s;
}

void store_sample(std::vector<std::vector<double>>& samples, const Layout& layout, const Eigen::VectorXd& u) {
    const auto values = layout.constrained(u);
    for (std::size_t i = 0; i < values.size(); ++i) samples[i].push_back(values[i]);
}

// Gaussian likelihood with the latent integrated out: random walk over the
// hyperparameters of the collapsed posterior. Curves use the law of total
// variance across samples.
void run_marginal(const SamplerContext& ctx, Rng& rng, FitResult& out) {
    const auto& chain = ctx.options.chain;
    const Layout& layout = ctx.layout;
    const bool sample_hypers = !ctx.options.fix_hyperparameters && layout.size() > 0;
    out.samples.assign(layout.names.size(), {});

    auto model_at = [&](const Eigen::VectorXd& u) {
        GPModel m;
        m.kernel = layout.kernel(u);
        m.noise = std::get<GaussianLik>(layout.likelihood(u));
        m.noise_weights = layout.weights;
        return m;
    };
    auto target = [&](const Eigen::VectorXd& u) {
        try {
            return log_marginal_likelihood(model_at(u), ctx.data.psi, ctx.data.y, false).value +
                   prior_log_density(ctx.priors, u);
        } catch (const NumericalError&) {
            return kNegInf;
        } catch (const ValidationError&) {
            return kNegInf;
        }
    };

    Eigen::VectorXd u = ctx.u0;
    double lp = target(u);
    if (!std::isfinite(lp)) throw FitError("chain start has zero posterior density");

    const auto n_pts = static_cast<Eigen::Index>(ctx.points.size());
    Eigen::VectorXd sum_mean = Eigen::VectorXd::Zero(n_pts), sum_second = Eigen::VectorXd::Zero(n_pts);
    Eigen::VectorXd cached_mean, cached_var;
    bool cache_valid = false;
    long retained = 0;

    std::optional<AdaptiveMetropolis> proposal;
    if (sample_hypers) proposal.emplace(hyper_scales(ctx.priors), adaptation(chain));

    const int total = chain.n_burn + chain.n_samples;
    for (int it = 0; it < total; ++it) {
        if (it == chain.n_burn && proposal) proposal->freeze();
        if (proposal) {
            const Eigen::VectorXd cand = proposal->propose(u, rng);
            const double lp_cand = target(cand);
            const bool accept = std::isfinite(lp_cand) && std::log(1.0 - rng.uniform()) < lp_cand - lp;
            if (accept) {
                u = cand;
                lp = lp_cand;
                cache_valid = false;
            }
            proposal->record(u, accept);
        }
        if (it >= chain.n_burn && (it - chain.n_burn + 1) % chain.thin == 0) {
            if (!cache_valid) {
                const GaussianPosterior post(model_at(u), ctx.data.psi, ctx.data.y);
                post.predict(ctx.points, cached_mean, cached_var);
                cache_valid = true;
            }
            sum_mean += cached_mean;
            sum_second += cached_var + cached_mean.cwiseAbs2();
            ++retained;
            store_sample(out.samples, layout, u);
            if (ctx.options.keep_curves) {
                out.curve_samples.emplace_back(cached_mean.data(), cached_mean.data() + cached_mean.size());
            }
        }
    }
    if (proposal) record_acceptance(out, proposal->acceptance_rate());
    const Eigen::VectorXd mean = sum_mean / static_cast<double>(retained);
    const Eigen::VectorXd second = sum_second / static_cast<double>(retained);
    const std::size_t n_grid = ctx.points.size() - ctx.data.size();
    finish_curves(out, ctx.points, n_grid, mean, second, false, ctx.data);
}

// Scale-mixture Gibbs sampler. Student's t is written as a Gaussian with
// per-point precision multipliers lambda_i ~ Gamma(nu/2, nu/2). Each sweep:
//  1. random-walk step on the hyperparameters against the collapsed density
//     log N(y; 0, K + diag(s_i^2/lambda_i)) + log p(lambda | nu) + prior
//  2. exact draw of f | y, lambda, theta (Matheron's update)
//  3. exact draw of lambda_i | f, theta
// A Gaussian likelihood skips step 3 with lambda fixed at 1.
void run_scale_mixture(const SamplerContext& ctx, Rng& rng, FitResult& out) {
    const auto& chain = ctx.options.chain;
    const Layout& layout = ctx.layout;
    const Dataset& data = ctx.data;
    const auto n = static_cast<Eigen::Index>(data.size());
    const bool student = std::holds_alternative<StudentTLik>(layout.lik0);
    const bool sample_hypers = !ctx.options.fix_hyperparameters && layout.size() > 0;
    out.samples.assign(layout.names.size(), {});

    const Eigen::VectorXd& y = ctx.y;
    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(n);

    struct State {
        Eigen::VectorXd u;
        KernelConfig kernel;
        double scale = 1.0;
        double nu = 0.0;
        Eigen::MatrixXd k;
        double lp = kNegInf;
    };

    auto noise_diag = [&](const State& s) {
        Eigen::VectorXd d(n);
        for (Eigen::Index i = 0; i < n; ++i) d[i] = s.scale * s.scale * layout.weight(i) / lambda[i];
        return d;
    };
    auto log_target = [&](const State& s) {
        double lp = collapsed_log_density(s.k, noise_diag(s), y).value + prior_log_density(ctx.priors, s.u);
        if (student) {
            for (Eigen::Index i = 0; i < n; ++i) lp += log_gamma_density(lambda[i], 0.5 * s.nu, 0.5 * s.nu);
        }
        return lp;
    };
    auto make_state = [&](const Eigen::VectorXd& u, State& s) {
        try {
            s.u = u;
            s.kernel = layout.kernel(u);
            const LikelihoodConfig lik = layout.likelihood(u);
            s.scale = likelihood_scale(lik);
            if (const auto* t = std::get_if<StudentTLik>(&lik)) s.nu = t->nu;
            s.k = gram(s.kernel, data.psi);
            s.lp = log_target(s);
        } catch (const NumericalError&) {
            s.lp = kNegInf;
        } catch (const ValidationError&) {
            s.lp = kNegInf;
        }
        return std::isfinite(s.lp);
    };

    State cur;
    if (!make_state(ctx.u0, cur)) throw FitError("chain start has zero posterior density");
    std::optional<JitteredCholesky> k_chol;  // factor of cur.k, reset on acceptance

    std::optional<AdaptiveMetropolis> proposal;
    if (sample_hypers) proposal.emplace(hyper_scales(ctx.priors), adaptation(chain));

    CurveStats stats(static_cast<Eigen::Index>(ctx.points.size()), ctx.options.keep_curves);
    Eigen::VectorXd z1(n), z2(n), f(n), v(n);

    const int total = chain.n_burn + chain.n_samples;
    for (int it = 0; it < total; ++it) {
        if (it == chain.n_burn && proposal) proposal->freeze();
        if (proposal) {
            State cand;
            const bool ok = make_state(proposal->propose(cur.u, rng), cand);
            const bool accept = ok && std::log(1.0 - rng.uniform()) < cand.lp - cur.lp;
            if (accept) {
                cur = std::move(cand);
                k_chol.reset();
            }
            proposal->record(cur.u, accept);
        }

        const bool keep = it >= chain.n_burn && (it - chain.n_burn + 1) % chain.thin == 0;
        if (!student && !keep) continue;

        // f | y, lambda, theta
        if (!k_chol) k_chol = jittered_cholesky(cur.k);
        const Eigen::VectorXd d = noise_diag(cur);
        Eigen::MatrixXd a = cur.k;
        a.diagonal().array() += k_chol->jitter;
        a.diagonal() += d;
        const JitteredCholesky a_chol = jittered_cholesky(a);
        for (Eigen::Index i = 0; i < n; ++i) z1[i] = rng.normal();
        for (Eigen::Index i = 0; i < n; ++i) z2[i] = rng.normal();
        const Eigen::VectorXd f0 = k_chol->multiply_lower(z1);
        const Eigen::VectorXd resid = y - f0 - (d.cwiseSqrt().cwiseProduct(z2));
        const Eigen::VectorXd back = a_chol.solve(resid);
        const Eigen::MatrixXd lk = k_chol->lower();
        v = z1 + lk.transpose() * back;
        f = lk * v;

        if (keep) {
            const LatentConditioner cond(cur.kernel, 0.0, data.psi, ctx.points, *k_chol);
            stats.add(cond.condition_whitened(v));
            store_sample(out.samples, layout, cur.u);
        }

        if (student) {
            // lambda | f, theta; then refresh the current collapsed density
            for (Eigen::Index i = 0; i < n; ++i) {
                const double r = y[i] - f[i];
                const double s2 = cur.scale * cur.scale * layout.weight(i);
                lambda[i] = rng.gamma(0.5 * (cur.nu + 1.0), 0.5 * (cur.nu + r * r / s2));
                lambda[i] = std::max(lambda[i], 1e-300);
            }
            cur.lp = log_target(cur);
        }
    }
    if (proposal) record_acceptance(out, proposal->acceptance_rate());
    const Eigen::VectorXd mean = stats.sum / static_cast<double>(stats.count);
    const Eigen::VectorXd second = stats.sum_sq / static_cast<double>(stats.count);
    out.curve_samples = std::move(stats.curves);
    finish_curves(out, ctx.points, ctx.points.size() - data.size(), mean, second, false, data);
}

// One adaptive random walk over x = (hyperparameters, v) with f = L_K v.
void run_whitened(const SamplerContext& ctx, Rng& rng, FitResult& out) {
    const auto& chain = ctx.options.chain;
    const Layout& layout = ctx.layout;
    const Dataset& data = ctx.data;
    const auto n = static_cast<Eigen::Index>(data.size());
    const Eigen::Index nh = ctx.options.fix_hyperparameters ? 0 : layout.size();
    out.samples.assign(layout.names.size(), {});

    std::vector<double> half_log_w(data.size()), inv_sqrt_w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        half_log_w[i] = 0.5 * std::log(layout.weight(i));
        inv_sqrt_w[i] = 1.0 / std::sqrt(layout.weight(i));
    }

    struct Factor {
        Eigen::VectorXd u;
        KernelConfig kernel;
        LikelihoodConfig lik;
        JitteredCholesky chol;
        Eigen::MatrixXd lower;
    };
    auto factor_at = [&](const Eigen::VectorXd& u) {
        Factor fa;
        fa.u = u;
        fa.kernel = layout.kernel(u);
        fa.lik = layout.likelihood(u);
        fa.chol = jittered_cholesky(gram(fa.kernel, data.psi));
        fa.lower = fa.chol.lower();
        return fa;
    };

    auto log_target = [&](const Factor& fa, const Eigen::VectorXd& v) {
        const Eigen::VectorXd f = fa.lower * v;
        double lp = -0.5 * v.squaredNorm() + prior_log_density(ctx.priors, fa.u);
        for (Eigen::Index i = 0; i < n; ++i) {
            lp += log_density(fa.lik, (ctx.y[i] - f[i]) * inv_sqrt_w[i]) - half_log_w[i];
        }
        return lp;
    };

    Factor cur = factor_at(ctx.u0);
    // start the latent at the Gaussian posterior mean for the starting noise
    // scale, and shape its proposal by the matching posterior covariance
    // (I + L^T D^-1 L)^-1; the isotropic walk mixes far too slowly in the
    // prior-dominated directions
    Eigen::VectorXd v;
    Eigen::MatrixXd latent_cov;
    {
        GPModel m;
        m.kernel = cur.kernel;
        m.noise.sigma_n = likelihood_scale(cur.lik);
        m.noise_weights = layout.weights;
        const GaussianPosterior post(m, data.psi, data.y);
        Eigen::VectorXd fmean, fvar;
        post.predict(data.psi, fmean, fvar);
        v = cur.chol.solve_lower(fmean);

        const double s2 = m.noise.sigma_n * m.noise.sigma_n;
        Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd scaled = cur.lower;
        for (Eigen::Index i = 0; i < n; ++i) scaled.row(i) /= std::sqrt(s2 * layout.weight(static_cast<std::size_t>(i)));
        h.noalias() += scaled.transpose() * scaled;
        latent_cov = h.llt().solve(Eigen::MatrixXd::Identity(n, n));
    }
    double lp = log_target(cur, v);
    if (!std::isfinite(lp)) throw FitError("chain start has zero posterior density");

    Eigen::MatrixXd cov0 = Eigen::MatrixXd::Zero(nh + n, nh + n);
    if (nh > 0) cov0.topLeftCorner(nh, nh) = hyper_scales(ctx.priors).array().square().matrix().asDiagonal();
    cov0.bottomRightCorner(n, n) = latent_cov;
    AdaptiveMetropolis proposal(cov0, adaptation(chain));

    Eigen::VectorXd x(nh + n);
    if (nh > 0) x.head(nh) = cur.u;
    x.tail(n) = v;

    std::optional<LatentConditioner> cond;
    CurveStats stats(static_cast<Eigen::Index>(ctx.points.size()), ctx.options.keep_curves);

    const int total = chain.n_burn + chain.n_samples;
    for (int it = 0; it < total; ++it) {
        if (it == chain.n_burn) proposal.freeze();
        const Eigen::VectorXd cand = proposal.propose(x, rng);
        double lp_cand = kNegInf;
        std::optional<Factor> fa;
        try {
            if (nh > 0) {
                fa = factor_at(cand.head(nh));
                lp_cand = log_target(*fa, cand.tail(n));
            } else {
                lp_cand = log_target(cur, cand.tail(n));
            }
        } catch (const NumericalError&) {
            lp_cand = kNegInf;
        } catch (const ValidationError&) {
            lp_cand = kNegInf;
        }
        const bool accept = std::isfinite(lp_cand) && std::log(1.0 - rng.uniform()) < lp_cand - lp;
        if (accept) {
            x = cand;
            lp = lp_cand;
            if (fa) {
                cur = std::move(*fa);
                cond.reset();
            }
        }
        proposal.record(x, accept);

        if (it >= chain.n_burn && (it - chain.n_burn + 1) % chain.thin == 0) {
            if (!cond) cond.emplace(cur.kernel, 0.0, data.psi, ctx.points, cur.chol);
            stats.add(cond->condition_whitened(x.tail(n)));
            store_sample(out.samples, layout, cur.u);
        }
    }
    record_acceptance(out, proposal.acceptance_rate());
    const Eigen::VectorXd mean = stats.sum / static_cast<double>(stats.count);
    const Eigen::VectorXd second = stats.sum_sq / static_cast<double>(stats.count);
    out.curve_samples = std::move(stats.curves);
    finish_curves(out, ctx.points, ctx.points.size() - data.size(), mean, second, false, data);
}

}  // namespace

// ---------------------------------------------------------------------------

double HyperPrior::log_density(double u) const {
    const double z = (u - location) / width;
    return -0.5 * z * z - std::log(width) - 0.5 * std::log(2.0 * std::numbers::pi);
}

void HyperPrior::validate() const {
    if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("prior width for " + name + " must be > 0");
    if (!std::isfinite(location)) throw ValidationError("prior location for " + name + " must be finite");
}

std::string to_string(NoiseMode mode) { return mode == NoiseMode::Learned ? "learned" : "reported"; }

NoiseMode noise_mode_from_string(const std::string& name) {
    if (name == "learned") return NoiseMode::Learned;
    if (name == "reported") return NoiseMode::Reported;
    throw ValidationError("unknown noise mode '" + name + "' (expected learned or reported)");
}

std::string to_string(LatentScheme scheme) {
    switch (scheme) {
        case LatentScheme::Auto: return "auto";
        case LatentScheme::Marginal: return "marginal";
        case LatentScheme::ScaleMixture: return "scale_mixture";
        case LatentScheme::WhitenedMetropolis: return "whitened";
    }
    return "auto";
}

LatentScheme latent_scheme_from_string(const std::string& name) {
    if (name == "auto") return LatentScheme::Auto;
    if (name == "marginal") return LatentScheme::Marginal;
    if (name == "scale_mixture" || name == "scale-mixture") return LatentScheme::ScaleMixture;
    if (name == "whitened") return LatentScheme::WhitenedMetropolis;
    throw ValidationError("unknown sampler scheme '" + name + "'");
}

std::vector<HyperPrior> default_priors(const KernelConfig& kernel, const LikelihoodConfig& lik, const Dataset& data,
                                       NoiseMode mode) {
    check_data(data);
    const double sd = std::max(sample_std(data.y), 1e-12);
    const double log_sd = std::log(sd);
    const double log_scale = std::log(std::max(median(data.sigma_reported), 1e-12));
    const double log_core = std::log(0.5);
    const double log_short = std::log(0.1);

    std::vector<HyperPrior> priors;
    auto add = [&](const std::string& name, Transform t, double loc) { priors.push_back({name, t, loc, 1.0}); };
    if (std::holds_alternative<SquaredExponential>(kernel)) {
        add("theta_v", Transform::Log, 2.0 * log_sd);  // amplitude is a variance here
        add("theta_l", Transform::Log, log_core);
    } else if (std::holds_alternative<Matern52>(kernel)) {
        add("theta_v", Transform::Log, log_sd);
        add("theta_l", Transform::Log, log_core);
    } else if (std::holds_alternative<GibbsTanhParams>(kernel)) {
        add("theta_v", Transform::Log, log_sd);
        add("l_core", Transform::Log, log_core);
        add("l_edge", Transform::Log, log_short);
        priors.push_back({"psi_0", Transform::Identity, 0.95, 0.05});
        add("w_l", Transform::Log, std::log(0.02));
    } else {
        add("theta_v_a", Transform::Log, log_sd);
        add("theta_l_a", Transform::Log, log_core);
        add("theta_v_b", Transform::Log, log_sd);
        add("theta_l_b", Transform::Log, log_short);
    }

    const auto lnames = parameter_names(lik);
    const auto ltrans = parameter_transforms(lik);
    for (std::size_t i = mode == NoiseMode::Reported ? 1 : 0; i < lnames.size(); ++i) {
        if (lnames[i] == "nu") {
            add("nu", ltrans[i], 0.0);
        } else {
            add(lnames[i], ltrans[i], mode == NoiseMode::Reported ? 0.0 : log_scale);
        }
    }
    return priors;
}

void ChainConfig::validate() const {
    if (n_burn <= 0) throw ValidationError("n_burn must be > 0");
    if (n_samples <= 0) throw ValidationError("n_samples must be > 0");
    if (thin <= 0) throw ValidationError("thin must be > 0");
    if (thin > n_samples) throw ValidationError("thin exceeds n_samples; no samples would be retained");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw ValidationError("target_accept must lie in (0, 1)");
    if (adapt_interval <= 0) throw ValidationError("adapt_interval must be > 0");
}

const std::vector<double>* FitResult::parameter_samples(const std::string& name) const {
    for (std::size_t i = 0; i < parameter_names.size() && i < samples.size(); ++i) {
        if (parameter_names[i] == name) return &samples[i];
    }
    return nullptr;
}

FitResult fit_empirical_bayes(const KernelConfig& kernel, const Dataset& data, const EmpiricalBayesOptions& options) {
    const auto start = Clock::now();
    check_data(data);
    validate(kernel);
    if (options.restarts < 1) throw ValidationError("restarts must be >= 1");
    if (!(options.bound_widths > 0.0)) throw ValidationError("bound_widths must be > 0");

    const LikelihoodConfig lik0 = GaussianLik{std::max(median(data.sigma_reported), 1e-12)};
    const Layout layout(kernel, lik0, data, options.noise_mode);
    const auto priors = default_priors(kernel, lik0, data, options.noise_mode);
    const Eigen::Index d = layout.size();

    Eigen::VectorXd loc(d), lower(d), upper(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        loc[i] = priors[i].location;
        lower[i] = loc[i] - options.bound_widths * priors[i].width;
        upper[i] = loc[i] + options.bound_widths * priors[i].width;
    }

    auto model_at = [&](const Eigen::VectorXd& u) {
        GPModel m;
        m.kernel = layout.kernel(u);
        m.noise = std::get<GaussianLik>(layout.likelihood(u));
        m.noise_weights = layout.weights;
        return m;
    };
    const Objective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
        const MarginalLikelihood ml = log_marginal_likelihood(model_at(u), data.psi, data.y, true);
        grad = ml.gradient.head(d);  // drops dlog(sigma) when the noise is not learned
        return ml.value;
    };

    Rng rng(options.seed);
    FitResult out;
    std::optional<OptimizeResult> best;
    std::string last_error;
    OptimizeOptions opt{options.max_iterations, options.gradient_tolerance};
    for (int r = 0; r < options.restarts; ++r) {
        Eigen::VectorXd x0 = loc;
        if (r > 0) {
            for (Eigen::Index i = 0; i < d; ++i) {
                const double margin = (options.bound_widths - 0.5) * priors[i].width;
                x0[i] = std::clamp(rng.normal(loc[i], priors[i].width), loc[i] - margin, loc[i] + margin);
            }
        }
        try {
            OptimizeResult res = maximize_bfgs(objective, x0, lower, upper, opt);
            if (res.converged) ++out.restarts_converged;
            if (!best || res.value > best->value) best = std::move(res);
        } catch (const NumericalError& e) {
            ++out.restarts_failed;
            last_error = e.what();
        }
    }
    if (!best) throw FitError("empirical Bayes: all " + std::to_string(options.restarts) + " restarts failed: " + last_error);

    const GPModel model = model_at(best->x);
    const auto points = evaluation_points(options.grid, data);
    const GaussianPosterior post(model, data.psi, data.y);
    Eigen::VectorXd mean, var;
    post.predict(points, mean, var);

    out.method = "empirical_bayes";
    out.kernel = kernel_name(kernel);
    out.likelihood = "gaussian";
    out.scheme = "bfgs";
    out.noise_mode = options.noise_mode;
    out.parameter_names = layout.names;
    out.point_estimate = layout.constrained(best->x);
    out.fitted_kernel = model.kernel;
    out.fitted_likelihood = LikelihoodConfig{model.noise};
    out.log_marginal_likelihood = best->value;
    if (out.restarts_converged == 0) out.warnings.push_back("no restart met the gradient tolerance");
    finish_curves(out, points, points.size() - data.size(), mean, var, true, data);
    out.runtime_s = options.record_timing ? seconds_since(start) : 0.0;
    return out;
}

FitResult fit_full_bayes(const KernelConfig& kernel, const LikelihoodConfig& lik, const Dataset& data,
                         const FullBayesOptions& options) {
    const auto start = Clock::now();
    check_data(data);
    validate(kernel);
    validate(lik);
    options.chain.validate();

    LatentScheme scheme = options.scheme;
    if (scheme == LatentScheme::Auto) {
        if (std::holds_alternative<GaussianLik>(lik)) scheme = LatentScheme::Marginal;
        else if (std::holds_alternative<StudentTLik>(lik)) scheme = LatentScheme::ScaleMixture;
        else scheme = LatentScheme::WhitenedMetropolis;
    }
    if (scheme == LatentScheme::Marginal && !std::holds_alternative<GaussianLik>(lik)) {
        throw ValidationError("the marginal scheme needs a Gaussian likelihood");
    }
    if (scheme == LatentScheme::ScaleMixture && std::holds_alternative<HeavyTailLik>(lik)) {
        throw ValidationError("the scale-mixture scheme supports Gaussian and Student's t likelihoods only");
    }

    KernelConfig kernel0 = kernel;
    LikelihoodConfig lik0 = lik;
    Rng rng(options.chain.seed);
    if (options.warm_start && !options.fix_hyperparameters) {
        EmpiricalBayesOptions eb;
        eb.restarts = 1;
        eb.seed = derive_seed(options.chain.seed, 1);
        eb.noise_mode = options.noise_mode;
        eb.max_iterations = 200;
        eb.gradient_tolerance = 1e-4;
        eb.grid = {0.0, kDomainMax};
        eb.record_timing = false;
        try {
            const FitResult warm = fit_empirical_bayes(kernel, data, eb);
            kernel0 = *warm.fitted_kernel;
            if (options.noise_mode == NoiseMode::Learned) {
                lik0 = with_scale(lik0, likelihood_scale(*warm.fitted_likelihood));
            }
        } catch (const FitError&) {
            // fall back to the given starting values
        }
    }

    const Layout layout(kernel0, lik0, data, options.noise_mode);
    const auto priors = default_priors(kernel0, lik0, data, options.noise_mode);
    const auto points = evaluation_points(options.grid, data);
    SamplerContext ctx{layout, priors, data, options, points,
                       Eigen::Map<const Eigen::VectorXd>(data.y.data(), static_cast<Eigen::Index>(data.size())),
                       layout.initial()};

    FitResult out;
    out.method = "full_bayes";
    out.kernel = kernel_name(kernel);
    out.likelihood = likelihood_name(lik);
    out.scheme = to_string(scheme);
    out.noise_mode = options.noise_mode;
    out.parameter_names = layout.names;

    try {
        switch (scheme) {
            case LatentScheme::Marginal: run_marginal(ctx, rng, out); break;
            case LatentScheme::ScaleMixture: run_scale_mixture(ctx, rng, out); break;
            default: run_whitened(ctx, rng, out); break;
        }
    } catch (const NumericalError& e) {
        throw FitError(std::string("full Bayes: ") + e.what());
    }

    if (!out.samples.empty() && !out.samples[0].empty()) {
        Eigen::VectorXd u(layout.size());
        for (Eigen::Index i = 0; i < layout.size(); ++i) {
            u[i] = to_unconstrained(median(out.samples[i]), layout.transforms[i]);
        }
        out.fitted_kernel = layout.kernel(u);
        out.fitted_likelihood = layout.likelihood(u);
    }
    out.runtime_s = options.record_timing ? seconds_since(start) : 0.0;
    return out;
}

std::vector<Histogram> extract_histograms(const FitResult& result, int bins) {
    if (!result.is_full_bayes()) {
        throw UnsupportedOperation("histograms need a full-Bayes result; empirical Bayes has point estimates only");
    }
    if (bins < 1) throw ValidationError("bins must be >= 1");
    std::vector<Histogram> out;
    for (std::size_t p = 0; p < result.parameter_names.size(); ++p) {
        const auto& s = result.samples[p];
        Histogram h;
        h.parameter = result.parameter_names[p];
        if (s.empty()) {
            out.push_back(std::move(h));
            continue;
        }
        const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
        const double lo = *lo_it, hi = *hi_it;
        if (lo == hi) {
            h.edges = {lo, hi};
            h.counts = {static_cast<long>(s.size())};
        } else {
            h.edges.resize(static_cast<std::size_t>(bins) + 1);
            for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
            h.edges.back() = hi;
            h.counts.assign(static_cast<std::size_t>(bins), 0);
            for (double x : s) {
                auto b = static_cast<int>((x - lo) / (hi - lo) * bins);
                h.counts[std::clamp(b, 0, bins - 1)]++;
            }
        }
        out.push_back(std::move(h));
    }
    return out;
}

std::string histogram_csv(const std::vector<Histogram>& histograms) {
    std::ostringstream out;
    out << "parameter,bin_lo,bin_hi,count\n";
    for (const auto& h : histograms) {
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            out << h.parameter << ',' << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ','
                << h.counts[b] << '\n';
        }
    }
    return out.str();
}

nlohmann::json fit_result_json(const FitResult& result) {
    nlohmann::json j;
    j["method"] = result.method;
    j["kernel"] = result.kernel;
    j["likelihood"] = result.likelihood;
    j["scheme"] = result.scheme;
    j["noise_mode"] = to_string(result.noise_mode);
    j["grid_size"] = result.grid.psi_star.size();
    j["n_data"] = result.data_psi.size();

    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < result.parameter_names.size(); ++i) {
        nlohmann::json p;
        p["name"] = result.parameter_names[i];
        if (result.is_full_bayes()) {
            const auto& s = result.samples[i];
            p["mean"] = sample_mean(s);
            p["std"] = sample_std(s);
            p["median"] = quantile(s, 0.5);
            p["q05"] = quantile(s, 0.05);
            p["q95"] = quantile(s, 0.95);
        } else {
            p["estimate"] = result.point_estimate[i];
        }
        params.push_back(p);
    }
    j["parameters"] = params;
    if (result.fitted_kernel) j["fitted_kernel"] = *result.fitted_kernel;
    if (result.fitted_likelihood) j["fitted_likelihood"] = *result.fitted_likelihood;

    if (result.is_full_bayes()) {
        j["n_retained"] = result.samples.empty() ? 0 : result.samples[0].size();
        j["acceptance_rate"] = result.acceptance_rate;
    } else {
        j["log_marginal_likelihood"] = result.log_marginal_likelihood;
        j["restarts_converged"] = result.restarts_converged;
        j["restarts_failed"] = result.restarts_failed;
    }
    j["warnings"] = result.warnings;
    j["runtime_s"] = result.runtime_s;
    if (result.rmse) j["rmse"] = *result.rmse;
    return j;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of an empty array");
    return quantile(std::move(values), 0.5);
}

}  // namespace profgp
