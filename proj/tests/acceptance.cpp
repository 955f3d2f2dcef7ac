// Acceptance run: one PASS/FAIL line per criterion (1-11).
//
// The desk sweep behind criteria 6-9 resumes from <work>/desk.csv, so a
// second run only refits what is missing. --fresh starts it over.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "profgp/bench.hpp"
#include "profgp/csv.hpp"
#include "profgp/gp.hpp"
#include "profgp/inference.hpp"
#include "profgp/likelihoods.hpp"
#include "profgp/mcmc.hpp"
#include "profgp/rng.hpp"
#include "test_util.hpp"

using namespace profgp;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what) {
    if (!pass) ++g_failures;
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << what << std::endl;
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args, const fs::path& cwd, const fs::path& log) {
    const std::string cmd =
        "cd '" + cwd.string() + "' && '" PROFGP_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
    return std::system(cmd.c_str());
}

// 1 ---------------------------------------------------------------------------

void gradient_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240601);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        GPModel model;
        model.kernel = testutil::random_kernel(rng, t);
        model.noise.sigma_n = testutil::log_uniform(rng, 0.05, 1.0);
        const auto psi = testutil::random_points(rng, 30);
        std::vector<double> y(psi.size());
        for (auto& v : y) v = rng.normal();

        const MarginalLikelihood ml = log_marginal_likelihood(model, psi, y, true);
        const Eigen::VectorXd u = to_unconstrained(model.kernel);
        for (Eigen::Index p = 0; p < ml.gradient.size(); ++p) {
            auto at = [&](double delta) {
                GPModel m = model;
                if (p < u.size()) {
                    Eigen::VectorXd v = u;
                    v[p] += delta;
                    m.kernel = with_unconstrained(model.kernel, v);
                } else {
                    m.noise.sigma_n = std::exp(std::log(model.noise.sigma_n) + delta);
                }
                return log_marginal_likelihood(m, psi, y, false).value;
            };
            const double base = p < u.size() ? u[p] : std::log(model.noise.sigma_n);
            // fourth-order stencil; the plain central difference leaves O(h^2) bias near 1e-5
            const double h = 1e-4 * std::max(1.0, std::abs(base));
            const double fd = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
            const double denom = std::max({std::abs(fd), std::abs(ml.gradient[p]), 1e-3});
            worst = std::max(worst, std::abs(fd - ml.gradient[p]) / denom);
        }
    }
    const double secs = seconds_since(t0);
    report(1, worst < 1e-5 && secs < 60,
           "gradient vs central differences, 20 configs: max rel err " + fmt(worst) + " (< 1e-5), " + fmt(secs, 3) +
               " s");
}

// 2 ---------------------------------------------------------------------------

void psd_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(777);
    double worst = 0.0;
    int failures = 0;
    for (int kind = 0; kind < 4; ++kind) {
        for (int t = 0; t < 100; ++t) {
            const KernelConfig k = testutil::random_kernel(rng, kind);
            const auto xs = testutil::random_points(rng, 200);
            const Eigen::MatrixXd g = gram(k, xs);
            try {
                const JitteredCholesky chol = jittered_cholesky(g);
                const double rel = chol.jitter / g.diagonal().mean();
                worst = std::max(worst, rel);
                if (rel > 1e-6) ++failures;
            } catch (const std::exception&) {
                ++failures;
            }
        }
    }
    const double secs = seconds_since(t0);
    report(2, failures == 0 && secs < 60,
           "4 kernels x 100 random 200-point sets: max jitter " + fmt(worst) + " x mean diagonal (<= 1e-6), " +
               std::to_string(failures) + " failures, " + fmt(secs, 3) + " s");
}

// 3 ---------------------------------------------------------------------------

void mcmc_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const KernelConfig kernel = Matern52{{1.0, 0.3}};
    const double sigma = 0.1;
    Rng rng(31337);
    Dataset d;
    d.psi = testutil::random_points(rng, 20);
    const JitteredCholesky chol = jittered_cholesky(gram(kernel, d.psi));
    Eigen::VectorXd z(20);
    for (auto& x : z) x = rng.normal();
    const Eigen::VectorXd f = chol.multiply_lower(z);
    for (int i = 0; i < 20; ++i) {
        d.y.push_back(f[i] + sigma * rng.normal());
        d.sigma_reported.push_back(sigma);
    }

    FullBayesOptions opt;
    opt.chain.seed = 3;
    opt.scheme = LatentScheme::WhitenedMetropolis;
    opt.fix_hyperparameters = true;
    opt.keep_curves = true;
    opt.grid = prediction_grid();
    const FitResult r = fit_full_bayes(kernel, GaussianLik{sigma}, d, opt);

    GPModel m;
    m.kernel = kernel;
    m.noise.sigma_n = sigma;
    const PredictiveGrid exact = posterior_predictive(m, d, opt.grid);
    double worst_z = 0.0;
    int outside = 0;
    for (std::size_t j = 0; j < opt.grid.size(); ++j) {
        std::vector<double> chain;
        for (const auto& c : r.curve_samples) chain.push_back(c[j]);
        const double z_score = std::abs(r.grid.mean[j] - exact.mean[j]) / batch_means_standard_error(chain);
        worst_z = std::max(worst_z, z_score);
        if (z_score > 3.0) ++outside;
    }
    const double secs = seconds_since(t0);
    report(3, outside == 0 && secs < 120,
           "whitened MCMC vs exact posterior mean, 20 points, " + std::to_string(opt.grid.size()) +
               " grid points: max |error|/MCSE " + fmt(worst_z, 3) + " (<= 3), acceptance " +
               fmt(r.acceptance_rate, 3) + ", " + fmt(secs, 3) + " s");
}

// 4 ---------------------------------------------------------------------------

void t_gaussian_limit() {
    const auto t0 = std::chrono::steady_clock::now();
    const LikelihoodConfig t = StudentTLik{1.0, 1e6};
    const LikelihoodConfig g = GaussianLik{1.0};
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = -5.0 + 10.0 * i / 10000;
        worst = std::max(worst, std::abs(log_density(t, x) - log_density(g, x)));
    }
    const double secs = seconds_since(t0);
    report(4, worst < 1e-3 && secs < 1,
           "nu = 1e6 log-density vs Gaussian on [-5, 5]: max diff " + fmt(worst) + " (< 1e-3)");
}

// 5 ---------------------------------------------------------------------------

void sweep_structure(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path log = work / "dry_run.txt";
    const int rc = run_cli("sweep --preset paper --dry-run", work, log);
    const double secs = seconds_since(t0);
    std::map<std::string, long> counts;
    long total = -1;
    std::istringstream in(slurp(log));
    for (std::string line; std::getline(in, line);) {
        std::istringstream ls(line);
        std::string a, b;
        ls >> a >> b;
        if (a == "preset") {
            std::istringstream(line.substr(line.find(':') + 1)) >> total;
        } else if (a == "Lmode" || a == "Hmode" || a == "HmodeITB") {
            counts[a] = std::stol(b);
        }
    }
    const bool ok = rc == 0 && total == 5280 && counts["Lmode"] == 240 && counts["Hmode"] == 2880 &&
                    counts["HmodeITB"] == 2160 && secs < 1;
    report(5, ok,
           "paper preset dry run: " + std::to_string(total) + " cases = " + std::to_string(counts["Lmode"]) +
               " L-mode + " + std::to_string(counts["Hmode"]) + " H-mode + " + std::to_string(counts["HmodeITB"]) +
               " ITB, " + fmt(secs, 3) + " s");
}

// 6-9 -------------------------------------------------------------------------

double mean_of(const std::vector<double>& v) {
    return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

void desk_criteria(const fs::path& work, int parallelism) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepOptions opt;
    opt.db_path = (work / "desk.csv").string();
    opt.parallelism = parallelism;
    opt.preset = "desk";
    opt.progress = [t0](std::size_t done, std::size_t total) {
        if (done % 10 == 0 || done == total) {
            std::cerr << "desk sweep " << done << "/" << total << " cases, " << fmt(seconds_since(t0), 4) << " s\n";
        }
    };
    const SweepStats stats = run_sweep(desk_preset(), all_methods(), opt);
    const double secs = seconds_since(t0);
    const auto records = load_records(opt.db_path);

    std::map<Method, std::vector<double>> all;
    std::map<Method, std::map<int, std::vector<double>>> by_ol;
    std::map<Regime, std::vector<double>> eb_by_regime;
    std::map<Method, std::map<Regime, std::vector<double>>> by_regime;
    for (const auto& r : records) {
        if (!r.rmse) continue;
        all[r.method].push_back(*r.rmse);
        by_ol[r.method][r.n_outliers].push_back(*r.rmse);
        by_regime[r.method][r.regime].push_back(*r.rmse);
        if (r.method == Method::EB_Gibbs || r.method == Method::EB_ChangePoint) {
            eb_by_regime[r.regime].push_back(*r.rmse);
        }
    }
    std::cout << "desk sweep: " << records.size() << " records (" << stats.written_records << " fitted now, "
              << stats.skipped_records << " resumed, " << stats.failed_records << " failed), " << fmt(secs, 4)
              << " s at parallelism " << parallelism << "\n";
    for (Method m : all_methods()) {
        std::cout << "  " << method_name(m) << ": mean rmse " << fmt(mean_of(all[m])) << " over " << all[m].size();
        for (const auto& [ol, v] : by_ol[m]) std::cout << ", N_OL=" << ol << " " << fmt(mean_of(v));
        for (const auto& [rg, v] : by_regime[m]) std::cout << ", " << to_string(rg) << " " << fmt(mean_of(v));
        std::cout << "\n";
    }

    const double t_mean = mean_of(all[Method::FB_ChangePoint_StudentT]);
    const double cp_mean = mean_of(all[Method::EB_ChangePoint]);
    report(6, t_mean <= 0.5 * cp_mean,
           "mean rmse FB_ChangePoint_StudentT " + fmt(t_mean) + " vs EB_ChangePoint " + fmt(cp_mean) + ", ratio " +
               fmt(t_mean / cp_mean, 3) + " (<= 0.5), sweep " + fmt(secs, 4) + " s");

    auto ol_slope = [&](Method m) {
        std::vector<double> x, y;
        for (const auto& [ol, v] : by_ol[m]) {
            x.push_back(ol);
            y.push_back(mean_of(v));
        }
        return slope(x, y);
    };
    const double st = ol_slope(Method::FB_ChangePoint_StudentT);
    const double sg = ol_slope(Method::FB_ChangePoint_Gaussian);
    report(7, st < 0.5 * sg,
           "rmse slope vs N_OL: Student-t " + fmt(st) + ", Gaussian " + fmt(sg) + " (t < 0.5 x Gaussian)");

    const double t10 = mean_of(by_ol[Method::FB_ChangePoint_StudentT][10]);
    const double g10 = mean_of(by_ol[Method::FB_ChangePoint_Gaussian][10]);
    report(8, t10 <= 0.75 * g10,
           "N_OL=10 mean rmse Student-t " + fmt(t10) + " vs Gaussian " + fmt(g10) + ", ratio " + fmt(t10 / g10, 3) +
               " (<= 0.75)");

    const double h = mean_of(eb_by_regime[Regime::Hmode]);
    const double l = mean_of(eb_by_regime[Regime::Lmode]);
    const double gibbs_ratio =
        mean_of(by_regime[Method::EB_Gibbs][Regime::Hmode]) / mean_of(by_regime[Method::EB_Gibbs][Regime::Lmode]);
    const double cp_ratio = mean_of(by_regime[Method::EB_ChangePoint][Regime::Hmode]) /
                            mean_of(by_regime[Method::EB_ChangePoint][Regime::Lmode]);
    report(9, h > l && h / l <= 1.5,
           "empirical Bayes (both kernels) H-mode " + fmt(h) + " vs L-mode " + fmt(l) + ", ratio " + fmt(h / l, 3) +
               " (in (1.0, 1.5]); EB_Gibbs " + fmt(gibbs_ratio, 3) + ", EB_ChangePoint " + fmt(cp_ratio, 3));
}

// 10 --------------------------------------------------------------------------

void nu_adaptation() {
    const auto t0 = std::chrono::steady_clock::now();
    MethodSettings settings;
    settings.record_timing = false;
    std::vector<double> with, without;
    int pairs_ok = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        double nu[2];
        for (int k = 0; k < 2; ++k) {
            ProfileSpec spec;
            spec.regime = Regime::Hmode;
            NoiseSpec noise;
            noise.sigma_frac = 0.1;
            noise.n_outliers = k == 0 ? 10 : 0;
            noise.seed = seed;
            const Dataset d = generate_dataset(spec, noise, make_grid());
            const FitResult r =
                fit_method(Method::FB_ChangePoint_StudentT, d, settings, derive_seed(seed, 99), {0.0, kDomainMax});
            nu[k] = median(*r.parameter_samples("nu"));
        }
        with.push_back(nu[0]);
        without.push_back(nu[1]);
        if (nu[0] < nu[1]) ++pairs_ok;
    }
    const double mw = median(with), mo = median(without);
    report(10, mw < mo,
           "median posterior nu over 10 matched H-mode pairs: N_OL=10 " + fmt(mw) + " vs N_OL=0 " + fmt(mo) + "; " +
               std::to_string(pairs_ok) + "/10 pairs individually smaller, " + fmt(seconds_since(t0), 3) + " s");
}

// 11 --------------------------------------------------------------------------

bool same_tree(const fs::path& a, const fs::path& b, std::string& diff) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().filename() != "log.txt") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
        if (!fs::exists(b / n) || slurp(a / n) != slurp(b / n)) {
            diff = n;
            return false;
        }
    }
    return !names.empty();
}

nlohmann::json without_runtime(nlohmann::json j) {
    j.erase("runtime_s");
    j.erase("updated_at");
    return j;
}

void determinism(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path root = work / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    run_cli("generate --regime hmode --seed 11 --n-outliers 5 -o data.csv", root, root / "gen.txt");

    std::vector<std::string> problems;
    const std::vector<std::string> fits = {"eb-gibbs", "eb-cp", "fb-cp-gauss", "fb-cp-t"};
    for (const std::string run : {"a", "b"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        for (const auto& m : fits) {
            if (run_cli("fit ../data.csv --method " + m + " --seed 5 --no-timing -o " + m, dir, dir / "log.txt") != 0) {
                problems.push_back("fit " + m + " exited non-zero");
            }
        }
        if (run_cli("sweep --preset desk --limit 2 --db sweep.csv --no-timing -q", dir, dir / "log.txt") != 0) {
            problems.push_back("sweep exited non-zero");
        }
    }
    std::string diff;
    if (!same_tree(root / "a", root / "b", diff)) problems.push_back(diff + " differs");

    // with timing on, only the runtime fields may change
    for (const std::string run : {"c", "d"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        run_cli("fit ../data.csv --method eb-cp --seed 5 -o timed", dir, dir / "log.txt");
    }
    const bool grid_same = slurp(root / "c" / "timed_grid.csv") == slurp(root / "d" / "timed_grid.csv");
    const bool json_same = without_runtime(nlohmann::json::parse(slurp(root / "c" / "timed.json"))) ==
                           without_runtime(nlohmann::json::parse(slurp(root / "d" / "timed.json")));
    if (!grid_same || !json_same) problems.push_back("timed fit differs beyond runtime_s");

    std::string detail = problems.empty() ? "all outputs identical" : problems.front();
    report(11, problems.empty(),
           "4 fits + desk sweep (--limit 2) repeated with --no-timing, timed fit masked: " + detail + ", " +
               fmt(seconds_since(t0), 3) + " s");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"profgp acceptance criteria"};
    std::string work = "acceptance_work";
    bool fresh = false;
    bool strict = false;
    int parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<int> only;
    app.add_option("--work", work, "scratch directory")->capture_default_str();
    app.add_flag("--fresh", fresh, "discard the resumable desk sweep database");
    app.add_flag("--strict", strict, "exit 1 when any criterion fails");
    app.add_option("-j,--parallelism", parallelism, "desk sweep workers")->capture_default_str();
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const fs::path dir = fs::absolute(work);
    fs::create_directories(dir);
    if (fresh) {
        fs::remove(dir / "desk.csv");
        fs::remove(dir / "desk.csv.meta.json");
    }
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

    try {
        if (wanted(1)) gradient_oracle();
        if (wanted(2)) psd_suite();
        if (wanted(3)) mcmc_oracle();
        if (wanted(4)) t_gaussian_limit();
        if (wanted(5)) sweep_structure(dir);
        if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) desk_criteria(dir, parallelism);
        if (wanted(10)) nu_adaptation();
        if (wanted(11)) determinism(dir);
    } catch (const std::exception& e) {
        std::cout << "acceptance run aborted: " << e.what() << std::endl;
        return 2;
    }
    std::cout << g_failures << " criteria failed" << std::endl;
    return strict && g_failures > 0 ? 1 : 0;
}
