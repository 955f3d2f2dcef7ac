// profgp: generate synthetic profiles, fit them, run and report the benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "profgp/bench.hpp"
#include "profgp/csv.hpp"
#include "profgp/errors.hpp"
#include "profgp/inference.hpp"
#include "profgp/profiles.hpp"
#include "profgp/version.hpp"

namespace fs = std::filesystem;
using namespace profgp;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

struct ChainFlags {
    MethodSettings settings;
    bool no_timing = false;

    void add(CLI::App& app) {
        app.add_option("--n-burn", settings.chain.n_burn, "MCMC burn-in steps")->capture_default_str();
        app.add_option("--n-samples", settings.chain.n_samples, "MCMC retained steps")->capture_default_str();
        app.add_option("--thin", settings.chain.thin, "thinning stride")->capture_default_str();
        app.add_option("--target-accept", settings.chain.target_accept, "adaptation target")->capture_default_str();
        app.add_option("--adapt-interval", settings.chain.adapt_interval, "steps between adaptations")
            ->capture_default_str();
        app.add_option("--restarts", settings.restarts, "empirical-Bayes restarts")->capture_default_str();
        app.add_option("--noise-mode", noise_mode, "learned or reported")->capture_default_str();
        app.add_flag("--no-timing", no_timing, "write zero runtimes so outputs are byte-reproducible");
    }

    MethodSettings resolve() {
        settings.noise_mode = noise_mode_from_string(noise_mode);
        settings.record_timing = !no_timing;
        settings.chain.validate();
        return settings;
    }

    std::string noise_mode = "learned";
};

void enable_config(CLI::App& app, std::string& path) {
    app.add_option("--config", path, "flat key = value file; command-line flags take precedence");
}

// CLI11 reads config files for the top-level app only, so subcommand files
// are applied here: every key must name an option of `app`, and options
// already given on the command line keep their values.
void apply_config(CLI::App& app, const std::string& path) {
    if (path.empty()) return;
    if (!fs::is_regular_file(path)) throw ValidationError("cannot read config file '" + path + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw ParseError("config file '" + path + "': " + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty()) throw ValidationError("config file '" + path + "': sections are not supported");
        if (item.name == "config") continue;
        CLI::Option* opt = app.get_option_no_throw(item.name);
        if (opt == nullptr) opt = app.get_option_no_throw("--" + item.name);
        if (opt == nullptr) throw ValidationError("config file '" + path + "': unknown key '" + item.name + "'");
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ValidationError("config file '" + path + "': " + item.name + ": " + e.what());
        }
    }
}

void require(bool present, const std::string& name) {
    if (!present) throw ValidationError(name + " is required");
}

/// All options of `app` with their effective values.
std::string effective_config(const CLI::App& app) { return app.config_to_str(true, false); }

// generate -------------------------------------------------------------------

struct GenerateCmd {
    ProfileSpec profile;
    NoiseSpec noise;
    std::string regime = "hmode";
    std::string output;

    void add(CLI::App& app) {
        app.add_option("--regime", regime, "lmode, hmode or itb")->capture_default_str();
        app.add_option("--f-o", profile.f_o)->capture_default_str();
        app.add_option("--f-edge", profile.f_edge)->capture_default_str();
        app.add_option("--alpha1", profile.alpha1)->capture_default_str();
        app.add_option("--alpha2", profile.alpha2)->capture_default_str();
        app.add_option("--f-ped", profile.f_ped)->capture_default_str();
        app.add_option("--w-ped", profile.w_ped)->capture_default_str();
        app.add_option("--psi-ped", profile.psi_ped)->capture_default_str();
        app.add_option("--n-itb", profile.n_itb)->capture_default_str();
        app.add_option("--w-itb", profile.w_itb)->capture_default_str();
        app.add_option("--psi-itb", profile.psi_itb)->capture_default_str();
        app.add_option("--sigma-frac", noise.sigma_frac)->capture_default_str();
        app.add_option("--shift-frac", noise.shift_frac)->capture_default_str();
        app.add_option("--n-outliers", noise.n_outliers)->capture_default_str();
        app.add_option("--outlier-scale", noise.outlier_scale)->capture_default_str();
        app.add_option("--seed", noise.seed)->capture_default_str();
        app.add_option("-o,--output", output, "dataset CSV path (required)");
    }

    void run(const CLI::App& app) {
        require(!output.empty(), "--output");
        profile.regime = regime_from_string(regime);
        const Dataset data = generate_dataset(profile, noise, make_grid());
        write_dataset_csv(output, data);
        nlohmann::json prov;
        prov["tool"] = "profgp generate";
        prov["version"] = kVersion;
        prov["profile"] = profile;
        prov["noise"] = noise;
        prov["n_points"] = data.size();
        prov["config"] = effective_config(app);
        write_text(output + ".provenance.json", prov.dump(2) + "\n");
        std::cout << "wrote " << output << " (" << data.size() << " points)\n";
    }
};

// fit ------------------------------------------------------------------------

struct FitCmd {
    std::string dataset;
    std::string method;
    std::string prefix;
    std::string scheme = "auto";
    std::uint64_t seed = 0;
    int grid_size = kDefaultGridSize;
    int bins = 30;
    ChainFlags chain;

    void add(CLI::App& app) {
        app.add_option("dataset", dataset, "CSV with columns psi,y,sigma[,truth,is_outlier] (required)")
            ->check(CLI::ExistingFile);
        app.add_option("--method", method, "eb-gibbs, eb-cp, fb-cp-gauss or fb-cp-t (required)");
        app.add_option("--seed", seed, "restart / chain seed")->capture_default_str();
        app.add_option("--grid-size", grid_size, "points of the display grid on [0, 1.1]")->capture_default_str();
        app.add_option("--bins", bins, "hyperparameter histogram bins")->capture_default_str();
        app.add_option("--scheme", scheme, "full-Bayes sampler: auto, marginal, scale_mixture, whitened")
            ->capture_default_str();
        app.add_option("-o,--output-prefix", prefix, "output prefix (default: <dataset stem>_<method>)");
        chain.add(app);
    }

    void run(const CLI::App& app) {
        require(!dataset.empty(), "dataset");
        require(!method.empty(), "--method");
        const Method m = method_from_string(method);
        const MethodSettings settings = chain.resolve();
        const Dataset data = read_dataset_csv(dataset);
        if (prefix.empty()) {
            const fs::path p(dataset);
            prefix = (p.parent_path() / p.stem()).string() + "_" + method_cli_name(m);
        }
        const std::vector<double> grid = prediction_grid(grid_size);

        FitResult fit;
        if (scheme == "auto") {
            fit = fit_method(m, data, settings, seed, grid);
        } else {
            if (m == Method::EB_Gibbs || m == Method::EB_ChangePoint) {
                throw ValidationError("--scheme applies to full-Bayes methods only");
            }
            FullBayesOptions fb;
            fb.chain = settings.chain;
            fb.chain.seed = seed;
            fb.noise_mode = settings.noise_mode;
            fb.scheme = latent_scheme_from_string(scheme);
            fb.grid = grid;
            fb.record_timing = settings.record_timing;
            const double scale = median(data.sigma_reported);
            const LikelihoodConfig lik = m == Method::FB_ChangePoint_Gaussian ? LikelihoodConfig{GaussianLik{scale}}
                                                                               : LikelihoodConfig{StudentTLik{scale, 2}};
            fit = fit_full_bayes(ChangePointConfig{}, lik, data, fb);
        }

        write_text(prefix + "_grid.csv", predictive_csv(fit.grid));
        nlohmann::json j = fit_result_json(fit);
        j["method_name"] = method_name(m);
        j["dataset"] = dataset;
        j["seed"] = seed;
        j["version"] = kVersion;
        j["config"] = effective_config(app);
        write_text(prefix + ".json", j.dump(2) + "\n");
        if (fit.is_full_bayes()) write_text(prefix + "_hist.csv", histogram_csv(extract_histograms(fit, bins)));

        std::cout << "wrote " << prefix << "_grid.csv, " << prefix << ".json";
        if (fit.is_full_bayes()) std::cout << ", " << prefix << "_hist.csv";
        std::cout << '\n';
        if (fit.rmse) std::cout << "rmse " << format_double(*fit.rmse) << '\n';
        for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
    }
};

// sweep ----------------------------------------------------------------------

struct SweepCmd {
    std::string preset = "desk";
    std::string db = "sweep.csv";
    std::vector<std::string> methods;
    int parallelism = 1;
    long limit = 0;
    bool dry_run = false;
    bool quiet = false;
    ChainFlags chain;

    void add(CLI::App& app) {
        app.add_option("--preset", preset, "paper (5280 cases) or desk (120 cases)")->capture_default_str();
        app.add_option("--db", db, "record database (CSV, appended)")->capture_default_str();
        app.add_option("--methods", methods, "subset of methods (default: all four)");
        app.add_option("-j,--parallelism", parallelism, "worker threads")->capture_default_str();
        app.add_option("--limit", limit, "only the first N cases of the preset")->capture_default_str();
        app.add_flag("--dry-run", dry_run, "print the case enumeration without fitting");
        app.add_flag("-q,--quiet", quiet, "no progress output");
        chain.add(app);
    }

    int run(const CLI::App& app) {
        std::vector<SweepCase> cases = preset_cases(preset);
        if (limit < 0) throw ValidationError("--limit must be >= 0");
        if (limit > 0 && static_cast<std::size_t>(limit) < cases.size()) cases.resize(static_cast<std::size_t>(limit));
        std::vector<Method> ms;
        for (const auto& name : methods) ms.push_back(method_from_string(name));
        if (ms.empty()) ms = all_methods();

        if (dry_run) {
            std::map<Regime, std::size_t> per_regime;
            for (const auto& c : cases) per_regime[c.profile.regime]++;
            std::cout << "preset " << preset << ": " << cases.size() << " cases\n";
            for (const auto& [r, n] : per_regime) std::cout << "  " << to_string(r) << ' ' << n << '\n';
            std::cout << "methods " << ms.size() << ", records " << cases.size() * ms.size() << '\n';
            return 0;
        }

        SweepOptions opt;
        opt.db_path = db;
        opt.settings = chain.resolve();
        opt.parallelism = parallelism;
        opt.preset = preset;
        opt.config = effective_config(app);
        if (!quiet) {
            opt.progress = [](std::size_t done, std::size_t total) {
                std::cerr << "\r" << done << "/" << total << " cases" << (done == total ? "\n" : "") << std::flush;
            };
        }
        const SweepStats stats = run_sweep(cases, ms, opt);
        std::cout << "cases " << stats.total_cases << ", written " << stats.written_records << ", skipped "
                  << stats.skipped_records << ", failed " << stats.failed_records << '\n';
        return 0;
    }
};

// report ---------------------------------------------------------------------

struct ReportCmd {
    std::string db;
    std::vector<std::string> group;
    int worst = 0;
    int bins = 20;
    std::string out_dir = ".";

    void add(CLI::App& app) {
        app.add_option("--db", db, "record database (required)");
        app.add_option("--group", group, "grouping keys, e.g. n-outliers regime");
        app.add_option("--worst", worst, "worst fits per method to refit side by side")->capture_default_str();
        app.add_option("--bins", bins, "RMSE histogram bins")->capture_default_str();
        app.add_option("-o,--out-dir", out_dir, "output directory")->capture_default_str();
    }

    void run() {
        require(!db.empty(), "--db");
        if (!fs::exists(db)) throw ParseError("cannot read database '" + db + "'");
        const auto records = load_records(db);
        if (records.empty()) throw ParseError("database '" + db + "' has no records");
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);

        write_text((dir / "summary.csv").string(), summary_csv(summarize(records, group)));
        write_text((dir / "rmse_histograms.csv").string(), rmse_histogram_csv(rmse_histograms(records, bins)));
        std::cout << "wrote " << (dir / "summary.csv").string() << ", " << (dir / "rmse_histograms.csv").string()
                  << '\n';
        if (worst <= 0) return;

        MethodSettings settings;
        if (fs::exists(meta_path(db))) {
            std::ifstream in(meta_path(db));
            const auto meta = nlohmann::json::parse(in);
            if (meta.contains("settings")) settings = meta["settings"].get<MethodSettings>();
        }
        std::ostringstream index;
        index << "method,rank,case_id,seed,rmse,file\n";
        int rank = 0;
        Method last = Method::EB_Gibbs;
        bool first = true;
        for (const auto& w : worst_fits(records, worst)) {
            rank = (first || w.method != last) ? 1 : rank + 1;
            first = false;
            last = w.method;
            const std::string name = "worst_" + method_cli_name(w.method) + "_" + std::to_string(rank) + ".csv";
            write_text((dir / name).string(), worst_fit_bundle(w, settings));
            index << method_name(w.method) << ',' << rank << ',' << w.case_id << ',' << w.seed << ','
                  << format_double(w.rmse) << ',' << name << '\n';
            std::cout << "wrote " << (dir / name).string() << '\n';
        }
        write_text((dir / "worst_fits.csv").string(), index.str());
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process fitting of tokamak profiles"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GenerateCmd generate;
    FitCmd fit;
    SweepCmd sweep;
    ReportCmd report;

    std::string config_path;
    auto* gen_app = app.add_subcommand("generate", "write a synthetic profile dataset");
    generate.add(*gen_app);
    enable_config(*gen_app, config_path);
    auto* fit_app = app.add_subcommand("fit", "fit a dataset with one method");
    fit.add(*fit_app);
    enable_config(*fit_app, config_path);
    auto* sweep_app = app.add_subcommand("sweep", "run the four-method benchmark");
    sweep.add(*sweep_app);
    enable_config(*sweep_app, config_path);
    auto* report_app = app.add_subcommand("report", "summarize a record database");
    report.add(*report_app);
    enable_config(*report_app, config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (auto* sub : {gen_app, fit_app, sweep_app, report_app}) {
            if (sub->parsed()) apply_config(*sub, config_path);
        }
        if (gen_app->parsed()) generate.run(*gen_app);
        else if (fit_app->parsed()) fit.run(*fit_app);
        else if (sweep_app->parsed()) return sweep.run(*sweep_app);
        else if (report_app->parsed()) report.run();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
