#include "profgp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "profgp/csv.hpp"
#include "profgp/errors.hpp"
#include "profgp/rng.hpp"
#include "profgp/version.hpp"

namespace profgp {

namespace {

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string flags_from(const FitResult& fit) {
    std::set<std::string> flags;
    for (const auto& w : fit.warnings) {
        if (w.find("acceptance") != std::string::npos) flags.insert("acceptance_out_of_range");
        else if (w.find("gradient tolerance") != std::string::npos) flags.insert("not_converged");
        else flags.insert("warning");
    }
    if (fit.restarts_failed > 0) flags.insert("restart_failures");
    std::string out;
    for (const auto& f : flags) out += (out.empty() ? "" : ";") + f;
    return out;
}

const std::unordered_map<std::uint64_t, std::size_t>& case_index_by_seed() {
    static const auto map = [] {
        std::unordered_map<std::uint64_t, std::size_t> m;
        for (const auto& c : sweep_space()) m.emplace(c.noise.seed, c.index);
        return m;
    }();
    return map;
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "sigma" || key == "sigma_n") return "sigma_frac";
    if (key == "n_ol" || key == "outliers") return "n_outliers";
    if (key == "f_edge" || key == "edge") return "n_edge";
    return key;
}

std::string group_value(const SweepRecord& r, const std::string& key) {
    if (key == "regime") return to_string(r.regime);
    if (key == "sigma_frac") return format_double(r.sigma_frac);
    if (key == "shift_frac") return format_double(r.shift_frac);
    if (key == "n_outliers") return std::to_string(r.n_outliers);
    if (key == "outlier_scale") return format_double(r.outlier_scale);
    if (key == "n_edge") return optional_field(r.n_edge);
    if (key == "w_ped") return optional_field(r.w_ped);
    if (key == "w_itb") return optional_field(r.w_itb);
    if (key == "n_itb") return optional_field(r.n_itb);
    throw ValidationError("unknown group key '" + key + "'");
}

// numeric fields compare numerically, everything else lexicographically
bool value_less(const std::string& a, const std::string& b) {
    double x = 0, y = 0;
    bool nx = true, ny = true;
    try {
        x = parse_double(a);
    } catch (const std::exception&) {
        nx = false;
    }
    try {
        y = parse_double(b);
    } catch (const std::exception&) {
        ny = false;
    }
    if (nx && ny) return x < y;
    if (nx != ny) return nx;  // blanks and names after numbers
    return a < b;
}

struct GroupLess {
    bool operator()(const std::vector<std::string>& a, const std::vector<std::string>& b) const {
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
            if (value_less(a[i], b[i])) return true;
            if (value_less(b[i], a[i])) return false;
        }
        return a.size() < b.size();
    }
};

void mean_std(std::vector<double> v, double& mean, double& sd) {
    std::sort(v.begin(), v.end());  // order-independent summation
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

std::vector<Method> all_methods() {
    return {Method::EB_Gibbs, Method::EB_ChangePoint, Method::FB_ChangePoint_Gaussian,
            Method::FB_ChangePoint_StudentT};
}

std::string method_name(Method m) {
    switch (m) {
        case Method::EB_Gibbs: return "EB_Gibbs";
        case Method::EB_ChangePoint: return "EB_ChangePoint";
        case Method::FB_ChangePoint_Gaussian: return "FB_ChangePoint_Gaussian";
        case Method::FB_ChangePoint_StudentT: return "FB_ChangePoint_StudentT";
    }
    return "";
}

std::string method_cli_name(Method m) {
    switch (m) {
        case Method::EB_Gibbs: return "eb-gibbs";
        case Method::EB_ChangePoint: return "eb-cp";
        case Method::FB_ChangePoint_Gaussian: return "fb-cp-gauss";
        case Method::FB_ChangePoint_StudentT: return "fb-cp-t";
    }
    return "";
}

Method method_from_string(const std::string& name) {
    for (Method m : all_methods()) {
        if (name == method_name(m) || name == method_cli_name(m)) return m;
    }
    throw ValidationError("unknown method '" + name + "' (expected eb-gibbs, eb-cp, fb-cp-gauss or fb-cp-t)");
}

void to_json(nlohmann::json& j, const MethodSettings& s) {
    j = nlohmann::json{{"n_burn", s.chain.n_burn},
                       {"n_samples", s.chain.n_samples},
                       {"thin", s.chain.thin},
                       {"target_accept", s.chain.target_accept},
                       {"adapt_interval", s.chain.adapt_interval},
                       {"restarts", s.restarts},
                       {"noise_mode", to_string(s.noise_mode)},
                       {"record_timing", s.record_timing}};
}

void from_json(const nlohmann::json& j, MethodSettings& s) {
    s = MethodSettings{};
    s.chain.n_burn = j.value("n_burn", s.chain.n_burn);
    s.chain.n_samples = j.value("n_samples", s.chain.n_samples);
    s.chain.thin = j.value("thin", s.chain.thin);
    s.chain.target_accept = j.value("target_accept", s.chain.target_accept);
    s.chain.adapt_interval = j.value("adapt_interval", s.chain.adapt_interval);
    s.restarts = j.value("restarts", s.restarts);
    s.noise_mode = noise_mode_from_string(j.value("noise_mode", std::string("learned")));
    s.record_timing = j.value("record_timing", s.record_timing);
}

std::uint64_t method_seed(std::uint64_t case_seed, Method method) {
    return derive_seed(case_seed, static_cast<std::uint64_t>(method) + 1);
}

FitResult fit_method(Method method, const Dataset& data, const MethodSettings& settings, std::uint64_t seed,
                     const std::vector<double>& grid) {
    switch (method) {
        case Method::EB_Gibbs:
        case Method::EB_ChangePoint: {
            EmpiricalBayesOptions eb;
            eb.restarts = settings.restarts;
            eb.seed = seed;
            eb.noise_mode = settings.noise_mode;
            eb.grid = grid;
            eb.record_timing = settings.record_timing;
            const KernelConfig kernel =
                method == Method::EB_Gibbs ? KernelConfig{GibbsTanhParams{}} : KernelConfig{ChangePointConfig{}};
            return fit_empirical_bayes(kernel, data, eb);
        }
        case Method::FB_ChangePoint_Gaussian:
        case Method::FB_ChangePoint_StudentT: {
            FullBayesOptions fb;
            fb.chain = settings.chain;
            fb.chain.seed = seed;
            fb.noise_mode = settings.noise_mode;
            fb.grid = grid;
            fb.record_timing = settings.record_timing;
            const double scale = std::max(median(data.sigma_reported), 1e-12);
            const LikelihoodConfig lik = method == Method::FB_ChangePoint_Gaussian
                                             ? LikelihoodConfig{GaussianLik{scale}}
                                             : LikelihoodConfig{StudentTLik{scale, 2.0}};
            return fit_full_bayes(ChangePointConfig{}, lik, data, fb);
        }
    }
    throw ValidationError("unknown method");
}

double rmse(std::span<const double> fit, std::span<const double> truth) {
    if (fit.empty()) throw ValidationError("rmse of empty arrays");
    if (fit.size() != truth.size()) throw ValidationError("rmse: fit and truth lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < fit.size(); ++i) s += (fit[i] - truth[i]) * (fit[i] - truth[i]);
    return std::sqrt(s / static_cast<double>(fit.size()));
}

std::vector<SweepCase> desk_preset() {
    static constexpr double kSigma[] = {0.1, 0.15, 0.2, 0.25, 0.33};
    static constexpr int kOutliers[] = {0, 3, 5, 10};
    static constexpr double kShift[] = {0.0, 0.02, 0.05, 0.10};
    static constexpr double kOutlierScale[] = {2.0, 3.0, 4.0};
    static const Regime kRegimes[] = {Regime::Lmode, Regime::Hmode, Regime::HmodeITB};

    const auto all = sweep_space();
    std::vector<SweepCase> out;
    std::size_t m = 0;
    for (Regime regime : kRegimes) {
        std::vector<ProfileSpec> shapes;
        for (const auto& c : all) {
            if (c.profile.regime == regime && std::find(shapes.begin(), shapes.end(), c.profile) == shapes.end()) {
                shapes.push_back(c.profile);
            }
        }
        for (double sigma : kSigma) {
            for (int n_ol : kOutliers) {
                for (int rep = 0; rep < 2; ++rep, ++m) {
                    const ProfileSpec& shape = shapes[(m * 5 + rep) % shapes.size()];
                    const double shift = kShift[m % 4];
                    const double scale = kOutlierScale[(m / 4) % 3];
                    const auto it = std::find_if(all.begin(), all.end(), [&](const SweepCase& c) {
                        return c.profile == shape && c.noise.sigma_frac == sigma && c.noise.n_outliers == n_ol &&
                               c.noise.shift_frac == shift && c.noise.outlier_scale == scale;
                    });
                    if (it == all.end()) throw ValidationError("desk preset case missing from the sweep space");
                    out.push_back(*it);
                }
            }
        }
    }
    return out;
}

std::vector<SweepCase> preset_cases(const std::string& name) {
    if (name == "paper") return sweep_space();
    if (name == "desk") return desk_preset();
    throw ValidationError("unknown preset '" + name + "' (expected paper or desk)");
}

SweepRecord make_record(Method method, const SweepCase& c) {
    SweepRecord r;
    r.method = method;
    r.regime = c.profile.regime;
    r.sigma_frac = c.noise.sigma_frac;
    r.shift_frac = c.noise.shift_frac;
    r.n_outliers = c.noise.n_outliers;
    r.outlier_scale = c.noise.outlier_scale;
    if (c.profile.regime != Regime::Lmode) {
        r.n_edge = c.profile.f_edge;
        r.w_ped = c.profile.w_ped;
    }
    if (c.profile.regime == Regime::HmodeITB) {
        r.w_itb = c.profile.w_itb;
        r.n_itb = c.profile.n_itb;
    }
    r.seed = c.noise.seed;
    return r;
}

std::string record_line(const SweepRecord& r) {
    std::ostringstream out;
    out << method_name(r.method) << ',' << to_string(r.regime) << ',' << format_double(r.sigma_frac) << ','
        << format_double(r.shift_frac) << ',' << r.n_outliers << ',' << format_double(r.outlier_scale) << ','
        << optional_field(r.n_edge) << ',' << optional_field(r.w_ped) << ',' << optional_field(r.w_itb) << ','
        << optional_field(r.n_itb) << ',' << r.seed << ',' << optional_field(r.rmse) << ','
        << format_double(r.runtime_s) << ',' << r.flags;
    return out.str();
}

SweepRecord parse_record(const std::vector<std::string>& f) {
    if (f.size() != 14) throw ParseError("record has " + std::to_string(f.size()) + " fields, expected 14");
    SweepRecord r;
    r.method = method_from_string(f[0]);
    r.regime = regime_from_string(f[1]);
    r.sigma_frac = parse_double(f[2]);
    r.shift_frac = parse_double(f[3]);
    r.n_outliers = static_cast<int>(parse_int(f[4]));
    r.outlier_scale = parse_double(f[5]);
    r.n_edge = parse_optional(f[6]);
    r.w_ped = parse_optional(f[7]);
    r.w_itb = parse_optional(f[8]);
    r.n_itb = parse_optional(f[9]);
    try {
        r.seed = std::stoull(f[10]);
    } catch (const std::exception&) {
        throw ParseError("bad seed '" + f[10] + "'");
    }
    r.rmse = parse_optional(f[11]);
    r.runtime_s = parse_double(f[12]);
    r.flags = f[13];
    return r;
}

namespace {

// Reads the complete lines of a database; returns the byte offset just past
// the last newline so a partial trailing line can be truncated away.
std::vector<std::string> read_db_lines(const std::string& path, std::uintmax_t& complete_bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open database '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto last_nl = text.rfind('\n');
    complete_bytes = last_nl == std::string::npos ? 0 : last_nl + 1;
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < complete_bytes) {
        const auto nl = text.find('\n', pos);
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::vector<SweepRecord> parse_db(const std::vector<std::string>& lines, const std::string& path) {
    if (lines.empty()) throw ParseError("database '" + path + "' has no header");
    if (lines[0] != kRecordHeader) throw ParseError("database '" + path + "' has an unexpected header");
    std::vector<SweepRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            out.push_back(parse_record(split_csv_line(lines[i])));
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

void write_meta(const std::string& db_path, const std::vector<SweepCase>& cases, const std::vector<Method>& methods,
                const SweepOptions& options, const SweepStats* stats) {
    nlohmann::json meta;
    meta["code_version"] = kVersion;
    meta["preset"] = options.preset;
    meta["n_cases"] = cases.size();
    std::vector<std::string> names;
    for (Method m : methods) names.push_back(method_name(m));
    meta["methods"] = names;
    meta["settings"] = options.settings;
    meta["parallelism"] = options.parallelism;
    meta["rmse_points"] = "data";
    if (!options.config.empty()) meta["config"] = options.config;
    if (options.settings.record_timing) meta["updated_at"] = utc_timestamp();
    if (stats) {
        meta["complete"] = true;
        meta["failed_records"] = stats->failed_records;
    } else {
        meta["complete"] = false;
    }
    std::ofstream out(meta_path(db_path), std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + meta_path(db_path) + "'");
    out << meta.dump(2) << '\n';
}

}  // namespace

std::string meta_path(const std::string& db_path) { return db_path + ".meta.json"; }

std::vector<SweepRecord> load_records(const std::string& path) {
    std::uintmax_t complete = 0;
    return parse_db(read_db_lines(path, complete), path);
}

SweepStats run_sweep(const std::vector<SweepCase>& cases, const std::vector<Method>& methods,
                     const SweepOptions& options) {
    if (cases.empty()) throw ValidationError("sweep has no cases");
    if (methods.empty()) throw ValidationError("sweep has no methods");
    if (options.parallelism < 1) throw ValidationError("parallelism must be >= 1");
    options.settings.chain.validate();

    SweepStats stats;
    stats.total_cases = cases.size();

    // resume: keep complete lines, drop a partial trailing one
    std::set<std::pair<std::string, std::uint64_t>> done;
    const bool exists = std::filesystem::exists(options.db_path) && std::filesystem::file_size(options.db_path) > 0;
    if (exists) {
        std::uintmax_t complete = 0;
        const auto records = parse_db(read_db_lines(options.db_path, complete), options.db_path);
        if (complete != std::filesystem::file_size(options.db_path)) {
            std::filesystem::resize_file(options.db_path, complete);
        }
        for (const auto& r : records) done.emplace(method_name(r.method), r.seed);
    }
    std::ofstream db(options.db_path, std::ios::binary | std::ios::app);
    if (!db) throw ValidationError("cannot open '" + options.db_path + "' for writing");
    if (!exists) db << kRecordHeader << '\n' << std::flush;
    write_meta(options.db_path, cases, methods, options, nullptr);

    struct Job {
        const SweepCase* c;
        std::vector<Method> todo;
    };
    std::vector<Job> jobs;
    for (const auto& c : cases) {
        Job job{&c, {}};
        for (Method m : methods) {
            if (done.count({method_name(m), c.noise.seed})) ++stats.skipped_records;
            else job.todo.push_back(m);
        }
        if (!job.todo.empty()) jobs.push_back(std::move(job));
    }

    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::optional<std::vector<SweepRecord>>> results(jobs.size());
    std::size_t next_commit = 0;
    std::atomic<std::size_t> next_job{0};
    std::exception_ptr writer_error;
    const std::vector<double> grid = make_grid();
    const std::vector<double> no_display = {0.0, kDomainMax};

    auto commit_ready = [&] {
        // mu held
        while (next_commit < results.size() && results[next_commit]) {
            for (const auto& r : *results[next_commit]) {
                db << record_line(r) << '\n';
                ++stats.written_records;
                if (!r.rmse) ++stats.failed_records;
            }
            db.flush();
            if (!db) throw ValidationError("write failed for '" + options.db_path + "'");
            results[next_commit].reset();
            ++next_commit;
            if (options.progress) options.progress(next_commit, jobs.size());
        }
    };

    auto worker = [&] {
        for (;;) {
            const std::size_t j = next_job.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job& job = jobs[j];
            std::vector<SweepRecord> recs;
            // one dataset per case, shared by every method
            const Dataset data = generate_dataset(job.c->profile, job.c->noise, grid);
            for (Method m : job.todo) {
                SweepRecord r = make_record(m, *job.c);
                try {
                    const FitResult fit = fit_method(m, data, options.settings, method_seed(r.seed, m), no_display);
                    r.rmse = fit.rmse;
                    r.runtime_s = fit.runtime_s;
                    r.flags = flags_from(fit);
                } catch (const std::exception& e) {
                    r.rmse.reset();
                    r.flags = "fit_error";
                }
                recs.push_back(std::move(r));
            }
            std::lock_guard lock(mu);
            results[j] = std::move(recs);
            try {
                commit_ready();
            } catch (...) {
                if (!writer_error) writer_error = std::current_exception();
            }
        }
    };

    const int n_threads = std::min<int>(options.parallelism, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (writer_error) std::rethrow_exception(writer_error);

    write_meta(options.db_path, cases, methods, options, &stats);
    return stats;
}

std::vector<SummaryRow> summarize(const std::vector<SweepRecord>& records, const std::vector<std::string>& group_by) {
    if (records.empty()) throw ValidationError("no records to summarize");
    std::vector<std::string> keys;
    for (const auto& k : group_by) keys.push_back(normalize_key(k));
    for (const auto& k : keys) group_value(records.front(), k);  // rejects unknown keys

    std::map<std::vector<std::string>, std::map<Method, std::vector<double>>, GroupLess> groups;
    for (const auto& r : records) {
        if (!r.rmse) continue;
        std::vector<std::string> g;
        for (const auto& k : keys) g.push_back(group_value(r, k));
        groups[g][r.method].push_back(*r.rmse);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [g, by_method] : groups) {
        std::string label;
        for (const auto& part : g) label += (label.empty() ? "" : "/") + part;
        if (keys.empty()) label = "all";
        for (const auto& [m, values] : by_method) {
            SummaryRow row;
            row.group = label;
            row.method = m;
            row.count = static_cast<long>(values.size());
            mean_std(values, row.mean_rmse, row.std_rmse);
            rows.push_back(row);
        }
    }
    return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "group,method,mean_rmse,std_rmse,count\n";
    for (const auto& r : rows) {
        out << r.group << ',' << method_name(r.method) << ',' << format_double(r.mean_rmse) << ','
            << format_double(r.std_rmse) << ',' << r.count << '\n';
    }
    return out.str();
}

std::vector<RmseHistogramRow> rmse_histograms(const std::vector<SweepRecord>& records, int bins) {
    if (bins < 1) throw ValidationError("bins must be >= 1");
    std::map<Regime, std::map<Method, std::vector<double>>> by_regime;
    for (const auto& r : records) {
        if (r.rmse) by_regime[r.regime][r.method].push_back(*r.rmse);
    }
    std::vector<RmseHistogramRow> rows;
    for (const auto& [regime, by_method] : by_regime) {
        double hi = 0.0;
        for (const auto& [m, v] : by_method) hi = std::max(hi, *std::max_element(v.begin(), v.end()));
        if (hi <= 0.0) hi = 1.0;
        for (const auto& [m, v] : by_method) {
            std::vector<long> counts(static_cast<std::size_t>(bins), 0);
            for (double x : v) counts[std::clamp(static_cast<int>(x / hi * bins), 0, bins - 1)]++;
            for (int b = 0; b < bins; ++b) {
                rows.push_back({m, regime, hi * b / bins, b + 1 == bins ? hi : hi * (b + 1) / bins, counts[b]});
            }
        }
    }
    return rows;
}

std::string rmse_histogram_csv(const std::vector<RmseHistogramRow>& rows) {
    std::ostringstream out;
    out << "method,regime,bin_lo,bin_hi,count\n";
    for (const auto& r : rows) {
        out << method_name(r.method) << ',' << to_string(r.regime) << ',' << format_double(r.bin_lo) << ','
            << format_double(r.bin_hi) << ',' << r.count << '\n';
    }
    return out.str();
}

std::vector<WorstFit> worst_fits(const std::vector<SweepRecord>& records, int per_method) {
    if (per_method < 0) throw ValidationError("per_method must be >= 0");
    const auto& index = case_index_by_seed();
    std::map<Method, std::vector<WorstFit>> by_method;
    for (const auto& r : records) {
        if (!r.rmse) continue;
        const auto it = index.find(r.seed);
        if (it == index.end()) throw ValidationError("record seed " + std::to_string(r.seed) + " is not a sweep case");
        by_method[r.method].push_back({r.method, it->second, r.seed, *r.rmse});
    }
    std::vector<WorstFit> out;
    for (auto& [m, fits] : by_method) {
        std::sort(fits.begin(), fits.end(), [](const WorstFit& a, const WorstFit& b) {
            if (a.rmse != b.rmse) return a.rmse > b.rmse;
            return a.case_id < b.case_id;
        });
        for (int k = 0; k < per_method && k < static_cast<int>(fits.size()); ++k) out.push_back(fits[k]);
    }
    return out;
}

std::string worst_fit_bundle(const WorstFit& worst, const MethodSettings& settings) {
    const auto all = sweep_space();
    if (worst.case_id >= all.size()) throw ValidationError("case id out of range");
    const SweepCase& c = all[worst.case_id];
    const Dataset data = generate_dataset(c.profile, c.noise, make_grid());
    const std::vector<double> grid = prediction_grid();

    std::vector<FitResult> fits;
    for (Method m : all_methods()) fits.push_back(fit_method(m, data, settings, method_seed(c.noise.seed, m), grid));

    std::ostringstream out;
    out << "psi,truth";
    for (Method m : all_methods()) out << ',' << method_name(m) << "_mean," << method_name(m) << "_std";
    out << '\n';
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out << format_double(grid[j]) << ',' << format_double(eval_profile(c.profile, grid[j]));
        for (const auto& f : fits) out << ',' << format_double(f.grid.mean[j]) << ',' << format_double(f.grid.std[j]);
        out << '\n';
    }
    return out.str();
}

}  // namespace profgp
