#pragma once

// Four-method benchmark over the synthetic profile space.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "profgp/inference.hpp"
#include "profgp/profiles.hpp"

namespace profgp {

enum class Method { EB_Gibbs, EB_ChangePoint, FB_ChangePoint_Gaussian, FB_ChangePoint_StudentT };

std::vector<Method> all_methods();
std::string method_name(Method m);      ///< "EB_Gibbs", ...
std::string method_cli_name(Method m);  ///< "eb-gibbs", "eb-cp", "fb-cp-gauss", "fb-cp-t"
/// Accepts either spelling.
Method method_from_string(const std::string& name);

/// Fitting settings shared by every method of a sweep.
struct MethodSettings {
    ChainConfig chain;
    int restarts = 8;
    NoiseMode noise_mode = NoiseMode::Learned;
    bool record_timing = true;
};

void to_json(nlohmann::json& j, const MethodSettings& s);
void from_json(const nlohmann::json& j, MethodSettings& s);

/// Fit `data` with one method. `seed` drives restarts and chains; `grid` is
/// the display grid (empty: prediction_grid()).
FitResult fit_method(Method method, const Dataset& data, const MethodSettings& settings, std::uint64_t seed,
                     const std::vector<double>& grid = {});

/// Seed of the fit of `method` on the case with dataset seed `case_seed`.
std::uint64_t method_seed(std::uint64_t case_seed, Method method);

/// sqrt(mean((fit - truth)^2)). Throws ValidationError on empty or
/// mismatched inputs.
double rmse(std::span<const double> fit, std::span<const double> truth);

/// 3 regimes x 4 outlier counts x 5 noise levels x 2 replicates, drawn from
/// sweep_space() with the remaining parameters cycled deterministically.
std::vector<SweepCase> desk_preset();

/// "paper" (all 5280 cases) or "desk" (120).
std::vector<SweepCase> preset_cases(const std::string& name);

struct SweepRecord {
    Method method = Method::EB_Gibbs;
    Regime regime = Regime::Lmode;
    double sigma_frac = 0.0;
    double shift_frac = 0.0;
    int n_outliers = 0;
    double outlier_scale = 0.0;
    std::optional<double> n_edge;  ///< edge value; pedestal regimes only
    std::optional<double> w_ped;
    std::optional<double> w_itb;
    std::optional<double> n_itb;
    std::uint64_t seed = 0;  ///< dataset seed, identifies the case
    std::optional<double> rmse;
    double runtime_s = 0.0;
    std::string flags;  ///< ';'-separated diagnostics, empty when clean
};

inline constexpr const char* kRecordHeader =
    "method,regime,sigma_frac,shift_frac,n_outliers,outlier_scale,n_edge,w_ped,w_itb,n_itb,seed,rmse,runtime_s,flags";

std::string record_line(const SweepRecord& r);
SweepRecord parse_record(const std::vector<std::string>& fields);

SweepRecord make_record(Method method, const SweepCase& c);

/// Records of a database file. A trailing partial line (interrupted write)
/// is ignored.
std::vector<SweepRecord> load_records(const std::string& path);

struct SweepOptions {
    std::string db_path;
    MethodSettings settings;
    int parallelism = 1;
    std::string preset;  ///< recorded in the sidecar only
    std::string config;  ///< effective command configuration, recorded in the sidecar
    /// Called after each committed case with (done, total) cases.
    std::function<void(std::size_t, std::size_t)> progress;
};

struct SweepStats {
    std::size_t total_cases = 0;
    std::size_t skipped_records = 0;  ///< already present on resume
    std::size_t written_records = 0;
    std::size_t failed_records = 0;
};

/// Appends one record per (case, method) not already in the database.
/// Records are committed in case order regardless of worker timing, so the
/// file is byte-identical across runs when timing is not recorded. A JSON
/// sidecar `<db>.meta.json` holds the run metadata.
SweepStats run_sweep(const std::vector<SweepCase>& cases, const std::vector<Method>& methods,
                     const SweepOptions& options);

std::string meta_path(const std::string& db_path);

struct SummaryRow {
    std::string group;
    Method method = Method::EB_Gibbs;
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    long count = 0;
};

/// Grouping keys: regime, sigma_frac, shift_frac, n_outliers, outlier_scale,
/// n_edge, w_ped, w_itb, n_itb (hyphens accepted). An empty key list groups
/// everything under "all". Failed records are excluded. Rows are sorted by
/// group then method and do not depend on record order.
std::vector<SummaryRow> summarize(const std::vector<SweepRecord>& records, const std::vector<std::string>& group_by);
std::string summary_csv(const std::vector<SummaryRow>& rows);

struct RmseHistogramRow {
    Method method;
    Regime regime;
    double bin_lo;
    double bin_hi;
    long count;
};

/// Per regime the bins span [0, max rmse in that regime] for all methods.
std::vector<RmseHistogramRow> rmse_histograms(const std::vector<SweepRecord>& records, int bins = 20);
std::string rmse_histogram_csv(const std::vector<RmseHistogramRow>& rows);

struct WorstFit {
    Method method;
    std::size_t case_id;  ///< index in sweep_space()
    std::uint64_t seed;
    double rmse;
};

/// Highest-rmse records per method; ties go to the lower case id.
std::vector<WorstFit> worst_fits(const std::vector<SweepRecord>& records, int per_method);

/// Refit the dataset of `worst` with every method and return a CSV
/// `psi,truth,<method>_mean,<method>_std,...` on the display grid.
std::string worst_fit_bundle(const WorstFit& worst, const MethodSettings& settings);

}  // namespace profgp
