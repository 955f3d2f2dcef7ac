#pragma once

// Analytic ground-truth profiles and synthetic noisy datasets.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace profgp {

enum class Regime { Lmode, Hmode, HmodeITB };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

/// Shape parameters of an analytic profile. Defaults are the reference
/// H-mode shape used throughout the benchmark.
struct ProfileSpec {
    Regime regime = Regime::Lmode;
    double f_o = 1.0;       ///< core amplitude
    double f_edge = 0.05;   ///< edge value
    double alpha1 = 2.0;    ///< center-gradient exponent
    double alpha2 = 1.5;    ///< edge-gradient exponent
    double f_ped = 0.3;     ///< pedestal height
    double w_ped = 0.015;   ///< pedestal width
    double psi_ped = 0.95;  ///< pedestal center, in (0.9, 1.0)
    double n_itb = 1.0;     ///< ITB height
    double w_itb = 0.015;   ///< ITB width
    double psi_itb = 0.5;   ///< ITB center, in (0.3, 0.7)

    /// Throws ValidationError. Pedestal fields are checked only for H-mode
    /// regimes and ITB fields only for HmodeITB.
    void validate() const;

    bool operator==(const ProfileSpec&) const = default;
};

struct NoiseSpec {
    double sigma_frac = 0.1;     ///< Gaussian width as a fraction of the local truth
    double shift_frac = 0.0;     ///< systematic multiplicative shift
    int n_outliers = 0;
    double outlier_scale = 2.0;  ///< outlier width as a multiple of the local truth
    std::uint64_t seed = 0;

    /// Throws ValidationError; `n_points` is the grid size the noise will be
    /// applied to (n_outliers must be strictly smaller).
    void validate(std::size_t n_points) const;

    bool operator==(const NoiseSpec&) const = default;
};

struct Provenance {
    ProfileSpec profile;
    NoiseSpec noise;
};

/// Observations sorted by psi. `truth` and `outlier_mask` are empty for
/// external data that does not carry them.
struct Dataset {
    std::vector<double> psi;
    std::vector<double> y;
    std::vector<double> sigma_reported;
    std::vector<double> truth;
    std::vector<bool> outlier_mask;
    std::optional<Provenance> provenance;  ///< nullopt means "external"

    std::size_t size() const { return psi.size(); }
    bool has_truth() const { return !truth.empty(); }
};

/// f(psi) for the regime in `spec`. For psi > 1 the core term
/// (1 - psi^alpha1)^alpha2 is clamped to zero.
double eval_profile(const ProfileSpec& spec, double psi);

inline constexpr int kDefaultCorePoints = 48;
inline constexpr int kDefaultPedestalPoints = 40;
inline constexpr double kDomainMax = 1.1;

/// `n_core` points uniform on [0, 1.1] merged with `n_ped` points uniform on
/// [0.9, 1.0], sorted.
std::vector<double> make_grid(int n_core = kDefaultCorePoints, int n_ped = kDefaultPedestalPoints);

/// Deterministic in (spec, noise, grid). Negative draws, outlier or not, are
/// reflected to keep every observation positive.
Dataset generate_dataset(const ProfileSpec& spec, const NoiseSpec& noise,
                         const std::vector<double>& grid);

/// One entry of the benchmark parameter space.
struct SweepCase {
    std::size_t index = 0;  ///< position in the full enumeration
    ProfileSpec profile;
    NoiseSpec noise;        ///< seed filled from case_seed()
};

/// Canonical text key of the parameters that define a case (regime-relevant
/// shape fields plus noise fields, seed excluded).
std::string case_key(const ProfileSpec& profile, const NoiseSpec& noise);

/// Stable hash of case_key(); independent of enumeration order.
std::uint64_t case_seed(const ProfileSpec& profile, const NoiseSpec& noise);

/// The full 5280-case Cartesian product: 240 L-mode, 2880 H-mode, 2160 ITB.
std::vector<SweepCase> sweep_space();

// serialization -------------------------------------------------------------

void to_json(nlohmann::json& j, const ProfileSpec& spec);
void from_json(const nlohmann::json& j, ProfileSpec& spec);
void to_json(nlohmann::json& j, const NoiseSpec& noise);
void from_json(const nlohmann::json& j, NoiseSpec& noise);

/// CSV `psi,y,sigma,truth,is_outlier` (truth columns omitted when absent).
void write_dataset_csv(const std::string& path, const Dataset& data);
std::string dataset_csv(const Dataset& data);

/// Accepts `psi,y,sigma[,truth[,is_outlier]]`; rows are sorted by psi.
Dataset read_dataset_csv(const std::string& path);

}  // namespace profgp
