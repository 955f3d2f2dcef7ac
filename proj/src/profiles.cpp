#include "profgp/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "profgp/csv.hpp"
#include "profgp/errors.hpp"
#include "profgp/rng.hpp"

namespace profgp {

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::Lmode: return "Lmode";
        case Regime::Hmode: return "Hmode";
        case Regime::HmodeITB: return "HmodeITB";
    }
    return "unknown";
}

Regime regime_from_string(const std::string& name) {
    std::string lower;
    for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "lmode" || lower == "l-mode" || lower == "l") return Regime::Lmode;
    if (lower == "hmode" || lower == "h-mode" || lower == "h") return Regime::Hmode;
    if (lower == "hmodeitb" || lower == "itb" || lower == "hmode-itb" || lower == "h-mode-itb") {
        return Regime::HmodeITB;
    }
    throw ValidationError("unknown regime '" + name + "'");
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

void require_finite(double v, const char* name) {
    require(std::isfinite(v), std::string("profile field ") + name + " is not finite");
}

}  // namespace

void ProfileSpec::validate() const {
    require_finite(f_o, "f_o");
    require_finite(f_edge, "f_edge");
    require_finite(alpha1, "alpha1");
    require_finite(alpha2, "alpha2");
    require(f_o > 0.0, "f_o must be > 0");
    require(alpha1 > 0.0, "alpha1 must be > 0");
    require(alpha2 > 0.0, "alpha2 must be > 0");
    if (regime != Regime::Lmode) {
        require_finite(f_ped, "f_ped");
        require_finite(w_ped, "w_ped");
        require_finite(psi_ped, "psi_ped");
        require(w_ped > 0.0, "w_ped must be > 0");
        require(psi_ped > 0.9 && psi_ped < 1.0, "psi_ped must lie in (0.9, 1.0)");
    }
    if (regime == Regime::HmodeITB) {
        require_finite(n_itb, "n_itb");
        require_finite(w_itb, "w_itb");
        require_finite(psi_itb, "psi_itb");
        require(w_itb > 0.0, "w_itb must be > 0");
        require(psi_itb > 0.3 && psi_itb < 0.7, "psi_itb must lie in (0.3, 0.7)");
    }
}

void NoiseSpec::validate(std::size_t n_points) const {
    require(std::isfinite(sigma_frac) && sigma_frac > 0.0 && sigma_frac < 1.0,
            "sigma_frac must lie in (0, 1)");
    require(std::isfinite(shift_frac) && shift_frac >= 0.0, "shift_frac must be >= 0");
    require(n_outliers >= 0, "n_outliers must be >= 0");
    require(std::isfinite(outlier_scale) && outlier_scale >= 1.0, "outlier_scale must be >= 1");
    require(static_cast<std::size_t>(n_outliers) < n_points,
            "n_outliers (" + std::to_string(n_outliers) + ") must be smaller than the point count (" +
                std::to_string(n_points) + ")");
}

double eval_profile(const ProfileSpec& spec, double psi) {
    spec.validate();
    if (!(psi >= 0.0)) throw ValidationError("psi must be >= 0");

    const double base = psi < 1.0 ? std::pow(1.0 - std::pow(psi, spec.alpha1), spec.alpha2) : 0.0;
    double value = spec.f_o * base + spec.f_edge;
    if (spec.regime != Regime::Lmode) {
        value += 0.5 * spec.f_ped * (1.0 - std::tanh((psi - spec.psi_ped) / spec.w_ped));
    }
    if (spec.regime == Regime::HmodeITB) {
        value += 0.5 * spec.n_itb * (1.0 - std::tanh((psi - spec.psi_itb) / spec.w_itb));
    }
    return value;
}

std::vector<double> make_grid(int n_core, int n_ped) {
    if (n_core < 2) throw ValidationError("n_core must be >= 2");
    if (n_ped < 0) throw ValidationError("n_ped must be >= 0");

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n_core + n_ped));
    for (int i = 0; i < n_core; ++i) grid.push_back(kDomainMax * i / (n_core - 1));
    if (n_ped == 1) {
        grid.push_back(0.95);
    } else {
        for (int i = 0; i < n_ped; ++i) grid.push_back(0.9 + 0.1 * i / (n_ped - 1));
    }
    std::sort(grid.begin(), grid.end());
    return grid;
}

Dataset generate_dataset(const ProfileSpec& spec, const NoiseSpec& noise,
                         const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("grid is empty");
    spec.validate();
    noise.validate(grid.size());

    std::vector<double> psi = grid;
    std::sort(psi.begin(), psi.end());
    if (std::adjacent_find(psi.begin(), psi.end()) != psi.end()) {
        throw ValidationError("grid contains duplicate coordinates");
    }

    const std::size_t n = psi.size();
    Dataset data;
    data.psi = psi;
    data.truth.resize(n);
    data.y.resize(n);
    data.sigma_reported.resize(n);
    data.outlier_mask.assign(n, false);
    data.provenance = Provenance{spec, noise};

    Rng rng(noise.seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double truth = eval_profile(spec, psi[i]);
        if (!(truth > 0.0)) {
            throw ValidationError("profile is not positive at psi=" + format_double(psi[i]));
        }
        data.truth[i] = truth;
        data.sigma_reported[i] = noise.sigma_frac * truth;
        data.y[i] = std::abs(truth * (1.0 + noise.shift_frac) + rng.normal(0.0, noise.sigma_frac * truth));
    }

    // partial Fisher-Yates: the first n_outliers slots become the outlier set
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int k = 0; k < noise.n_outliers; ++k) {
        const std::size_t j = k + rng.below(n - k);
        std::swap(order[k], order[j]);
        const std::size_t idx = order[k];
        const double truth = data.truth[idx];
        data.y[idx] = std::abs(rng.normal(truth, noise.outlier_scale * truth));
        data.outlier_mask[idx] = true;
    }
    return data;
}

std::string case_key(const ProfileSpec& p, const NoiseSpec& nz) {
    std::ostringstream key;
    key << "regime=" << to_string(p.regime) << ";f_o=" << format_double(p.f_o)
        << ";f_edge=" << format_double(p.f_edge) << ";alpha1=" << format_double(p.alpha1)
        << ";alpha2=" << format_double(p.alpha2);
    if (p.regime != Regime::Lmode) {
        key << ";f_ped=" << format_double(p.f_ped) << ";w_ped=" << format_double(p.w_ped)
            << ";psi_ped=" << format_double(p.psi_ped);
    }
    if (p.regime == Regime::HmodeITB) {
        key << ";n_itb=" << format_double(p.n_itb) << ";w_itb=" << format_double(p.w_itb)
            << ";psi_itb=" << format_double(p.psi_itb);
    }
    key << ";sigma_frac=" << format_double(nz.sigma_frac) << ";shift_frac=" << format_double(nz.shift_frac)
        << ";n_outliers=" << nz.n_outliers << ";outlier_scale=" << format_double(nz.outlier_scale);
    return key.str();
}

std::uint64_t case_seed(const ProfileSpec& profile, const NoiseSpec& noise) {
    return stable_hash(case_key(profile, noise));
}

std::vector<SweepCase> sweep_space() {
    static constexpr double kSigma[] = {0.1, 0.15, 0.2, 0.25, 0.33};
    static constexpr double kShift[] = {0.0, 0.02, 0.05, 0.10};
    static constexpr int kOutliers[] = {0, 3, 5, 10};
    static constexpr double kOutlierScale[] = {2.0, 3.0, 4.0};
    static constexpr double kEdge[] = {0.01, 0.05, 0.1, 0.2};
    static constexpr double kPedWidth[] = {0.01, 0.015, 0.02};
    static constexpr double kItbWidth[] = {0.01, 0.015, 0.02};
    static constexpr double kItbHeight[] = {0.5, 1.0, 1.5};

    std::vector<NoiseSpec> noises;
    for (double s : kSigma)
        for (double sh : kShift)
            for (int nol : kOutliers)
                for (double sol : kOutlierScale) noises.push_back({s, sh, nol, sol, 0});

    std::vector<ProfileSpec> shapes;
    shapes.push_back(ProfileSpec{.regime = Regime::Lmode});
    for (double edge : kEdge)
        for (double w : kPedWidth) shapes.push_back(ProfileSpec{.regime = Regime::Hmode, .f_edge = edge, .w_ped = w});
    for (double w : kItbWidth)
        for (double h : kItbHeight)
            shapes.push_back(ProfileSpec{.regime = Regime::HmodeITB, .n_itb = h, .w_itb = w});

    std::vector<SweepCase> cases;
    cases.reserve(shapes.size() * noises.size());
    for (const auto& shape : shapes) {
        for (NoiseSpec noise : noises) {
            noise.seed = case_seed(shape, noise);
            cases.push_back({cases.size(), shape, noise});
        }
    }
    return cases;
}

// serialization -------------------------------------------------------------

void to_json(nlohmann::json& j, const ProfileSpec& s) {
    j = nlohmann::json{{"regime", to_string(s.regime)}, {"f_o", s.f_o},         {"f_edge", s.f_edge},
                       {"alpha1", s.alpha1},           {"alpha2", s.alpha2},   {"f_ped", s.f_ped},
                       {"w_ped", s.w_ped},             {"psi_ped", s.psi_ped}, {"n_itb", s.n_itb},
                       {"w_itb", s.w_itb},             {"psi_itb", s.psi_itb}};
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* name, T& out) {
    if (auto it = j.find(name); it != j.end()) it->get_to(out);
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* what) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw ValidationError(std::string("unknown ") + what + " field '" + key + "'");
        }
    }
}

}  // namespace

void from_json(const nlohmann::json& j, ProfileSpec& s) {
    reject_unknown(j, {"regime", "f_o", "f_edge", "alpha1", "alpha2", "f_ped", "w_ped", "psi_ped", "n_itb",
                       "w_itb", "psi_itb"},
                   "ProfileSpec");
    s = ProfileSpec{};
    if (j.contains("regime")) s.regime = regime_from_string(j.at("regime").get<std::string>());
    read_field(j, "f_o", s.f_o);
    read_field(j, "f_edge", s.f_edge);
    read_field(j, "alpha1", s.alpha1);
    read_field(j, "alpha2", s.alpha2);
    read_field(j, "f_ped", s.f_ped);
    read_field(j, "w_ped", s.w_ped);
    read_field(j, "psi_ped", s.psi_ped);
    read_field(j, "n_itb", s.n_itb);
    read_field(j, "w_itb", s.w_itb);
    read_field(j, "psi_itb", s.psi_itb);
}

void to_json(nlohmann::json& j, const NoiseSpec& n) {
    j = nlohmann::json{{"sigma_frac", n.sigma_frac},
                       {"shift_frac", n.shift_frac},
                       {"n_outliers", n.n_outliers},
                       {"outlier_scale", n.outlier_scale},
                       {"seed", n.seed}};
}

void from_json(const nlohmann::json& j, NoiseSpec& n) {
    reject_unknown(j, {"sigma_frac", "shift_frac", "n_outliers", "outlier_scale", "seed"}, "NoiseSpec");
    n = NoiseSpec{};
    read_field(j, "sigma_frac", n.sigma_frac);
    read_field(j, "shift_frac", n.shift_frac);
    read_field(j, "n_outliers", n.n_outliers);
    read_field(j, "outlier_scale", n.outlier_scale);
    read_field(j, "seed", n.seed);
}

std::string dataset_csv(const Dataset& data) {
    std::ostringstream out;
    const bool full = data.has_truth();
    out << (full ? "psi,y,sigma,truth,is_outlier\n" : "psi,y,sigma\n");
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << format_double(data.psi[i]) << ',' << format_double(data.y[i]) << ','
            << format_double(data.sigma_reported[i]);
        if (full) {
            const bool outlier = i < data.outlier_mask.size() && data.outlier_mask[i];
            out << ',' << format_double(data.truth[i]) << ',' << (outlier ? 1 : 0);
        }
        out << '\n';
    }
    return out.str();
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << dataset_csv(data);
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

Dataset read_dataset_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const int c_psi = table.column("psi");
    const int c_y = table.column("y");
    const int c_sigma = table.column("sigma");
    const int c_truth = table.column("truth");
    const int c_outlier = table.column("is_outlier");
    if (c_psi < 0 || c_y < 0 || c_sigma < 0) {
        throw ParseError("'" + path + "' must have columns psi,y,sigma");
    }
    if (table.rows.empty()) throw ParseError("'" + path + "' has no data rows");

    struct Row {
        double psi, y, sigma, truth;
        bool outlier;
    };
    std::vector<Row> rows;
    for (const auto& cells : table.rows) {
        Row r{parse_double(cells[c_psi]), parse_double(cells[c_y]), parse_double(cells[c_sigma]),
              c_truth >= 0 ? parse_double(cells[c_truth]) : 0.0,
              c_outlier >= 0 ? parse_int(cells[c_outlier]) != 0 : false};
        if (!std::isfinite(r.psi) || !std::isfinite(r.y) || !std::isfinite(r.sigma)) {
            throw ParseError("non-finite value in '" + path + "'");
        }
        if (!(r.sigma > 0.0)) throw ParseError("sigma must be > 0 in '" + path + "'");
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.psi < b.psi; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].psi == rows[i - 1].psi) {
            throw ParseError("duplicate psi " + format_double(rows[i].psi) + " in '" + path + "'");
        }
    }

    Dataset data;
    for (const auto& r : rows) {
        data.psi.push_back(r.psi);
        data.y.push_back(r.y);
        data.sigma_reported.push_back(r.sigma);
        if (c_truth >= 0) data.truth.push_back(r.truth);
        if (c_truth >= 0) data.outlier_mask.push_back(r.outlier);
    }
    return data;
}

}  // namespace profgp
