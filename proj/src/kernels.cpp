#include "profgp/kernels.hpp"

#include <cmath>

#include "profgp/errors.hpp"

namespace profgp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Matern 5/2 value and d/d(log theta_l) at distance d.
struct MaternTerms {
    double value;
    double dlog_l;
};

MaternTerms matern_terms(const StationaryParams& p, double d) {
    const double a = kSqrt5 * d / p.theta_l;
    const double v2 = p.theta_v * p.theta_v;
    const double e = std::exp(-a);
    return {v2 * (1.0 + a + a * a / 3.0) * e, v2 * e * a * a * (1.0 + a) / 3.0};
}

bool same_points(std::span<const double> xs, std::span<const double> xs2) {
    return xs.data() == xs2.data() && xs.size() == xs2.size();
}

}  // namespace

double GibbsTanhParams::length_scale(double psi) const {
    return 0.5 * (l_core + l_edge) - 0.5 * (l_core - l_edge) * std::tanh((psi - psi_0) / w_l);
}

double ChangePointConfig::weight_b(double psi) const {
    // 1 - s(x) == s(-x); avoids cancellation far above c2
    return logistic((psi - c1) / transfer_width) * logistic(-(psi - c2) / transfer_width);
}

double k_sek(const StationaryParams& p, double a, double b) {
    const double r = a - b;
    return p.theta_v * std::exp(-r * r / (2.0 * p.theta_l * p.theta_l));
}

double k_matern52(const StationaryParams& p, double a, double b) {
    return matern_terms(p, std::abs(a - b)).value;
}

double k_gibbs_tanh(const GibbsTanhParams& p, double a, double b) {
    const double la = p.length_scale(a);
    const double lb = p.length_scale(b);
    const double s = la * la + lb * lb;
    const double r = a - b;
    return p.theta_v * p.theta_v * std::sqrt(2.0 * la * lb / s) * std::exp(-r * r / s);
}

double k_changepoint(const ChangePointConfig& c, double a, double b) {
    const double wb_a = c.weight_b(a);
    const double wb_b = c.weight_b(b);
    return (1.0 - wb_a) * (1.0 - wb_b) * k_matern52(c.kernel_a, a, b) + wb_a * wb_b * k_matern52(c.kernel_b, a, b);
}

double evaluate(const KernelConfig& kernel, double a, double b) {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SquaredExponential>) return k_sek(k.params, a, b);
            else if constexpr (std::is_same_v<K, Matern52>) return k_matern52(k.params, a, b);
            else if constexpr (std::is_same_v<K, GibbsTanhParams>) return k_gibbs_tanh(k, a, b);
            else return k_changepoint(k, a, b);
        },
        kernel);
}

std::string kernel_name(const KernelConfig& kernel) {
    static const char* names[] = {"squared_exponential", "matern52", "gibbs_tanh", "changepoint"};
    return names[kernel.index()];
}

namespace {

void check_stationary(const StationaryParams& p, const char* what) {
    if (!(p.theta_v > 0.0) || !std::isfinite(p.theta_v)) {
        throw ValidationError(std::string(what) + ": theta_v must be > 0");
    }
    if (!(p.theta_l > 0.0) || !std::isfinite(p.theta_l)) {
        throw ValidationError(std::string(what) + ": theta_l must be > 0");
    }
}

}  // namespace

void validate(const KernelConfig& kernel) {
    std::visit(
        [](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SquaredExponential> || std::is_same_v<K, Matern52>) {
                check_stationary(k.params, "kernel");
            } else if constexpr (std::is_same_v<K, GibbsTanhParams>) {
                for (double v : {k.theta_v, k.l_core, k.l_edge, k.w_l}) {
                    if (!(v > 0.0) || !std::isfinite(v)) {
                        throw ValidationError("gibbs_tanh: theta_v, l_core, l_edge, w_l must be > 0");
                    }
                }
                if (!std::isfinite(k.psi_0)) throw ValidationError("gibbs_tanh: psi_0 must be finite");
            } else {
                check_stationary(k.kernel_a, "changepoint kernel_a");
                check_stationary(k.kernel_b, "changepoint kernel_b");
                if (!(k.c1 < k.c2)) throw ValidationError("changepoint: c1 must be < c2");
                if (!(k.transfer_width > 0.0)) throw ValidationError("changepoint: transfer_width must be > 0");
            }
        },
        kernel);
}

std::vector<std::string> parameter_names(const KernelConfig& kernel) {
    switch (kernel.index()) {
        case 0:
        case 1: return {"theta_v", "theta_l"};
        case 2: return {"theta_v", "l_core", "l_edge", "psi_0", "w_l"};
        default: return {"theta_v_a", "theta_l_a", "theta_v_b", "theta_l_b"};
    }
}

std::vector<Transform> parameter_transforms(const KernelConfig& kernel) {
    using T = Transform;
    if (kernel.index() == 2) return {T::Log, T::Log, T::Log, T::Identity, T::Log};
    if (kernel.index() == 3) return {T::Log, T::Log, T::Log, T::Log};
    return {T::Log, T::Log};
}

Eigen::VectorXd to_unconstrained(const KernelConfig& kernel) {
    return std::visit(
        [](const auto& k) -> Eigen::VectorXd {
            using K = std::decay_t<decltype(k)>;
            Eigen::VectorXd u;
            if constexpr (std::is_same_v<K, SquaredExponential> || std::is_same_v<K, Matern52>) {
                u.resize(2);
                u << std::log(k.params.theta_v), std::log(k.params.theta_l);
            } else if constexpr (std::is_same_v<K, GibbsTanhParams>) {
                u.resize(5);
                u << std::log(k.theta_v), std::log(k.l_core), std::log(k.l_edge), k.psi_0, std::log(k.w_l);
            } else {
                u.resize(4);
                u << std::log(k.kernel_a.theta_v), std::log(k.kernel_a.theta_l), std::log(k.kernel_b.theta_v),
                    std::log(k.kernel_b.theta_l);
            }
            return u;
        },
        kernel);
}

KernelConfig with_unconstrained(const KernelConfig& kernel, const Eigen::Ref<const Eigen::VectorXd>& u) {
    const auto n = static_cast<Eigen::Index>(parameter_names(kernel).size());
    if (u.size() != n) throw ValidationError("hyperparameter vector has wrong length for " + kernel_name(kernel));
    return std::visit(
        [&](auto k) -> KernelConfig {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SquaredExponential> || std::is_same_v<K, Matern52>) {
                k.params = {std::exp(u[0]), std::exp(u[1])};
            } else if constexpr (std::is_same_v<K, GibbsTanhParams>) {
                k.theta_v = std::exp(u[0]);
                k.l_core = std::exp(u[1]);
                k.l_edge = std::exp(u[2]);
                k.psi_0 = u[3];
                k.w_l = std::exp(u[4]);
            } else {
                k.kernel_a = {std::exp(u[0]), std::exp(u[1])};
                k.kernel_b = {std::exp(u[2]), std::exp(u[3])};
            }
            return k;
        },
        kernel);
}

Eigen::MatrixXd gram(const KernelConfig& kernel, std::span<const double> xs, std::span<const double> xs2) {
    if (const auto* cp = std::get_if<ChangePointConfig>(&kernel)) {
        const auto n = static_cast<Eigen::Index>(xs.size());
        const auto m = static_cast<Eigen::Index>(xs2.size());
        Eigen::VectorXd wb1(n), wb2(m);
        for (Eigen::Index i = 0; i < n; ++i) wb1[i] = cp->weight_b(xs[i]);
        for (Eigen::Index j = 0; j < m; ++j) wb2[j] = cp->weight_b(xs2[j]);
        Eigen::MatrixXd out(n, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = std::abs(xs[i] - xs2[j]);
                out(i, j) = (1.0 - wb1[i]) * (1.0 - wb2[j]) * matern_terms(cp->kernel_a, d).value +
                            wb1[i] * wb2[j] * matern_terms(cp->kernel_b, d).value;
            }
        }
        return out;
    }
    if (same_points(xs, xs2)) {
        const auto n = static_cast<Eigen::Index>(xs.size());
        Eigen::MatrixXd out(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                out(i, j) = evaluate(kernel, xs[i], xs[j]);
                out(j, i) = out(i, j);
            }
        }
        return out;
    }
    return gram([&](double a, double b) { return evaluate(kernel, a, b); }, xs, xs2);
}

Eigen::MatrixXd gram(const KernelConfig& kernel, std::span<const double> xs) { return gram(kernel, xs, xs); }

std::vector<Eigen::MatrixXd> gram_gradients(const KernelConfig& kernel, std::span<const double> xs) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto np = parameter_names(kernel).size();
    std::vector<Eigen::MatrixXd> grads(np, Eigen::MatrixXd(n, n));

    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = j; i < n; ++i) {
                    const double a = xs[i], b = xs[j];
                    double g[5] = {0, 0, 0, 0, 0};
                    if constexpr (std::is_same_v<K, SquaredExponential>) {
                        const double kv = k_sek(k.params, a, b);
                        const double r = a - b;
                        g[0] = kv;
                        g[1] = kv * r * r / (k.params.theta_l * k.params.theta_l);
                    } else if constexpr (std::is_same_v<K, Matern52>) {
                        const auto t = matern_terms(k.params, std::abs(a - b));
                        g[0] = 2.0 * t.value;
                        g[1] = t.dlog_l;
                    } else if constexpr (std::is_same_v<K, GibbsTanhParams>) {
                        const double la = k.length_scale(a), lb = k.length_scale(b);
                        const double s = la * la + lb * lb;
                        const double r2 = (a - b) * (a - b);
                        const double kv = k_gibbs_tanh(k, a, b);
                        // d log k / d l at each end
                        const double dla = 0.5 / la - la / s + 2.0 * la * r2 / (s * s);
                        const double dlb = 0.5 / lb - lb / s + 2.0 * lb * r2 / (s * s);
                        const double ua = (a - k.psi_0) / k.w_l, ub = (b - k.psi_0) / k.w_l;
                        const double ta = std::tanh(ua), tb = std::tanh(ub);
                        const double delta = k.l_core - k.l_edge;
                        // dl/dtheta for theta = l_core, l_edge, psi_0, w_l
                        const double dl_core_a = 0.5 * (1.0 - ta), dl_core_b = 0.5 * (1.0 - tb);
                        const double dl_edge_a = 0.5 * (1.0 + ta), dl_edge_b = 0.5 * (1.0 + tb);
                        const double dpsi_a = 0.5 * delta * (1.0 - ta * ta) / k.w_l;
                        const double dpsi_b = 0.5 * delta * (1.0 - tb * tb) / k.w_l;
                        const double dw_a = dpsi_a * ua, dw_b = dpsi_b * ub;
                        g[0] = 2.0 * kv;
                        g[1] = kv * (dla * dl_core_a + dlb * dl_core_b) * k.l_core;
                        g[2] = kv * (dla * dl_edge_a + dlb * dl_edge_b) * k.l_edge;
                        g[3] = kv * (dla * dpsi_a + dlb * dpsi_b);
                        g[4] = kv * (dla * dw_a + dlb * dw_b) * k.w_l;
                    } else {
                        const double wba = k.weight_b(a), wbb = k.weight_b(b);
                        const double wa = (1.0 - wba) * (1.0 - wbb), wb = wba * wbb;
                        const double d = std::abs(a - b);
                        const auto ta = matern_terms(k.kernel_a, d);
                        const auto tb = matern_terms(k.kernel_b, d);
                        g[0] = wa * 2.0 * ta.value;
                        g[1] = wa * ta.dlog_l;
                        g[2] = wb * 2.0 * tb.value;
                        g[3] = wb * tb.dlog_l;
                    }
                    for (std::size_t p = 0; p < np; ++p) {
                        grads[p](i, j) = g[p];
                        grads[p](j, i) = g[p];
                    }
                }
            }
        },
        kernel);
    return grads;
}

// serialization -------------------------------------------------------------

namespace {

nlohmann::json stationary_json(const StationaryParams& p) {
    return {{"theta_v", p.theta_v}, {"theta_l", p.theta_l}};
}

StationaryParams stationary_from(const nlohmann::json& j) {
    return {j.at("theta_v").get<double>(), j.at("theta_l").get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const KernelConfig& kernel) {
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SquaredExponential> || std::is_same_v<K, Matern52>) {
                j = stationary_json(k.params);
            } else if constexpr (std::is_same_v<K, GibbsTanhParams>) {
                j = {{"theta_v", k.theta_v}, {"l_core", k.l_core}, {"l_edge", k.l_edge},
                     {"psi_0", k.psi_0},     {"w_l", k.w_l}};
            } else {
                j = {{"kernel_a", stationary_json(k.kernel_a)},
                     {"kernel_b", stationary_json(k.kernel_b)},
                     {"locations", {k.c1, k.c2}},
                     {"transfer_width", k.transfer_width}};
            }
        },
        kernel);
    j["kernel"] = kernel_name(kernel);
}

void from_json(const nlohmann::json& j, KernelConfig& kernel) {
    const auto name = j.at("kernel").get<std::string>();
    if (name == "squared_exponential") {
        kernel = SquaredExponential{stationary_from(j)};
    } else if (name == "matern52") {
        kernel = Matern52{stationary_from(j)};
    } else if (name == "gibbs_tanh") {
        kernel = GibbsTanhParams{j.at("theta_v").get<double>(), j.at("l_core").get<double>(),
                                 j.at("l_edge").get<double>(), j.at("psi_0").get<double>(),
                                 j.at("w_l").get<double>()};
    } else if (name == "changepoint") {
        ChangePointConfig c;
        c.kernel_a = stationary_from(j.at("kernel_a"));
        c.kernel_b = stationary_from(j.at("kernel_b"));
        if (j.contains("locations")) {
            c.c1 = j.at("locations").at(0).get<double>();
            c.c2 = j.at("locations").at(1).get<double>();
        }
        if (j.contains("transfer_width")) c.transfer_width = j.at("transfer_width").get<double>();
        kernel = c;
    } else {
        throw ValidationError("unknown kernel '" + name + "'");
    }
    validate(kernel);
}

}  // namespace profgp
