#pragma once

// Shared random fixtures for the unit tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "profgp/kernels.hpp"
#include "profgp/rng.hpp"

namespace testutil {

inline double log_uniform(profgp::Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

/// kind: 0 SE, 1 Matern, 2 Gibbs-tanh, 3 change-point.
inline profgp::KernelConfig random_kernel(profgp::Rng& rng, int kind) {
    using namespace profgp;
    switch (kind % 4) {
        case 0: return SquaredExponential{{log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.02, 1.0)}};
        case 1: return Matern52{{log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.02, 1.0)}};
        case 2:
            return GibbsTanhParams{log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.1, 1.0), log_uniform(rng, 0.01, 0.1),
                                   0.9 + 0.1 * rng.uniform(), log_uniform(rng, 0.005, 0.05)};
        default: {
            ChangePointConfig c;
            c.kernel_a = {log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.05, 1.0)};
            c.kernel_b = {log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.01, 0.3)};
            return c;
        }
    }
}

/// n sorted uniform points on [0, 1.1].
inline std::vector<double> random_points(profgp::Rng& rng, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (auto& x : xs) x = 1.1 * rng.uniform();
    std::sort(xs.begin(), xs.end());
    return xs;
}

}  // namespace testutil
