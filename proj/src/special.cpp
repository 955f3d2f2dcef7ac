#include "profgp/special.hpp"

#include <cmath>
#include <numbers>

#include "profgp/errors.hpp"

namespace profgp {

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError("log_gamma: argument must be finite and > 0");

    double shift = 0.0;
    double z = x;
    // sum of logs rather than log of product keeps small x (many shifts) exact
    while (z < 10.0) {
        shift += std::log(z);
        z += 1.0;
    }
    const double inv = 1.0 / z;
    const double inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k (2k-1)), k = 1..7
    const double series =
        inv * (1.0 / 12.0 +
               inv2 * (-1.0 / 360.0 +
                       inv2 * (1.0 / 1260.0 +
                               inv2 * (-1.0 / 1680.0 +
                                       inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    return (z - 0.5) * std::log(z) - z + half_log_two_pi + series - shift;
}

}  // namespace profgp
