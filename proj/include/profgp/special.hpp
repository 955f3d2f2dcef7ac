#pragma once

namespace profgp {

/// log Gamma(x) for x > 0. Arguments below 10 are shifted upward with the
/// recurrence Gamma(x+1) = x Gamma(x); the shifted value goes through the
/// Stirling series truncated after the z^-13 term (remainder < 1e-16 at z>=10).
double log_gamma(double x);

}  // namespace profgp
