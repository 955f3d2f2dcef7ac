#pragma once

#include <string>

namespace profgp {

/// Bijection between a constrained hyperparameter and the real line.
enum class Transform {
    Identity,
    Log,          ///< x > 0
    LogMinusOne,  ///< x > 1, u = log(x - 1)
};

double to_unconstrained(double value, Transform t);
double from_unconstrained(double u, Transform t);

/// d(constrained)/du at u.
double constrained_derivative(double u, Transform t);

std::string to_string(Transform t);

}  // namespace profgp
