#include "profgp/transforms.hpp"

#include <cmath>

#include "profgp/errors.hpp"

namespace profgp {

double to_unconstrained(double value, Transform t) {
    switch (t) {
        case Transform::Identity: return value;
        case Transform::Log:
            if (!(value > 0.0)) throw ValidationError("log-transformed parameter must be > 0");
            return std::log(value);
        case Transform::LogMinusOne:
            if (!(value > 1.0)) throw ValidationError("parameter must be > 1");
            return std::log(value - 1.0);
    }
    return value;
}

double from_unconstrained(double u, Transform t) {
    switch (t) {
        case Transform::Identity: return u;
        case Transform::Log: return std::exp(u);
        case Transform::LogMinusOne: return 1.0 + std::exp(u);
    }
    return u;
}

double constrained_derivative(double u, Transform t) {
    switch (t) {
        case Transform::Identity: return 1.0;
        case Transform::Log:
        case Transform::LogMinusOne: return std::exp(u);
    }
    return 1.0;
}

std::string to_string(Transform t) {
    switch (t) {
        case Transform::Identity: return "identity";
        case Transform::Log: return "log";
        case Transform::LogMinusOne: return "log_minus_one";
    }
    return "unknown";
}

}  // namespace profgp
