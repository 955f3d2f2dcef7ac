#pragma once

#include <stdexcept>
#include <string>

namespace profgp {

/// Invalid user-supplied parameters (profile/noise specs, configs, CLI input).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky failure after the jitter ladder was exhausted, or a similar
/// unrecoverable linear-algebra condition.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fit that could not produce a result (all restarts failed, etc.).
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedOperation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input files.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace profgp
