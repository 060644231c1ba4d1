#pragma once

#include <stdexcept>
#include <string>

namespace kolmo {

/// Invalid user input: bad parameters, malformed files, unknown keys.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested object would exceed a configured resource cap.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: step-size underflow, trajectory blow-up, non-finite values.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The drift description violates the divergence-free structure
/// (non-skew beta, asymmetric C beyond tolerance).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace kolmo
