#pragma once

#include <stdexcept>
#include <string>

namespace skvmn {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensor operands.
struct DimensionError : Error {
    using Error::Error;
};

// Caller violated an operation precondition (non-scalar loss, non-monotonic step, ...).
struct ContractError : Error {
    using Error::Error;
};

// Bad user-supplied value (out-of-range question id, non-binary answer, ...).
struct InputError : Error {
    using Error::Error;
};

// Invalid configuration (degenerate triangular range, non-positive dimension, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed dataset text.
struct ParseError : Error {
    using Error::Error;
};

// Corrupt or mismatched checkpoint file.
struct FormatError : Error {
    using Error::Error;
};

// Metric undefined for the given inputs (e.g. single-class AUC).
struct MetricError : Error {
    using Error::Error;
};

// Numerical failure during optimisation.
struct TrainError : Error {
    using Error::Error;
};

}  // namespace skvmn
