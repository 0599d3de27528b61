#pragma once

#include <stdexcept>
#include <string>

namespace ustatbench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wrong arity, out-of-range size, unknown name.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise unusable input data.
class InputError : public Error {
public:
    using Error::Error;
};

/// The requested operation is not available for this kernel/distribution.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Enumeration budget exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A normalizer or projection vanished where it must be positive.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Monte Carlo or quadrature estimate unusable (non-finite, no convergence).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration (including inapplicable limit theorems).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Too many flagged replications in an experiment.
class ExperimentError : public Error {
public:
    using Error::Error;
};

} // namespace ustatbench
