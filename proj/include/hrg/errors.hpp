#pragma once

#include <stdexcept>
#include <string>

namespace hrg {

/// Base class for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model or lattice parameter (nonpositive mass, g <= 0, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Scale or index outside the admissible range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Problem too large for a dense/brute-force code path.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Numerical failures. All derive from NumericalError so callers can catch them together.
class NumericalError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ResolutionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TruncationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InvalidCertificateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace hrg
