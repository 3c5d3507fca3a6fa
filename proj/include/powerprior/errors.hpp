#pragma once

#include <stdexcept>
#include <string>

namespace powerprior {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed configuration, inconsistent dataset, or invalid hyperparameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Parameter outside the model support, or a dimension mismatch.
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-convergence, singular matrices, non-finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Chains failed the R-hat / MCSE convergence gate.
class DiagnosticsError : public Error {
public:
    using Error::Error;
};

// Dictionary lookup outside the tabulated a0 range.
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

int exit_code_for(const std::exception& e) noexcept;

} // namespace powerprior
