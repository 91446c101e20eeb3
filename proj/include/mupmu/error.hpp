#ifndef MUPMU_ERROR_HPP
#define MUPMU_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mupmu {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed network document, config file or placement list.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// The optimizer finished without a single feasible placement.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (singular information matrix, indefinite covariance, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularGainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A request that exceeds a hard size cap (e.g. exhaustive enumeration).
class CapacityError : public Error {
public:
    using Error::Error;
};

// CLI exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitNumerical = 3;

} // namespace mupmu

#endif
