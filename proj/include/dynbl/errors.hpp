#pragma once

#include <stdexcept>
#include <string>

namespace dynbl {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration: unknown keys, invalid parameter ranges, missing config files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Bad input data: malformed CSV, invariant violations, misaligned panels.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: singular systems, non-convergence, infeasible problems.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

} // namespace dynbl
