#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace confdiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input, configuration or geometry definition (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Expression syntax error. `column` is 1-based.
class ParseError : public ConfigError {
public:
    ParseError(std::string message, int column, std::string expected)
        : ConfigError("column " + std::to_string(column) + ": " + message +
                      (expected.empty() ? std::string{} : "; expected " + expected)),
          column_(column),
          expected_(std::move(expected)) {}

    int column() const noexcept { return column_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    int column_;
    std::string expected_;
};

/// A computation left the domain where it is defined (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Evaluation of an expression outside its domain. Carries the printed
/// sub-expression that failed.
class DomainError : public NumericalError {
public:
    DomainError(const std::string& what, std::string subexpression)
        : NumericalError(what + " in '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

/// Geometric configuration for which the effective tensor is undefined
/// (extreme tilt, planes containing the projection direction, ...).
class DegenerateError : public NumericalError {
public:
    DegenerateError(const std::string& what, double psi)
        : NumericalError(what), psi_(psi) {}

    /// Tilt angle associated with the configuration, radians.
    double psi() const noexcept { return psi_; }

private:
    double psi_;
};

}  // namespace confdiff
