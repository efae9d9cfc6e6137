#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace phireg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input errors. The CLI maps these to exit code 1.

class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& message)
        : Error("row " + std::to_string(row) + ": " + message), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Numerical failures. The CLI maps these to exit code 2.

class NumericalError : public Error {
public:
    using Error::Error;
};

/// A symmetric matrix that must be invertible has a (numerically) null direction.
class RankDeficiencyError : public NumericalError {
public:
    RankDeficiencyError(const std::string& message, Eigen::VectorXd null_direction)
        : NumericalError(message), null_direction_(std::move(null_direction)) {}

    const Eigen::VectorXd& null_direction() const noexcept { return null_direction_; }

private:
    Eigen::VectorXd null_direction_;
};

class IllConditionedError : public NumericalError {
public:
    IllConditionedError(const std::string& message, double condition)
        : NumericalError(message), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace phireg
