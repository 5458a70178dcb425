#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixtile {

// Invalid argument outside an operation's mathematical domain (x <= 0 for
// gamma, latitude out of range, n = 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Raised when a double value does not fit the single-precision range.
class PrecisionOverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

class SingularSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-positive pivot during a Cholesky factorization. `index` is the global
// row index of the failing pivot.
class NotPositiveDefiniteError : public std::runtime_error {
public:
    explicit NotPositiveDefiniteError(std::size_t index)
        : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(index) + ")"),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class CorruptFactorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PredictionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mixtile
