#pragma once

#include <stdexcept>
#include <string>

namespace mvsk {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. negative radius).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Dimension or length mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Point not covered by any region of a partition.
class PartitionCoverageError : public Error {
public:
    using Error::Error;
};

/// Map evaluated at a singular point (log-polar at the origin).
class SingularityError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Gram matrix too ill-conditioned to solve; carries the condition estimate.
class IllConditionedError : public Error {
public:
    IllConditionedError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Negative power-function radicand beyond round-off, divergent iteration, etc.
class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

class SelectionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mvsk
