#pragma once

#include <stdexcept>
#include <string>

namespace ana {

// Shape or argument mismatch detected while building a graph or calling an op.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Numeric domain violation (log of a non-positive value, sqrt of a negative, ...).
// Carries the offending value so callers can report it.
class DomainError : public std::domain_error {
public:
    DomainError(const std::string& what, double value)
        : std::domain_error(what + " (offending value " + std::to_string(value) + ")"),
          offending_value(value) {}
    double offending_value;
};

// API misuse: calling backward on a non-scalar root, reading a stale handle, ...
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// A linear solve hit a zero (or effectively zero) pivot.
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, int index)
        : std::runtime_error(what + " at index " + std::to_string(index)), pivot_index(index) {}
    int pivot_index;
};

// A closed-form estimator's denominator degenerated.
class DegenerateEstimatorError : public std::runtime_error {
public:
    explicit DegenerateEstimatorError(const std::string& what) : std::runtime_error(what) {}
};

// File or stream problem (missing file, parse failure, corrupted checkpoint).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Bad experiment configuration: unknown name, missing key, unparseable value.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted (non-finite loss or gradient); message names the iteration
// and the last good checkpoint when one exists.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ana
