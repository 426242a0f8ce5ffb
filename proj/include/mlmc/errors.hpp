#pragma once

#include <stdexcept>
#include <string>

namespace mlmc {

/// Bad argument supplied by the caller (non-positive epsilon, zero cost, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidInterval : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class InvalidRefinement : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class InvalidGrid : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class InsufficientPoints : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Not enough usable levels to fit a rate.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedKurtosis : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// b(S) == 0 at a state where an estimator divides by the diffusion.
class DegenerateDiffusion : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DivergentMoment : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NoSolution : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Quadrature did not reach the requested tolerance.
class AccuracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace mlmc
