#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssmdisc {

/// Numerical failure (singularity, overflow, non-convergence). Distinct from
/// std::invalid_argument, which is reserved for malformed inputs; the CLI maps
/// the two families to different exit codes.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pivot fell below tolerance in a factorization, or a resolvent pole was hit.
class SingularMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// An iteration exhausted its sweep budget or a step size underflowed.
class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A scan produced a non-finite state; carries the 1-based step index.
class OverflowError : public NumericalError {
public:
    OverflowError(const std::string& what, std::size_t step)
        : NumericalError(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_ = 0;
};

}  // namespace ssmdisc
