#pragma once

#include <stdexcept>
#include <string>

namespace msinv {

/// Solver breakdowns, non-convergent eigenproblems, overflows.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collocation design too close to rank deficiency to fit.
struct IllConditionedDesign : NumericalError {
  using NumericalError::NumericalError;
};

/// Malformed or inconsistent experiment configuration / input files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace msinv
