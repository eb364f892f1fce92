#pragma once

#include <stdexcept>
#include <string>

namespace pcrlab {

/// Invalid model or algorithm parameter (bad alpha, C_ev < 1, d out of range, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that cannot be processed (non-finite entries, shape mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit or decomposition that is undefined for the given sample,
/// e.g. a zero empirical eigenvalue that the thresholding rule did not catch.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcrlab
