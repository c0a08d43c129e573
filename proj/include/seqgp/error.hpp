#pragma once

#include <stdexcept>
#include <string>

namespace seqgp {

/// Bad argument, dimension mismatch or configuration violation.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of a numerical routine on otherwise valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky failed even after the full jitter escalation.
class DecompositionFailure : public NumericalError {
 public:
  DecompositionFailure(const std::string& what, double last_jitter)
      : NumericalError(what), last_jitter_(last_jitter) {}

  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// Slice shrinkage did not terminate; almost always a broken log-likelihood.
class SamplerStall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqgp
