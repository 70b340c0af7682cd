#pragma once

#include <stdexcept>
#include <string>

namespace kamor {

/// Shapes or sample counts that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed numerical input (asymmetric matrix, bad parameter).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two objects that must share a radial grid or band limit do not.
class GridMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A degree above the replacement resolution limit was requested.
class ResolutionLimitError : public std::domain_error {
 public:
  ResolutionLimitError(int l, int K)
      : std::domain_error("degree l=" + std::to_string(l) +
                          " exceeds resolution limit l <= K/2 for K=" +
                          std::to_string(K)),
        degree(l),
        shells(K) {}
  int degree;
  int shells;
};

/// Stored data failed validation when read back.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kamor
