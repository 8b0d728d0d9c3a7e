#pragma once

#include <stdexcept>
#include <string>

namespace qlm {

/// Input data violates a hypothesis of the construction (curvature bound,
/// H > |tr p|, convexity). Maps to CLI exit code 2.
class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solver failed to converge or violated a discrete invariant.
/// Maps to CLI exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input. Maps to CLI exit code 4.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qlm
