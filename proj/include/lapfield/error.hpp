#pragma once

#include <stdexcept>
#include <string>

namespace lapfield {

// Argument outside the mathematical domain of a function.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical procedure failed: non-PD matrix, non-convergence, quadrature
// trouble, probability degenerate at 0 or 1.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Density evaluated at the origin singularity (D > 1).
class singularity_error : public numeric_error {
 public:
  using numeric_error::numeric_error;
};

// Malformed input file or configuration.
class schema_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lapfield
