#pragma once

#include <stdexcept>
#include <string>

namespace gpgibbs {

/// Invalid sizes, out-of-range parameters, malformed configuration.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the domain of a functional (e.g. a ratio at the zero field).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Numerical failure: non-convergence, variance blow-up, failed calibration.
class DiagnosticError : public std::runtime_error {
 public:
  explicit DiagnosticError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gpgibbs
