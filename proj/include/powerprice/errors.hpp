#pragma once

#include <stdexcept>
#include <string>

namespace powerprice {

// Input outside the mathematical domain of an operation (t > T, negative
// volatility, degenerate bivariate direction, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Valid inputs that a particular routine does not handle, e.g. real-world
// reweighting with |rho| == 1.
class UnsupportedConfiguration : public std::runtime_error {
 public:
  explicit UnsupportedConfiguration(const std::string& what) : std::runtime_error(what) {}
};

// A numerical result that should be impossible for valid inputs.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace powerprice
