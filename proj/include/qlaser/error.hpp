#pragma once

#include <stdexcept>
#include <string>

namespace qlaser {

// Bad input: invalid parameters, malformed experiment spec, out-of-range index.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// The numerics failed at runtime: divergence, non-convergence, certification failure.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace qlaser
