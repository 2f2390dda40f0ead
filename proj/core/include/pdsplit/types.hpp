#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pdsplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dimension mismatches between vectors/operators.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& ctx, Index expected, Index got)
      : Error(ctx + ": dimension mismatch, expected " +
              std::to_string(expected) + ", got " + std::to_string(got)) {}
};

inline void check_dim(const char* ctx, Index expected, Index got) {
  if (expected != got) throw DimensionError(ctx, expected, got);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace pdsplit
