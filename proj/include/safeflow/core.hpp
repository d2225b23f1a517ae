#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace safeflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid-input"; }
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "singular"; }
};

class SamplingFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "sampling-failure"; }
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "budget"; }
};

class TrainingFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training-failure"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

/// Axis-aligned box [lower, upper].
struct Box {
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return lower.size(); }
  Vector center() const { return 0.5 * (lower + upper); }
  Vector extent() const { return upper - lower; }

  bool contains(const Vector& x, double tol = 0.0) const {
    return ((x.array() >= lower.array() - tol) &&
            (x.array() <= upper.array() + tol))
        .all();
  }

  /// Box scaled about its center by `factor` (1.2 inflates by 20%).
  Box inflated(double factor) const {
    const Vector c = center();
    const Vector half = 0.5 * factor * extent();
    return {c - half, c + half};
  }

  /// All 2^n corners.
  std::vector<Vector> corners() const {
    const auto n = dim();
    std::vector<Vector> out;
    out.reserve(std::size_t{1} << n);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Vector c(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        c[i] = (mask >> i) & 1u ? upper[i] : lower[i];
      }
      out.push_back(std::move(c));
    }
    return out;
  }
};

}  // namespace safeflow
