#pragma once

// Ellipse / ellipsoid zeroing barrier functions
//
//   h(x) = 1 - (x - x_g)^T Q (x - x_g),   Q = R^T diag(1 / iota^2) R
//
// The safe set is {h >= 0}; h equals 1 at the center and 0 on the boundary.

#include "safeflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace safeflow {

enum class BarrierKind { ellipse2d, ellipsoidNd };

struct BarrierSpec {
  BarrierKind kind = BarrierKind::ellipse2d;
  Vector center;
  Vector semi_axes;
  double rotation = 0.0;  // radians, ellipse2d only
  double gamma = 2.0;     // linear extended class-K gain

  Eigen::Index dim() const { return center.size(); }

  void validate() const {
    require(center.size() >= 1 && center.allFinite(), "barrier center is invalid");
    require(semi_axes.size() == center.size(), "barrier semi-axes do not match center dimension");
    require((semi_axes.array() > 0.0).all() && semi_axes.allFinite(), "semi-axes must be positive");
    require(gamma > 0.0 && std::isfinite(gamma), "barrier gain gamma must be positive");
    require(std::isfinite(rotation), "barrier rotation must be finite");
    if (kind == BarrierKind::ellipse2d) require(center.size() == 2, "ellipse2d barrier must be 2-D");
  }

  /// Quadratic-form matrix Q.
  Matrix shape_matrix() const {
    const Vector inv_sq = semi_axes.array().square().inverse();
    if (kind == BarrierKind::ellipsoidNd) return inv_sq.asDiagonal();
    const double c = std::cos(rotation), s = std::sin(rotation);
    Matrix R(2, 2);
    R << c, s, -s, c;
    return R.transpose() * inv_sq.asDiagonal() * R;
  }

  static BarrierSpec ellipse(const Vector& center, double iota1, double iota2, double alpha,
                             double gamma = 2.0) {
    BarrierSpec s;
    s.kind = BarrierKind::ellipse2d;
    s.center = center;
    s.semi_axes = Eigen::Vector2d(iota1, iota2);
    s.rotation = alpha;
    s.gamma = gamma;
    return s;
  }

  static BarrierSpec ellipsoid(const Vector& center, const Vector& semi_axes, double gamma = 2.0) {
    BarrierSpec s;
    s.kind = BarrierKind::ellipsoidNd;
    s.center = center;
    s.semi_axes = semi_axes;
    s.gamma = gamma;
    return s;
  }
};

inline const char* to_string(BarrierKind k) {
  return k == BarrierKind::ellipse2d ? "ellipse2d" : "ellipsoidNd";
}

inline double h(const Vector& x, const BarrierSpec& spec) {
  require(x.size() == spec.dim(), "state dimension does not match barrier");
  const Vector d = x - spec.center;
  if (spec.kind == BarrierKind::ellipsoidNd) {
    return 1.0 - (d.array() / spec.semi_axes.array()).square().sum();
  }
  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  const double along = c * d[0] + s * d[1];
  const double across = -s * d[0] + c * d[1];
  return 1.0 - along * along / (spec.semi_axes[0] * spec.semi_axes[0]) -
         across * across / (spec.semi_axes[1] * spec.semi_axes[1]);
}

inline Vector grad_h(const Vector& x, const BarrierSpec& spec) {
  require(x.size() == spec.dim(), "state dimension does not match barrier");
  return -2.0 * spec.shape_matrix() * (x - spec.center);
}

/// Tight axis-aligned box around {h >= 0}: half-width_i = sqrt((Q^-1)_ii).
inline Box bounding_box(const BarrierSpec& spec) {
  const Matrix Qinv = spec.shape_matrix().inverse();
  const Vector half = Qinv.diagonal().cwiseSqrt();
  return {spec.center - half, spec.center + half};
}

/// Working region: the safe set's bounding box inflated by 20%.
inline Box working_box(const BarrierSpec& spec) { return bounding_box(spec).inflated(1.2); }

struct LipschitzData {
  double L_h = 0.0;   // bound on ||grad h|| over the box
  double L_dh = 0.0;  // Lipschitz constant of grad h
  Box box;
};

inline LipschitzData lipschitz_constants(const BarrierSpec& spec, const Box& box) {
  spec.validate();
  require(box.dim() == spec.dim(), "box dimension does not match barrier");
  require((box.upper.array() >= box.lower.array()).all(), "box is empty");
  constexpr double kFloor = 1e-6;
  LipschitzData lip;
  lip.box = box;
  // grad h is affine, so its norm peaks at a corner.
  for (const auto& c : box.corners()) lip.L_h = std::max(lip.L_h, grad_h(c, spec).norm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(spec.shape_matrix(), Eigen::EigenvaluesOnly);
  lip.L_dh = 2.0 * es.eigenvalues().maxCoeff();
  lip.L_h = std::max(lip.L_h, kFloor);
  lip.L_dh = std::max(lip.L_dh, kFloor);
  return lip;
}

/// max |h| over the box (h is concave: max at the clamped center, min at a corner).
inline double max_abs_h(const BarrierSpec& spec, const Box& box) {
  double m = std::abs(h(spec.center.cwiseMax(box.lower).cwiseMin(box.upper), spec));
  for (const auto& c : box.corners()) m = std::max(m, std::abs(h(c, spec)));
  return m;
}

/// max h - min h over the box.
inline double h_range(const BarrierSpec& spec, const Box& box) {
  const double top = h(spec.center.cwiseMax(box.lower).cwiseMin(box.upper), spec);
  double bottom = top;
  for (const auto& c : box.corners()) bottom = std::min(bottom, h(c, spec));
  return top - bottom;
}

enum class SampleStrategy { grid, uniform_random };

struct SamplePlan {
  SampleStrategy strategy = SampleStrategy::uniform_random;
  double tau = 1e-9;                 // tightening resolution used in the margins
  int count = 1000;                  // random strategy
  std::optional<double> kappa_d;     // collar; default 0.05 * max|h| over the box
  double grid_pitch = 0.0;           // grid strategy; <= 0 derives a pitch from `count`
  std::uint64_t seed = 0;

  void validate() const {
    require(tau > 0.0, "sampling tau must be positive");
    if (strategy == SampleStrategy::uniform_random) require(count >= 1, "sample count must be positive");
    if (kappa_d) require(*kappa_d >= 0.0, "collar margin must be nonnegative");
  }
};

inline double default_kappa(const BarrierSpec& spec, const Box& box) {
  return 0.05 * max_abs_h(spec, box);
}

/// Points in {h >= -kappa_d} drawn from `box`, either on a lattice or by
/// rejection sampling.
inline std::vector<Vector> sample_constraint_points(const BarrierSpec& spec, const SamplePlan& plan,
                                                    const Box& box) {
  spec.validate();
  plan.validate();
  require(box.dim() == spec.dim(), "box dimension does not match barrier");
  const double kappa = plan.kappa_d.value_or(default_kappa(spec, box));
  const auto n = spec.dim();
  std::vector<Vector> out;

  if (plan.strategy == SampleStrategy::grid) {
    double pitch = plan.grid_pitch;
    if (pitch <= 0.0) {
      const double volume = box.extent().prod();
      pitch = std::pow(volume / std::max(plan.count, 1), 1.0 / static_cast<double>(n));
    }
    require(pitch > 0.0, "grid pitch must be positive");
    std::vector<long> counts(static_cast<std::size_t>(n));
    double total = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      counts[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(box.extent()[i] / pitch)) + 1;
      total *= static_cast<double>(counts[static_cast<std::size_t>(i)]);
    }
    if (total > 1e7) throw BudgetExceeded("constraint grid exceeds 1e7 points");
    std::vector<long> idx(static_cast<std::size_t>(n), 0);
    Vector x(n);
    while (true) {
      for (Eigen::Index i = 0; i < n; ++i) x[i] = box.lower[i] + pitch * static_cast<double>(idx[static_cast<std::size_t>(i)]);
      if (h(x, spec) >= -kappa) out.push_back(x);
      Eigen::Index k = 0;
      while (k < n && ++idx[static_cast<std::size_t>(k)] == counts[static_cast<std::size_t>(k)]) {
        idx[static_cast<std::size_t>(k)] = 0;
        ++k;
      }
      if (k == n) break;
    }
    return out;
  }

  std::mt19937_64 rng(plan.seed);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (Eigen::Index i = 0; i < n; ++i) axes.emplace_back(box.lower[i], box.upper[i]);
  out.reserve(static_cast<std::size_t>(plan.count));
  std::size_t trials = 0;
  Vector x(n);
  while (out.size() < static_cast<std::size_t>(plan.count)) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = axes[static_cast<std::size_t>(i)](rng);
    ++trials;
    if (h(x, spec) >= -kappa) out.push_back(x);
    if (trials >= 1000 && static_cast<double>(out.size()) < 1e-3 * static_cast<double>(trials))
      throw SamplingFailure("rejection sampling acceptance rate below 0.1%");
  }
  return out;
}

enum class Region { interior, boundary, exterior };

inline Region classify(const Vector& x, const BarrierSpec& spec, double tol) {
  require(tol >= 0.0, "classification tolerance must be nonnegative");
  const double v = h(x, spec);
  if (v > tol) return Region::interior;
  if (v < -tol) return Region::exterior;
  return Region::boundary;
}

}  // namespace safeflow
