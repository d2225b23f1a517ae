#pragma once

// Synthetic planar demonstrations from a linear spiral sink
//   x' = A (x - x*),  A = [[-decay, -spin], [spin, -decay]]
// sampled from the closed-form solution.

#include "safeflow/barrier.hpp"
#include "safeflow/core.hpp"
#include "safeflow/trajectory.hpp"

#include <cmath>
#include <vector>

namespace safeflow {

struct SpiralField {
  Vector x_star = Eigen::Vector2d::Zero();
  double decay = 1.0;
  double spin = 2.0;

  Vector operator()(const Vector& x) const {
    const Vector d = x - x_star;
    return Eigen::Vector2d(-decay * d[0] - spin * d[1], spin * d[0] - decay * d[1]);
  }

  Vector solution(const Vector& x0, double t) const {
    const Vector d = x0 - x_star;
    const double e = std::exp(-decay * t), c = std::cos(spin * t), s = std::sin(spin * t);
    return x_star + e * Eigen::Vector2d(c * d[0] - s * d[1], s * d[0] + c * d[1]);
  }
};

/// One demonstration per start state, `samples` points spaced `dt` apart,
/// with exact derivatives.
inline std::vector<Trajectory> spiral_demonstrations(const SpiralField& field, const std::vector<Vector>& starts,
                                                     double dt, int samples) {
  require(samples >= 2 && dt > 0.0, "spiral demonstrations need dt > 0 and at least two samples");
  std::vector<Trajectory> demos;
  for (const auto& x0 : starts) {
    require(x0.size() == 2, "spiral demonstrations are planar");
    Trajectory tr;
    tr.dt = dt;
    tr.source = TrajectorySource::demonstration;
    tr.derivatives.emplace();
    for (int k = 0; k < samples; ++k) {
      const Vector x = field.solution(x0, dt * k);
      tr.states.push_back(x);
      tr.derivatives->push_back(field(x));
    }
    demos.push_back(std::move(tr));
  }
  return demos;
}

/// Planar test problem: a slow, rotation-dominated spiral inside an ellipse
/// with semi-axes (1, 0.6). Demonstrations start at 85% of the boundary
/// radius and stay inside; the true field itself leaves the ellipse from
/// some starts near the boundary.
struct SpiralScenario {
  SpiralField field;
  BarrierSpec spec;
  std::vector<Vector> starts;
  double dt = 0.01;
  int samples = 1000;

  std::vector<Trajectory> demonstrations() const { return spiral_demonstrations(field, starts, dt, samples); }
};

inline SpiralScenario reference_spiral_scenario() {
  SpiralScenario s;
  s.field.x_star = Eigen::Vector2d(0.1, 0.0);
  s.field.decay = 0.5;
  s.field.spin = 3.0;
  s.spec = BarrierSpec::ellipse(Eigen::Vector2d::Zero(), 1.0, 0.6, 0.0, 2.0);
  for (double angle : {1.3, 1.7, 2.0, 4.4, 5.0})
    s.starts.push_back(Eigen::Vector2d(0.85 * std::cos(angle), 0.85 * 0.6 * std::sin(angle)));
  return s;
}

}  // namespace safeflow
