#pragma once

#include "safeflow/barrier.hpp"
#include "safeflow/core.hpp"
#include "safeflow/learner.hpp"
#include "safeflow/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>

namespace safeflow {

enum class Integrator { euler, rk4 };

enum class DisturbanceKind { none, gaussian, discrete_push };

/// Additive disturbance. Gaussian noise enters the derivative (i.i.d. per
/// component, redrawn every step and held over the step); a discrete push is
/// a single jump `amplitude * direction` added to the state at `trigger_step`.
struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::none;
  double mean = 0.0;
  double stddev = 0.0;
  double amplitude = 0.0;
  Vector direction;
  std::optional<int> trigger_step;
  std::uint64_t seed = 0;

  void validate(Eigen::Index n) const {
    require(std::isfinite(mean) && std::isfinite(stddev) && stddev >= 0.0, "disturbance std must be >= 0");
    if (kind == DisturbanceKind::discrete_push) {
      require(direction.size() == n, "push direction has wrong dimension");
      require(std::abs(direction.norm() - 1.0) <= 1e-9, "push direction must be a unit vector");
      require(std::isfinite(amplitude), "push amplitude must be finite");
    }
  }

  /// Three-sigma envelope ||mean * 1|| + 3 std sqrt(n) of the derivative
  /// disturbance; zero for disturbance kinds that do not act on the derivative.
  double bound(Eigen::Index n) const {
    if (kind != DisturbanceKind::gaussian) return 0.0;
    const double rn = std::sqrt(static_cast<double>(n));
    return std::abs(mean) * rn + 3.0 * stddev * rn;
  }
};

inline const char* to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::none: return "none";
    case DisturbanceKind::gaussian: return "gaussian";
    case DisturbanceKind::discrete_push: return "discrete-push";
  }
  return "none";
}

/// Raised when integration produces a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, Trajectory partial) : Error(msg), partial_(std::move(partial)) {}
  const char* kind() const noexcept override { return "divergence"; }
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

template <typename Field>
Vector integrate_step(Field&& field, const Vector& x, const Vector& d, double dt, Integrator method) {
  if (method == Integrator::euler) return x + dt * (field(x) + d);
  const Vector k1 = field(x) + d;
  const Vector k2 = field(Vector(x + 0.5 * dt * k1)) + d;
  const Vector k3 = field(Vector(x + 0.5 * dt * k2)) + d;
  const Vector k4 = field(Vector(x + dt * k3)) + d;
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates x' = field(x) + d for `steps` steps; returns steps + 1 states.
template <typename Field>
Trajectory rollout(Field&& field, const Vector& x0, double dt, int steps, Integrator method = Integrator::rk4,
                   const DisturbanceSpec& dist = {}) {
  require(dt > 0.0 && std::isfinite(dt), "rollout dt must be positive");
  require(steps >= 1, "rollout needs at least one step");
  require(x0.allFinite(), "initial state must be finite");
  const auto n = x0.size();
  dist.validate(n);

  std::mt19937_64 rng(dist.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int trigger = -1;
  if (dist.kind == DisturbanceKind::discrete_push) {
    if (dist.trigger_step) {
      trigger = *dist.trigger_step;
    } else {
      trigger = std::uniform_int_distribution<int>(0, steps - 1)(rng);
    }
  }

  Trajectory traj;
  traj.dt = dt;
  traj.source = TrajectorySource::rollout;
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.push_back(x0);
  Vector x = x0;
  Vector d = Vector::Zero(n);
  for (int k = 0; k < steps; ++k) {
    if (k == trigger) {
      x += dist.amplitude * dist.direction;
      traj.states.back() = x;
    }
    if (dist.kind == DisturbanceKind::gaussian) {
      for (Eigen::Index i = 0; i < n; ++i) d[i] = dist.mean + dist.stddev * normal(rng);
    }
    x = integrate_step(field, x, d, dt, method);
    if (!x.allFinite()) throw DivergenceError("rollout diverged at step " + std::to_string(k + 1), traj);
    traj.states.push_back(x);
  }
  return traj;
}

inline Trajectory rollout(const LearnedModel& model, const Vector& x0, double dt, int steps,
                          Integrator method = Integrator::rk4, const DisturbanceSpec& dist = {}) {
  require(x0.size() == model.params.n(), "initial state has wrong dimension");
  return rollout([&model](const Vector& x) { return eval(x, model.params); }, x0, dt, steps, method, dist);
}

struct CertReport {
  double min_slack = std::numeric_limits<double>::infinity();
  Vector argmin;
  double allowance = 0.0;  // eps_bar * L_h
  double pitch = 0.0;
  long points = 0;
  bool pass = false;
};

/// Default certification pitch: safe-set diameter / 400.
inline double default_cert_pitch(const BarrierSpec& spec) { return 2.0 * spec.semi_axes.maxCoeff() / 400.0; }

/// Evaluates grad h(x)^T f(x) + gamma h(x) on a lattice over {h >= 0}. The
/// check passes when the minimum is at least -eps_bar * L_h.
template <typename Field>
CertReport certify_invariance(Field&& field, const BarrierSpec& spec, const LipschitzData& lip, double eps_bar,
                              double pitch, long max_points = 1000000) {
  spec.validate();
  require(pitch > 0.0 && std::isfinite(pitch), "certification pitch must be positive");
  const Box box = bounding_box(spec);
  const auto n = spec.dim();
  std::vector<long> counts(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    counts[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(box.extent()[i] / pitch)) + 1;
    total *= static_cast<double>(counts[static_cast<std::size_t>(i)]);
  }
  if (total > static_cast<double>(max_points))
    throw BudgetExceeded("certification grid has " + std::to_string(static_cast<long long>(total)) +
                         " points; increase the pitch");

  CertReport rep;
  rep.pitch = pitch;
  rep.allowance = eps_bar * lip.L_h;
  rep.argmin = spec.center;
  std::vector<long> idx(static_cast<std::size_t>(n), 0);
  Vector x(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i)
      x[i] = box.lower[i] + pitch * static_cast<double>(idx[static_cast<std::size_t>(i)]);
    const double hv = h(x, spec);
    if (hv >= 0.0) {
      const double slack = grad_h(x, spec).dot(field(x)) + spec.gamma * hv;
      ++rep.points;
      if (slack < rep.min_slack) {
        rep.min_slack = slack;
        rep.argmin = x;
      }
    }
    Eigen::Index k = 0;
    while (k < n && ++idx[static_cast<std::size_t>(k)] == counts[static_cast<std::size_t>(k)]) {
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == n) break;
  }
  rep.pass = rep.points > 0 && rep.min_slack >= -rep.allowance;
  return rep;
}

inline CertReport certify_invariance(const LearnedModel& model, const BarrierSpec& spec, const LipschitzData& lip,
                                     double pitch) {
  return certify_invariance([&model](const Vector& x) { return eval(x, model.params); }, spec, lip,
                            model.cfg.bounds.eps_bar, pitch);
}

struct BoundCheck {
  double max_tail_dist = 0.0;
  bool pass = false;
};

/// Largest distance to x* over the last `window` states.
inline BoundCheck check_ultimate_bound(const Trajectory& traj, const Vector& x_star, int window, double bound) {
  require(window >= 1 && static_cast<std::size_t>(window) <= traj.size(), "window exceeds trajectory length");
  BoundCheck out;
  for (std::size_t k = traj.size() - static_cast<std::size_t>(window); k < traj.size(); ++k) {
    require(traj.states[k].size() == x_star.size(), "equilibrium dimension mismatch");
    out.max_tail_dist = std::max(out.max_tail_dist, (traj.states[k] - x_star).norm());
  }
  out.pass = out.max_tail_dist <= bound;
  return out;
}

}  // namespace safeflow
