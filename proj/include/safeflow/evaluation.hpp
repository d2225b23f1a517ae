#pragma once

// Reproduction accuracy (swept error area) and Monte Carlo robustness runs.

#include "safeflow/barrier.hpp"
#include "safeflow/core.hpp"
#include "safeflow/learner.hpp"
#include "safeflow/simulator.hpp"
#include "safeflow/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace safeflow {

namespace detail {

inline double tri_area(const Vector& a, const Vector& b, const Vector& c) {
  return 0.5 * std::abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

/// Area of the quadrilateral (p0, p1, p2, p3) as the mean of the two
/// diagonal splits, each a sum of absolute triangle areas. Exact for simple
/// convex quadrilaterals; symmetric under reversing the corner order.
inline double quad_area(const Vector& p0, const Vector& p1, const Vector& p2, const Vector& p3) {
  const double split_02 = tri_area(p0, p1, p2) + tri_area(p0, p2, p3);
  const double split_13 = tri_area(p1, p2, p3) + tri_area(p1, p3, p0);
  return 0.5 * (split_02 + split_13);
}

}  // namespace detail

/// Sum of quadrilateral areas between two equally long planar paths.
inline double swept_error_area(const Trajectory& demo, const Trajectory& repro) {
  require(demo.size() == repro.size(), "paths must have the same number of points");
  if (demo.size() < 2) return 0.0;
  require(demo.dim() == 2 && repro.dim() == 2, "swept error area is defined for planar paths");
  double area = 0.0;
  for (std::size_t t = 0; t + 1 < demo.size(); ++t) {
    area += detail::quad_area(repro.states[t], repro.states[t + 1], demo.states[t + 1], demo.states[t]);
  }
  return area;
}

/// Mean swept error area over demonstrations. Each reproduction is first
/// resampled to its demonstration's length, at the demonstration's relative
/// arc-length positions.
inline double sea(const std::vector<Trajectory>& demos, const std::vector<Trajectory>& reproductions) {
  require(demos.size() == reproductions.size(), "demonstration and reproduction counts differ");
  require(!demos.empty(), "no demonstrations given");
  double total = 0.0;
  for (std::size_t k = 0; k < demos.size(); ++k) {
    const auto& demo = demos[k];
    if (demo.size() < 2 || reproductions[k].size() < 2) continue;
    const Trajectory r = resample_like(reproductions[k], demo);
    total += swept_error_area(demo, r);
  }
  return total / static_cast<double>(demos.size());
}

/// Rolls the model out from each demonstration's first state for the same
/// number of steps and step size.
template <typename Field>
std::vector<Trajectory> reproduce(Field&& field, const std::vector<Trajectory>& demos,
                                  Integrator method = Integrator::rk4) {
  std::vector<Trajectory> out;
  out.reserve(demos.size());
  for (const auto& d : demos) {
    d.validate(2);
    out.push_back(rollout(field, d.states.front(), d.dt, static_cast<int>(d.size()) - 1, method));
  }
  return out;
}

inline std::vector<Trajectory> reproduce(const LearnedModel& model, const std::vector<Trajectory>& demos,
                                         Integrator method = Integrator::rk4) {
  return reproduce([&model](const Vector& x) { return eval(x, model.params); }, demos, method);
}

struct MonteCarloRun {
  std::uint64_t seed = 0;
  Vector start;
  double tail_max = 0.0;
  double bound = 0.0;
  bool success = false;
  bool diverged = false;
};

struct MonteCarloReport {
  int runs = 0;
  double mu_ub = 0.0;
  double mu_lim = 0.0;
  double success_rate = 0.0;
  int window = 0;
  int steps = 0;
  std::vector<MonteCarloRun> records;
};

struct MonteCarloOptions {
  int runs = 100;
  int steps = 1000;
  int window = 10;  // last 10 of 1000 states
  double dt = 0.01;
  std::uint64_t base_seed = 0;
  Integrator method = Integrator::rk4;
  /// Start states cycled over runs; empty means a random interior start per run.
  std::vector<Vector> starts;
};

/// Random point with h(x) > 0, uniform over the safe set.
inline Vector random_interior_point(const BarrierSpec& spec, std::mt19937_64& rng) {
  const Box box = bounding_box(spec);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (Eigen::Index i = 0; i < spec.dim(); ++i) axes.emplace_back(box.lower[i], box.upper[i]);
  Vector x(spec.dim());
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    for (Eigen::Index i = 0; i < spec.dim(); ++i) x[i] = axes[static_cast<std::size_t>(i)](rng);
    if (h(x, spec) > 0.0) return x;
  }
  throw SamplingFailure("could not draw an interior point");
}

/// Per run i the disturbance seed is base_seed + i; the ultimate bound is
/// (eps_bar + d_bar) / rho. Divergent runs count as failures.
template <typename Field>
MonteCarloReport monte_carlo(Field&& field, const BarrierSpec& spec, const LearnConfig& cfg,
                             const DisturbanceSpec& dist, const MonteCarloOptions& opt) {
  require(opt.runs >= 1, "Monte Carlo needs at least one run");
  require(opt.steps >= 1 && opt.window >= 1 && opt.window <= opt.steps + 1, "invalid step/window combination");
  require(cfg.rho > 0.0, "rho must be positive");
  const auto n = spec.dim();
  const double bound = (cfg.bounds.eps_bar + dist.bound(n)) / cfg.rho;

  MonteCarloReport rep;
  rep.runs = opt.runs;
  rep.window = opt.window;
  rep.steps = opt.steps;
  int successes = 0;
  for (int i = 0; i < opt.runs; ++i) {
    MonteCarloRun run;
    run.seed = opt.base_seed + static_cast<std::uint64_t>(i);
    if (opt.starts.empty()) {
      std::mt19937_64 rng(run.seed);
      run.start = random_interior_point(spec, rng);
    } else {
      run.start = opt.starts[static_cast<std::size_t>(i) % opt.starts.size()];
    }
    run.bound = bound;
    DisturbanceSpec d = dist;
    d.seed = run.seed;
    try {
      const Trajectory traj = rollout(field, run.start, opt.dt, opt.steps, opt.method, d);
      const auto chk = check_ultimate_bound(traj, cfg.x_star, opt.window, bound);
      run.tail_max = chk.max_tail_dist;
      run.success = chk.pass;
    } catch (const DivergenceError&) {
      run.diverged = true;
      run.tail_max = std::numeric_limits<double>::infinity();
      run.success = false;
    }
    successes += run.success ? 1 : 0;
    rep.mu_ub += run.bound;
    rep.mu_lim += run.tail_max;
    rep.records.push_back(std::move(run));
  }
  rep.mu_ub /= opt.runs;
  rep.mu_lim /= opt.runs;
  rep.success_rate = static_cast<double>(successes) / opt.runs;
  return rep;
}

inline MonteCarloReport monte_carlo(const LearnedModel& model, const DisturbanceSpec& dist,
                                    const MonteCarloOptions& opt) {
  return monte_carlo([&model](const Vector& x) { return eval(x, model.params); }, model.spec, model.cfg, dist, opt);
}

}  // namespace safeflow
