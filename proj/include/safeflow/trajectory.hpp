#pragma once

#include "safeflow/core.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace safeflow {

enum class TrajectorySource { demonstration, rollout };

/// Time-stamped state sequence sampled at a uniform step `dt`.
struct Trajectory {
  double dt = 0.0;
  std::vector<Vector> states;
  std::optional<std::vector<Vector>> derivatives;
  TrajectorySource source = TrajectorySource::demonstration;

  std::size_t size() const { return states.size(); }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }
  bool has_derivatives() const { return derivatives.has_value(); }

  /// Throws InvalidInput when the structural invariants do not hold.
  void validate(std::size_t min_states = 2) const {
    require(dt > 0.0 && std::isfinite(dt), "trajectory dt must be positive");
    require(states.size() >= min_states, "trajectory has too few states");
    const auto n = dim();
    require(n >= 1, "trajectory states are empty vectors");
    for (const auto& s : states) {
      require(s.size() == n, "trajectory states have inconsistent dimension");
      require(s.allFinite(), "trajectory contains non-finite states");
    }
    if (derivatives) {
      require(derivatives->size() == states.size(),
              "derivative count does not match state count");
      for (const auto& d : *derivatives) {
        require(d.size() == n, "derivatives have inconsistent dimension");
        require(d.allFinite(), "trajectory contains non-finite derivatives");
      }
    }
  }
};

namespace detail {

inline std::vector<double> arc_length(const std::vector<Vector>& s) {
  std::vector<double> cum(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) cum[i] = cum[i - 1] + (s[i] - s[i - 1]).norm();
  return cum;
}

/// Points at the given arc-length fractions (ascending, in [0, 1]) along the
/// polyline of `traj`. Fraction 0 and 1 map exactly onto the end states.
inline Trajectory resample_at_fractions(const Trajectory& traj, const std::vector<double>& fractions) {
  const auto& s = traj.states;
  const std::vector<double> cum = arc_length(s);
  const double total = cum.back();
  const auto count = fractions.size();

  Trajectory out;
  out.source = traj.source;
  out.dt = traj.dt * static_cast<double>(traj.size() - 1) / static_cast<double>(count - 1);
  out.states.reserve(count);
  if (total <= 0.0) {
    out.states.assign(count, s.front());
    return out;
  }
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double f = fractions[k];
    if (f <= 0.0) {
      out.states.push_back(s.front());
      continue;
    }
    if (f >= 1.0) {
      out.states.push_back(s.back());
      continue;
    }
    const double target = total * f;
    while (seg + 1 < s.size() - 1 && cum[seg + 1] < target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double w = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    out.states.push_back((1.0 - w) * s[seg] + w * s[seg + 1]);
  }
  return out;
}

}  // namespace detail

/// `count` points equally spaced in arc length along the polyline of `traj`;
/// end points are kept exactly. A path of zero length gives `count` copies.
inline Trajectory resample_equidistant(const Trajectory& traj, int count) {
  require(traj.size() >= 2, "resampling needs at least two states");
  require(count >= 2, "resampling needs at least two output points");
  std::vector<double> fr(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) fr[static_cast<std::size_t>(k)] = static_cast<double>(k) / (count - 1);
  fr.back() = 1.0;
  return detail::resample_at_fractions(traj, fr);
}

/// Resamples `traj` at the relative arc-length positions of `reference`'s
/// points, so the result has reference.size() points. Equals
/// resample_equidistant when `reference` is itself equidistant; falls back to
/// it when `reference` has zero length. A path already at those positions
/// comes back unchanged.
inline Trajectory resample_like(const Trajectory& traj, const Trajectory& reference) {
  require(traj.size() >= 2 && reference.size() >= 2, "resampling needs at least two states");
  const std::vector<double> cum = detail::arc_length(reference.states);
  if (cum.back() <= 0.0) return resample_equidistant(traj, static_cast<int>(reference.size()));
  auto fractions = [](const std::vector<double>& c) {
    std::vector<double> fr(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) fr[i] = c.back() > 0.0 ? c[i] / c.back() : 0.0;
    fr.back() = 1.0;
    return fr;
  };
  const std::vector<double> fr = fractions(cum);
  // Already at the requested positions: return it untouched.
  if (fractions(detail::arc_length(traj.states)) == fr) return traj;
  return detail::resample_at_fractions(traj, fr);
}

inline const char* to_string(TrajectorySource s) {
  return s == TrajectorySource::demonstration ? "demonstration" : "rollout";
}

}  // namespace safeflow
