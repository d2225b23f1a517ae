#pragma once

// Linear inequalities over the output weights W (and the shared relaxation
// delta) that enforce the barrier and Lyapunov conditions at sample points.

#include "safeflow/barrier.hpp"
#include "safeflow/core.hpp"
#include "safeflow/elm.hpp"

#include <cmath>

namespace safeflow {

struct LearnConfig {
  double gamma = 2.0;   // barrier gain, eta(h) = gamma * h
  double rho = 5.0;     // Lyapunov decay, beta(x) = rho ||x - x*||^2
  double tau = 1e-9;    // discretisation resolution in the tightening terms
  double mu_W = 0.01;   // ridge weight
  double p = 1e-3;      // relaxation penalty
  double L_f = 0.01;    // Lipschitz constant of the true field
  double L_V = 0.01;    // Lipschitz constant of the Lyapunov function
  BoundEstimates bounds;
  Vector x_star;

  void validate() const {
    require(gamma > 0.0 && rho > 0.0 && tau > 0.0 && L_f > 0.0 && L_V > 0.0,
            "gamma, rho, tau, L_f and L_V must be positive");
    require(mu_W >= 0.0 && p >= 0.0, "mu_W and p must be nonnegative");
    require(std::isfinite(gamma) && std::isfinite(rho) && std::isfinite(tau) && std::isfinite(mu_W) &&
                std::isfinite(p) && std::isfinite(L_f) && std::isfinite(L_V),
            "learning constants must be finite");
    require(x_star.size() >= 1 && x_star.allFinite(), "equilibrium is unset");
  }
};

/// <coeff_W, W> <= rhs + delta_coeff * delta
struct LinearInequality {
  Matrix coeff_W;
  double delta_coeff = 0.0;
  double rhs = 0.0;

  double lhs(const Matrix& W) const { return coeff_W.cwiseProduct(W).sum(); }
  bool satisfied(const Matrix& W, double delta, double tol = 0.0) const {
    return lhs(W) <= rhs + delta_coeff * delta + tol;
  }
};

/// Safety tightening margin
///   E = (L_dh (W_bar g_bar + eps_bar) + L_h (L_f + gamma)) tau / 2 + L_h eps_bar.
inline double safety_margin(const LearnConfig& cfg, const LipschitzData& lip) {
  const auto& b = cfg.bounds;
  return (lip.L_dh * (b.w_bar * b.g_bar + b.eps_bar) + lip.L_h * (cfg.L_f + cfg.gamma)) * cfg.tau / 2.0 +
         lip.L_h * b.eps_bar;
}

/// Per-point Lyapunov tightening L_V(x_j) * tau / 2. The mean-value point in
/// the bound on grad(V-dot) is replaced by ||x_j - x*|| + tau / 2.
inline double lyapunov_tightening(const Vector& x_j, const LearnConfig& cfg) {
  require(x_j.size() == cfg.x_star.size(), "sample dimension does not match equilibrium");
  const auto& b = cfg.bounds;
  const double dist = (x_j - cfg.x_star).norm();
  const double n_h = std::max(0.0, b.g_bar * b.g_bar - 1.0);
  const double xi_dist = dist + cfg.tau / 2.0;
  const double L_vdot =
      b.w_bar * b.g_bar + b.eps_bar + xi_dist * (b.a_bar * std::sqrt(n_h) * b.w_nh_bar * b.u_bar / 4.0 + b.eps_prime_bar);
  // sqrt(2 V(x_j)) with V = ||x_j - x*||^2 / 2 is just the distance.
  const double L_V_total = L_vdot + 2.0 * cfg.rho * cfg.L_V + dist * b.eps_prime_bar + b.eps_bar;
  return L_V_total * cfg.tau / 2.0;
}

/// -grad h(x_j)^T W^T g_j - gamma h(x_j) <= -E
inline LinearInequality build_safety_row(const Vector& x_j, const Vector& g_j, const BarrierSpec& spec,
                                         const LearnConfig& cfg, const LipschitzData& lip) {
  LinearInequality row;
  row.coeff_W = -g_j * grad_h(x_j, spec).transpose();
  row.rhs = cfg.gamma * h(x_j, spec) - safety_margin(cfg, lip);
  row.delta_coeff = 0.0;
  return row;
}

/// (x_j - x*)^T W^T g_j <= -rho ||x_j - x*||^2 - L_V tau / 2 + delta
inline LinearInequality build_stability_row(const Vector& x_j, const Vector& g_j, const LearnConfig& cfg) {
  require(x_j.size() == cfg.x_star.size(), "sample dimension does not match equilibrium");
  const Vector d = x_j - cfg.x_star;
  LinearInequality row;
  row.coeff_W = g_j * d.transpose();
  row.rhs = -cfg.rho * d.squaredNorm() - lyapunov_tightening(x_j, cfg);
  row.delta_coeff = 1.0;
  return row;
}

}  // namespace safeflow
