#pragma once

// Training pipeline: ELM initialisation, intrinsic-plasticity pretraining,
// ridge baseline, bound estimation, constraint sampling, and the constrained
// QP over (vec(W), delta).

#include "safeflow/barrier.hpp"
#include "safeflow/constraints.hpp"
#include "safeflow/core.hpp"
#include "safeflow/elm.hpp"
#include "safeflow/qp.hpp"
#include "safeflow/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace safeflow {

struct TrainDiagnostics {
  double objective = 0.0;     // E_D + p delta^2
  double data_term = 0.0;     // E_D = sum ||xdot - W^T g||^2 + mu_W tr(W^T W)
  double ridge_data_term = 0.0;
  int sample_count = 0;
  int safety_rows = 0;
  int stability_rows = 0;
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double safety_margin = 0.0;
  double demo_dt = 0.0;
};

struct LearnedModel {
  ElmParams params;
  double delta_star = 0.0;
  LearnConfig cfg;
  BarrierSpec spec;
  TrainDiagnostics diagnostics;

  Vector operator()(const Vector& x) const { return eval(x, params); }
};

/// Which constraint families enter the QP.
struct RowSelection {
  bool safety = true;
  bool stability = true;
};

/// States fed to intrinsic-plasticity pretraining.
enum class BipInputs {
  demo_states,             // raw time-sampled demonstration states
  equidistant_demo_states  // each demonstration resampled evenly in arc length
};

struct TrainSettings {
  int n_h = 25;
  double mu_exp = 0.2;
  bool bip = true;
  BipInputs bip_inputs = BipInputs::equidistant_demo_states;
  double safety_factor = 1.5;
  RowSelection rows;
  QpSettings qp;
};

namespace detail {

inline void validate_demos(const std::vector<Trajectory>& demos) {
  require(!demos.empty(), "no demonstrations given");
  const auto n = demos.front().dim();
  for (const auto& d : demos) {
    d.validate(1);
    require(d.dim() == n, "demonstrations have different dimensions");
    require(d.has_derivatives(), "demonstration lacks derivatives; compute them first");
  }
}

/// Index of W(i, j) inside the decision vector (column-major vec).
inline Eigen::Index w_index(Eigen::Index i, Eigen::Index j, Eigen::Index rows) { return j * rows + i; }

}  // namespace detail

/// Mean of the demonstrations' final states.
inline Vector default_equilibrium(const std::vector<Trajectory>& demos) {
  require(!demos.empty(), "no demonstrations given");
  Vector sum = Vector::Zero(demos.front().dim());
  for (const auto& d : demos) {
    require(!d.states.empty(), "empty demonstration");
    sum += d.states.back();
  }
  return sum / static_cast<double>(demos.size());
}

/// QP over z = vec(W) (+) delta encoding
///   sum_t ||xdot_t - W^T g_t||^2 + mu_W tr(W^T W) + p delta^2
/// subject to the selected safety rows, stability rows, and -delta <= 0.
inline QpProblem assemble_qp(const std::vector<Trajectory>& demos, const ElmParams& params, const BarrierSpec& spec,
                             const LearnConfig& cfg, const std::vector<Vector>& sample_points,
                             RowSelection rows = {}) {
  detail::validate_demos(demos);
  params.validate();
  spec.validate();
  cfg.validate();
  require(!sample_points.empty(), "no constraint sample points given");
  require(demos.front().dim() == params.n() && spec.dim() == params.n() && cfg.x_star.size() == params.n(),
          "demonstration, network, barrier and equilibrium dimensions disagree");

  const auto n = params.n();
  const auto rows_w = params.n_h() + 1;
  const auto nw = rows_w * n;
  const auto dim = nw + 1;

  const auto [G, Y] = stack_samples(demos, params);
  Matrix gram = G.transpose() * G;
  gram.diagonal().array() += cfg.mu_W;
  const Matrix GtY = G.transpose() * Y;

  QpProblem qp;
  qp.H = Matrix::Zero(dim, dim);
  qp.f = Vector::Zero(dim);
  for (Eigen::Index j = 0; j < n; ++j) {
    qp.H.block(j * rows_w, j * rows_w, rows_w, rows_w) = 2.0 * gram;
    qp.f.segment(j * rows_w, rows_w) = -2.0 * GtY.col(j);
  }
  qp.H(nw, nw) = 2.0 * cfg.p;

  const Box box = working_box(spec);
  const LipschitzData lip = lipschitz_constants(spec, box);
  const auto npts = static_cast<Eigen::Index>(sample_points.size());
  const Eigen::Index m = (rows.safety ? npts : 0) + (rows.stability ? npts : 0) + 1;
  qp.A = Matrix::Zero(m, dim);
  qp.b = Vector::Zero(m);

  Eigen::Index r = 0;
  auto put = [&](const LinearInequality& row) {
    qp.A.row(r).head(nw) = Eigen::Map<const Vector>(row.coeff_W.data(), nw).transpose();
    qp.A(r, nw) = -row.delta_coeff;
    qp.b[r] = row.rhs;
    ++r;
  };
  for (const auto& x : sample_points) {
    require(x.size() == n, "sample point has wrong dimension");
    const Vector g = hidden_features(x, params);
    if (rows.safety) put(build_safety_row(x, g, spec, cfg, lip));
    if (rows.stability) put(build_stability_row(x, g, cfg));
  }
  qp.A(r, nw) = -1.0;  // delta >= 0
  qp.b[r] = 0.0;
  return qp;
}

/// sum ||xdot - W^T g||^2 + mu_W tr(W^T W) over all demonstration samples.
inline double data_term(const std::vector<Trajectory>& demos, const ElmParams& params, double mu_W) {
  double total = 0.0;
  for (const auto& d : demos)
    for (std::size_t t = 0; t < d.size(); ++t) total += ((*d.derivatives)[t] - eval(d.states[t], params)).squaredNorm();
  return total + mu_W * params.W.squaredNorm();
}

/// Full pipeline. `cfg.x_star` may be left empty to use the mean of the
/// demonstrations' endpoints; `cfg.bounds` is overwritten with estimates.
inline LearnedModel train(const std::vector<Trajectory>& demos, const BarrierSpec& spec, LearnConfig cfg,
                          SamplePlan plan, std::uint64_t seed, const TrainSettings& settings = {}) {
  detail::validate_demos(demos);
  spec.validate();
  require(settings.n_h >= 1, "hidden width must be positive");
  const auto n = demos.front().dim();
  require(spec.dim() == n, "barrier dimension does not match demonstrations");
  require(std::abs(spec.gamma - cfg.gamma) <= 1e-12 * std::max(1.0, cfg.gamma),
          "barrier gamma and config gamma differ");
  if (cfg.x_star.size() == 0) cfg.x_star = default_equilibrium(demos);
  require(cfg.x_star.size() == n, "equilibrium dimension does not match demonstrations");
  require(h(cfg.x_star, spec) > 0.0, "equilibrium must lie strictly inside the safe set");
  cfg.validate();
  plan.tau = cfg.tau;

  ElmParams params = random_init(static_cast<int>(n), settings.n_h, seed);
  if (settings.bip) {
    std::vector<Vector> inputs;
    for (const auto& d : demos) {
      if (settings.bip_inputs == BipInputs::equidistant_demo_states && d.size() >= 2) {
        const Trajectory even = resample_equidistant(d, static_cast<int>(d.size()));
        inputs.insert(inputs.end(), even.states.begin(), even.states.end());
      } else {
        inputs.insert(inputs.end(), d.states.begin(), d.states.end());
      }
    }
    params = bip_pretrain(std::move(params), inputs, settings.mu_exp, seed + 1);
  }

  {
    const auto [G, Y] = stack_samples(demos, params);
    params.W = ridge_fit(G, Y, cfg.mu_W);
  }
  cfg.bounds = estimate_bounds(params, demos, settings.safety_factor);
  const double ridge_term = data_term(demos, params, cfg.mu_W);

  const Box box = working_box(spec);
  const LipschitzData lip = lipschitz_constants(spec, box);
  const std::vector<Vector> points = sample_constraint_points(spec, plan, box);
  const QpProblem qp = assemble_qp(demos, params, spec, cfg, points, settings.rows);
  const QpSolution sol = QpSolver(settings.qp).solve(qp);

  if (sol.status == QpStatus::infeasible) {
    throw TrainingFailure(
        "constrained training problem is infeasible; enlarge the safe set, reduce rho, or increase n_h");
  }

  LearnedModel model;
  const auto nw = (settings.n_h + 1) * n;
  params.W = Eigen::Map<const Matrix>(sol.z.data(), settings.n_h + 1, n);
  model.params = std::move(params);
  model.delta_star = std::max(0.0, sol.z[nw]);
  model.cfg = cfg;
  model.spec = spec;

  auto& diag = model.diagnostics;
  diag.data_term = data_term(demos, model.params, cfg.mu_W);
  diag.ridge_data_term = ridge_term;
  diag.objective = diag.data_term + cfg.p * model.delta_star * model.delta_star;
  diag.sample_count = static_cast<int>(points.size());
  diag.safety_rows = settings.rows.safety ? diag.sample_count : 0;
  diag.stability_rows = settings.rows.stability ? diag.sample_count : 0;
  diag.status = sol.status;
  diag.iterations = sol.iterations;
  diag.primal_residual = sol.primal_residual;
  diag.dual_residual = sol.dual_residual;
  diag.safety_margin = safety_margin(cfg, lip);
  diag.demo_dt = demos.front().dt;
  return model;
}

}  // namespace safeflow
