#pragma once

// Dense convex QP solver
//
//   minimize    1/2 z^T H z + f^T z
//   subject to  A z <= b
//
// Operator splitting (ADMM) over z and the constraint slack with
// over-relaxation, Ruiz equilibration, residual-balancing penalty updates,
// primal-infeasibility detection, and an active-set polishing step that
// turns a moderately accurate ADMM iterate into a KKT point.

#include "safeflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace safeflow {

struct QpProblem {
  Matrix H;
  Vector f;
  Matrix A;
  Vector b;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_constraints() const { return A.rows(); }

  void validate() const {
    const auto d = H.rows();
    require(H.cols() == d && f.size() == d, "QP objective dimensions are inconsistent");
    require(A.cols() == d || A.rows() == 0, "QP constraint matrix has wrong column count");
    require(A.rows() == b.size(), "QP constraint rows and bound length differ");
    require(H.allFinite() && f.allFinite() && A.allFinite() && b.allFinite(), "QP data must be finite");
    const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
    require(d == 0 || asym <= 1e-10 * std::max(1.0, H.cwiseAbs().maxCoeff()), "QP Hessian is not symmetric");
  }

  double objective(const Vector& z) const { return 0.5 * z.dot(H * z) + f.dot(z); }
};

enum class QpStatus { optimal, max_iterations, infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iterations: return "max-iterations";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct QpSolution {
  Vector z;
  Vector y;  // constraint multipliers, y >= 0
  QpStatus status = QpStatus::max_iterations;
  double objective = 0.0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool polished = false;
  /// ADMM fixed-point residual per iteration (only when requested).
  std::vector<double> residual_history;
};

struct QpSettings {
  double eps_primal = 1e-8;
  double eps_dual = 1e-8;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int adaptive_interval = 25;
  int check_interval = 5;
  int scaling_iters = 10;
  bool polish = true;
  double eps_infeasible = 1e-5;
  bool record_history = false;
};

namespace detail {

struct ScaledQp {
  Matrix P, A;
  Vector q, b;
  Vector D, E;  // variable / constraint scaling
  double c = 1.0;
};

inline ScaledQp ruiz_scale(const QpProblem& p, int iters) {
  ScaledQp s;
  const auto d = p.num_vars();
  const auto m = p.num_constraints();
  s.P = p.H;
  s.A = p.A;
  s.q = p.f;
  s.b = p.b;
  s.D = Vector::Ones(d);
  s.E = Vector::Ones(m);
  auto clamp_scale = [](double v) {
    if (!(v > 1e-4)) return 1.0;
    return 1.0 / std::sqrt(std::min(v, 1e4));
  };
  for (int it = 0; it < iters; ++it) {
    Vector dD(d), dE(m);
    for (Eigen::Index j = 0; j < d; ++j) {
      double nrm = s.P.col(j).cwiseAbs().maxCoeff();
      if (m > 0) nrm = std::max(nrm, s.A.col(j).cwiseAbs().maxCoeff());
      dD[j] = clamp_scale(nrm);
    }
    for (Eigen::Index i = 0; i < m; ++i) dE[i] = clamp_scale(s.A.row(i).cwiseAbs().maxCoeff());
    s.P = dD.asDiagonal() * s.P * dD.asDiagonal();
    s.A = dE.asDiagonal() * s.A * dD.asDiagonal();
    s.q = dD.cwiseProduct(s.q);
    s.b = dE.cwiseProduct(s.b);
    s.D = s.D.cwiseProduct(dD);
    s.E = s.E.cwiseProduct(dE);
  }
  double col_mean = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) col_mean += s.P.col(j).cwiseAbs().maxCoeff();
  col_mean = d > 0 ? col_mean / static_cast<double>(d) : 0.0;
  const double qn = d > 0 ? s.q.cwiseAbs().maxCoeff() : 0.0;
  const double cn = std::max(col_mean, qn);
  s.c = cn > 1e-4 ? 1.0 / std::min(cn, 1e4) : 1.0;
  s.P *= s.c;
  s.q *= s.c;
  return s;
}

inline double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

/// Unscaled residuals: primal ||Az - s||_inf / (1 + ||b||_inf) where s <= b
/// is the slack, dual ||Hz + f + A^T y||_inf relative to its term sizes.
inline Residuals unscaled_residuals(const QpProblem& p, const Vector& z, const Vector& slack, const Vector& y) {
  Residuals r;
  if (p.num_constraints() > 0) {
    const Vector Az = p.A * z;
    const Vector violation = (Az - slack).cwiseAbs().cwiseMax((Az - p.b).cwiseMax(0.0));
    r.primal = inf_norm(violation) / (1.0 + inf_norm(p.b));
  }
  const Vector Hz = p.H * z;
  const Vector Aty = p.num_constraints() > 0 ? Vector(p.A.transpose() * y) : Vector::Zero(z.size());
  const double scale = 1.0 + std::max({inf_norm(Hz), inf_norm(p.f), inf_norm(Aty)});
  r.dual = inf_norm(Hz + p.f + Aty) / scale;
  return r;
}

}  // namespace detail

class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpSolution solve(const QpProblem& problem) const {
    problem.validate();
    require(settings_.eps_primal > 0.0 && settings_.eps_dual > 0.0, "QP tolerances must be positive");
    require(settings_.max_iter >= 1, "QP iteration cap must be positive");

    const auto d = problem.num_vars();
    const auto m = problem.num_constraints();
    const detail::ScaledQp s = detail::ruiz_scale(problem, settings_.scaling_iters);
    const Matrix AtA = s.A.transpose() * s.A;

    double rho = settings_.rho;
    const double sigma = settings_.sigma;
    const double alpha = settings_.alpha;

    Eigen::LLT<Matrix> kkt;
    auto factor = [&] {
      Matrix K = s.P + rho * AtA;
      K.diagonal().array() += sigma;
      kkt.compute(K);
      if (kkt.info() != Eigen::Success) throw SingularMatrix("ADMM system matrix factorisation failed");
    };
    factor();

    Vector x = Vector::Zero(d), z = Vector::Zero(m), y = Vector::Zero(m);
    Vector x_prev = x, z_prev = z, y_prev = y;

    QpSolution best;
    best.z = Vector::Zero(d);
    best.y = Vector::Zero(m);
    double best_score = std::numeric_limits<double>::infinity();
    double last_polish_score = std::numeric_limits<double>::infinity();

    auto unscale = [&](const Vector& xs, const Vector& zs, const Vector& ys, Vector& xu, Vector& zu, Vector& yu) {
      xu = s.D.cwiseProduct(xs);
      zu = zs.cwiseQuotient(s.E);
      yu = s.E.cwiseProduct(ys) / s.c;
    };

    QpSolution out;
    for (int k = 1; k <= settings_.max_iter; ++k) {
      x_prev = x;
      z_prev = z;
      y_prev = y;

      Vector rhs = sigma * x - s.q;
      if (m > 0) rhs += s.A.transpose() * (rho * z - y);
      const Vector x_tilde = kkt.solve(rhs);
      x = alpha * x_tilde + (1.0 - alpha) * x_prev;
      if (m > 0) {
        const Vector z_tilde = s.A * x_tilde;
        const Vector z_relax = alpha * z_tilde + (1.0 - alpha) * z_prev;
        z = (z_relax + y / rho).cwiseMin(s.b);
        y = y + rho * (z_relax - z);
      }

      if (settings_.record_history && k > 1) {
        // Douglas-Rachford state (x, z + y / rho) under the penalty metric;
        // measured from the first iterate since the zero start is not a
        // projected state.
        const double dx = (x - x_prev).squaredNorm();
        const double dv = m > 0 ? ((z - z_prev) + (y - y_prev) / rho).squaredNorm() : 0.0;
        out.residual_history.push_back(std::sqrt(sigma * dx + rho * dv));
      }

      const bool last = k == settings_.max_iter;
      if (k % settings_.check_interval != 0 && !last) continue;

      Vector xu, zu, yu;
      unscale(x, z, y, xu, zu, yu);
      const auto res = detail::unscaled_residuals(problem, xu, zu, yu);
      const double score = std::max(res.primal / settings_.eps_primal, res.dual / settings_.eps_dual);
      if (score < best_score) {
        best_score = score;
        best.z = xu;
        best.y = yu;
        best.primal_residual = res.primal;
        best.dual_residual = res.dual;
      }
      if (res.primal <= settings_.eps_primal && res.dual <= settings_.eps_dual) {
        return finish(problem, xu, yu, res, QpStatus::optimal, k, false, std::move(out.residual_history));
      }

      if (settings_.polish && std::max(res.primal, res.dual) < 1e-3 &&
          std::max(res.primal, res.dual) < 0.1 * last_polish_score) {
        last_polish_score = std::max(res.primal, res.dual);
        if (auto pol = polish(problem, s, z, y)) {
          return finish(problem, pol->first, pol->second,
                        detail::unscaled_residuals(problem, pol->first, (problem.A * pol->first).cwiseMin(problem.b),
                                                   pol->second),
                        QpStatus::optimal, k, true, std::move(out.residual_history));
        }
      }

      if (m > 0 && primal_infeasible(s, y - y_prev)) {
        return finish(problem, xu, yu, res, QpStatus::infeasible, k, false, std::move(out.residual_history));
      }

      if (settings_.adaptive_rho && m > 0 && k % settings_.adaptive_interval == 0) {
        const Vector Ax = s.A * x;
        const double prim_norm = std::max(detail::inf_norm(Ax), detail::inf_norm(z));
        const double dual_norm = std::max({detail::inf_norm(s.P * x), detail::inf_norm(s.A.transpose() * y),
                                           detail::inf_norm(s.q)});
        const double rp = detail::inf_norm(Ax - z) / (prim_norm + 1e-30);
        const double rd = detail::inf_norm(s.P * x + s.q + s.A.transpose() * y) / (dual_norm + 1e-30);
        if (rp > 0.0 && rd > 0.0) {
          const double ratio = std::sqrt(rp / rd);
          if (ratio > 5.0 || ratio < 0.2) {
            rho = std::clamp(rho * ratio, 1e-6, 1e6);
            factor();
          }
        }
      }
    }

    QpSolution result = finish(problem, best.z, best.y, {best.primal_residual, best.dual_residual},
                               QpStatus::max_iterations, settings_.max_iter, false,
                               std::move(out.residual_history));
    return result;
  }

  const QpSettings& settings() const { return settings_; }

 private:
  QpSolution finish(const QpProblem& p, const Vector& z, const Vector& y, detail::Residuals res, QpStatus status,
                    int iterations, bool polished, std::vector<double> history) const {
    QpSolution sol;
    sol.z = z;
    sol.y = y;
    sol.status = status;
    sol.objective = p.objective(z);
    sol.primal_residual = res.primal;
    sol.dual_residual = res.dual;
    sol.iterations = iterations;
    sol.polished = polished;
    sol.residual_history = std::move(history);
    return sol;
  }

  bool primal_infeasible(const detail::ScaledQp& s, const Vector& dy_scaled) const {
    const Vector dy = s.E.cwiseProduct(dy_scaled) / s.c;
    const double nrm = detail::inf_norm(dy);
    if (nrm < 1e-12) return false;
    const double eps = settings_.eps_infeasible;
    if (dy.minCoeff() < -eps * nrm) return false;
    const Vector Aty = s.D.cwiseInverse().cwiseProduct(s.A.transpose() * dy_scaled) / s.c;
    const double bty = s.b.dot(dy_scaled) / s.c;
    return detail::inf_norm(Aty) <= eps * nrm && bty < -eps * nrm;
  }

  /// Guess the active set from the ADMM iterate, solve the equality-
  /// constrained KKT system, and accept only a verified KKT point.
  std::optional<std::pair<Vector, Vector>> polish(const QpProblem& p, const detail::ScaledQp& s, const Vector& z,
                                                  const Vector& y) const {
    const auto d = p.num_vars();
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < s.A.rows(); ++i) {
      if (s.b[i] - z[i] < y[i]) active.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    Matrix Aact(k, d);
    Vector bact(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      Aact.row(r) = s.A.row(active[static_cast<std::size_t>(r)]);
      bact[r] = s.b[active[static_cast<std::size_t>(r)]];
    }
    constexpr double kReg = 1e-9;
    Matrix K = Matrix::Zero(d + k, d + k);
    K.topLeftCorner(d, d) = s.P;
    K.topRightCorner(d, k) = Aact.transpose();
    K.bottomLeftCorner(k, d) = Aact;
    Matrix Kreg = K;
    Kreg.topLeftCorner(d, d).diagonal().array() += kReg;
    Kreg.bottomRightCorner(k, k).diagonal().array() -= kReg;
    Eigen::PartialPivLU<Matrix> lu(Kreg);
    Vector rhs(d + k);
    rhs << -s.q, bact;
    Vector sol = lu.solve(rhs);
    // Iterative refinement against the unregularized system; stops once the
    // residual no longer shrinks.
    double last = (rhs - K * sol).lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 50 && last > 0.0; ++it) {
      const Vector next = sol + lu.solve(rhs - K * sol);
      const double r = (rhs - K * next).lpNorm<Eigen::Infinity>();
      if (!(r < last)) break;
      sol = next;
      last = r;
    }
    if (!sol.allFinite()) return std::nullopt;

    Vector ys = Vector::Zero(s.A.rows());
    for (Eigen::Index r = 0; r < k; ++r) ys[active[static_cast<std::size_t>(r)]] = sol[d + r];
    const Vector xu = s.D.cwiseProduct(sol.head(d));
    Vector yu = s.E.cwiseProduct(ys) / s.c;
    const double ymax = detail::inf_norm(yu);
    if (yu.size() && yu.minCoeff() < -settings_.eps_dual * (1.0 + ymax)) return std::nullopt;
    yu = yu.cwiseMax(0.0);
    const auto res = detail::unscaled_residuals(p, xu, (p.A * xu).cwiseMin(p.b), yu);
    if (res.primal <= settings_.eps_primal && res.dual <= settings_.eps_dual) return std::make_pair(xu, yu);
    return std::nullopt;
  }

  QpSettings settings_;
};

inline QpSolution solve_qp(const QpProblem& p, double eps_primal = 1e-8, double eps_dual = 1e-8,
                           int max_iter = 50000) {
  QpSettings s;
  s.eps_primal = eps_primal;
  s.eps_dual = eps_dual;
  s.max_iter = max_iter;
  return QpSolver(s).solve(p);
}

}  // namespace safeflow
