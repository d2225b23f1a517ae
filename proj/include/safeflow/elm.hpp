#pragma once

// Extreme learning machine: a single sigmoid hidden layer with fixed random
// input weights and trainable output weights.

#include "safeflow/core.hpp"
#include "safeflow/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace safeflow {

/// ELM network. The hidden layer computes sigmoid(a_p .* (U^T x) + b_p); the
/// feature vector appends a constant 1 so the last row of W is the output bias.
struct ElmParams {
  Matrix U;    // n x n_h
  Vector a_p;  // n_h
  Vector b_p;  // n_h
  Matrix W;    // (n_h + 1) x n

  Eigen::Index n() const { return U.rows(); }
  Eigen::Index n_h() const { return U.cols(); }

  void validate() const {
    require(U.rows() >= 1 && U.cols() >= 1, "ELM has empty input weights");
    require(a_p.size() == n_h() && b_p.size() == n_h(),
            "ELM slope/bias length does not match hidden width");
    require(W.rows() == n_h() + 1 && W.cols() == n(),
            "ELM output weights have wrong shape");
    require(U.allFinite() && a_p.allFinite() && b_p.allFinite() && W.allFinite(),
            "ELM parameters contain non-finite entries");
  }
};

/// Constants bounding the network and its reconstruction error.
struct BoundEstimates {
  double eps_bar = 0.0;        // sup ||f(x) - W^T g(x)||
  double eps_prime_bar = 0.0;  // sup of the residual's derivative
  double w_bar = 0.0;          // ||W||_F
  double u_bar = 0.0;          // ||U||_F
  double a_bar = 0.0;          // ||diag(a_p)||_F
  double w_nh_bar = 0.0;       // ||W without its bias row||_F
  double g_bar = 0.0;          // sqrt(n_h + 1)
};

namespace detail {

// Pre-activations are clamped so the sigmoid stays strictly inside (0, 1)
// in double precision.
inline double sigmoid(double z) {
  z = std::clamp(z, -700.0, 36.0);
  return 1.0 / (1.0 + std::exp(-z));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

inline Vector hidden_features(const Vector& x, const ElmParams& params) {
  require(x.size() == params.n(), "state dimension does not match the ELM input");
  const auto nh = params.n_h();
  Vector g(nh + 1);
  const Vector pre = params.a_p.cwiseProduct(params.U.transpose() * x) + params.b_p;
  for (Eigen::Index i = 0; i < nh; ++i) g[i] = detail::sigmoid(pre[i]);
  g[nh] = 1.0;
  return g;
}

/// Feature matrix with one row per state.
inline Matrix feature_matrix(const std::vector<Vector>& states, const ElmParams& params) {
  Matrix G(static_cast<Eigen::Index>(states.size()), params.n_h() + 1);
  for (std::size_t t = 0; t < states.size(); ++t) {
    G.row(static_cast<Eigen::Index>(t)) = hidden_features(states[t], params).transpose();
  }
  return G;
}

inline Vector eval(const Vector& x, const ElmParams& params) {
  require(params.W.rows() == params.n_h() + 1 && params.W.cols() == params.n(),
          "ELM output weights have wrong shape");
  return params.W.transpose() * hidden_features(x, params);
}

/// U and b_p uniform on [-1, 1], unit slopes, zero output weights.
inline ElmParams random_init(int n, int n_h, std::uint64_t seed) {
  require(n >= 1 && n_h >= 1, "ELM dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ElmParams p;
  p.U.resize(n, n_h);
  for (Eigen::Index j = 0; j < p.U.cols(); ++j)
    for (Eigen::Index i = 0; i < p.U.rows(); ++i) p.U(i, j) = uni(rng);
  p.a_p = Vector::Ones(n_h);
  p.b_p.resize(n_h);
  for (Eigen::Index i = 0; i < n_h; ++i) p.b_p[i] = uni(rng);
  p.W = Matrix::Zero(n_h + 1, n);
  return p;
}

/// Batch intrinsic plasticity: refit each neuron's slope and bias so its
/// activations over `inputs` follow an exponential distribution with mean
/// `mu_exp`. Sorted pre-activations are regressed onto sorted logit targets.
inline ElmParams bip_pretrain(ElmParams params, const std::vector<Vector>& inputs,
                              double mu_exp, std::uint64_t seed) {
  params.validate();
  require(inputs.size() >= 2, "BIP needs at least two inputs");
  require(mu_exp > 0.0 && mu_exp < 1.0, "BIP target mean must lie in (0, 1)");
  for (const auto& x : inputs)
    require(x.size() == params.n() && x.allFinite(), "BIP input has wrong dimension");

  constexpr double kClip = 1e-4;
  const auto T = static_cast<Eigen::Index>(inputs.size());
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0 / mu_exp);

  Vector u(T), target(T);
  for (Eigen::Index i = 0; i < params.n_h(); ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      u[t] = params.U.col(i).dot(inputs[static_cast<std::size_t>(t)]);
      target[t] = detail::logit(std::clamp(expo(rng), kClip, 1.0 - kClip));
    }
    std::sort(u.data(), u.data() + T);
    std::sort(target.data(), target.data() + T);

    const double u_mean = u.mean();
    const double t_mean = target.mean();
    const double spread = u[T - 1] - u[0];
    const double scale = 1.0 + u.cwiseAbs().maxCoeff();

    double slope = 0.0;
    if (spread > 1e-12 * scale) {
      const Vector du = u.array() - u_mean;
      slope = du.dot(target.array().matrix() - Vector::Constant(T, t_mean)) / du.squaredNorm();
    }
    if (slope > 0.0 && std::isfinite(slope)) {
      params.a_p[i] = slope;
      params.b_p[i] = t_mean - slope * u_mean;
    } else {
      // degenerate neuron: unit slope, bias only
      params.a_p[i] = 1.0;
      params.b_p[i] = t_mean - u_mean;
    }
  }
  return params;
}

/// Closed-form minimiser of sum_t ||y_t - W^T g_t||^2 + mu_W tr(W^T W).
inline Matrix ridge_fit(const Matrix& features, const Matrix& targets, double mu_W) {
  require(features.rows() >= 1, "ridge fit needs at least one sample");
  require(features.rows() == targets.rows(), "feature and target row counts differ");
  require(mu_W >= 0.0, "ridge weight must be nonnegative");
  if (mu_W == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(features);
    if (qr.rank() < features.cols())
      throw SingularMatrix("normal matrix is singular; use a positive ridge weight");
    return qr.solve(targets);
  }
  Matrix normal = features.transpose() * features;
  normal.diagonal().array() += mu_W;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) throw SingularMatrix("ridge normal matrix is not positive definite");
  return llt.solve(features.transpose() * targets);
}

/// Stacks every demonstration sample into (features, targets).
inline std::pair<Matrix, Matrix> stack_samples(const std::vector<Trajectory>& demos,
                                               const ElmParams& params) {
  std::size_t total = 0;
  for (const auto& d : demos) {
    require(d.has_derivatives(), "demonstration lacks derivatives; compute them first");
    total += d.size();
  }
  Matrix G(static_cast<Eigen::Index>(total), params.n_h() + 1);
  Matrix Y(static_cast<Eigen::Index>(total), params.n());
  Eigen::Index row = 0;
  for (const auto& d : demos) {
    for (std::size_t t = 0; t < d.size(); ++t, ++row) {
      G.row(row) = hidden_features(d.states[t], params).transpose();
      require((*d.derivatives)[t].size() == params.n(), "derivative dimension mismatch");
      Y.row(row) = (*d.derivatives)[t].transpose();
    }
  }
  return {std::move(G), std::move(Y)};
}

/// Empirical bound constants from a ridge-fitted network, inflated by
/// `safety_factor`. The residual derivative is approximated by finite
/// differences of the residual between consecutive samples.
inline BoundEstimates estimate_bounds(const ElmParams& params, const std::vector<Trajectory>& demos,
                                      double safety_factor = 1.5) {
  params.validate();
  require(!demos.empty(), "bound estimation needs demonstrations");
  require(safety_factor >= 1.0, "safety factor must be at least 1");

  double eps = 0.0;
  double eps_prime = 0.0;
  for (const auto& d : demos) {
    require(d.has_derivatives(), "demonstration lacks derivatives; compute them first");
    d.validate(1);
    Vector prev_r;
    for (std::size_t t = 0; t < d.size(); ++t) {
      Vector r = (*d.derivatives)[t] - eval(d.states[t], params);
      eps = std::max(eps, r.norm());
      if (t > 0) {
        const double step = (d.states[t] - d.states[t - 1]).norm();
        if (step > 1e-12) eps_prime = std::max(eps_prime, (r - prev_r).norm() / step);
      }
      prev_r = std::move(r);
    }
  }

  BoundEstimates b;
  b.eps_bar = safety_factor * eps;
  b.eps_prime_bar = safety_factor * eps_prime;
  b.w_bar = safety_factor * params.W.norm();
  b.u_bar = params.U.norm();
  b.a_bar = params.a_p.norm();
  b.w_nh_bar = safety_factor * params.W.topRows(params.n_h()).norm();
  b.g_bar = std::sqrt(static_cast<double>(params.n_h() + 1));
  return b;
}

}  // namespace safeflow
