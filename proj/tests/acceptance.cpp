// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 only when
// every line passes.

#include "safeflow.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace safeflow;

namespace {

// Tolerances and thresholds.
constexpr int kQpInstances = 200;
constexpr double kQpTol = 1e-6;
constexpr double kQpSeconds = 10.0;
constexpr int kRidgeDatasets = 20;
constexpr double kRidgeTol = 1e-8;
constexpr int kGradPoints = 1000;
constexpr double kGradRelTol = 1e-6;
constexpr int kRollouts = 100;
constexpr int kSteps = 1000;
constexpr int kWindow = 10;
constexpr double kInvTolFraction = 1e-6;
constexpr double kInvSeconds = 120.0;
constexpr int kUubMinSuccess = 95;
constexpr double kRobustMinRate = 0.85;
constexpr double kSeaTol = 1e-9;
constexpr int kSeaPairs = 50;
constexpr double kBoundaryFraction = 0.98;
constexpr double kOrderLo = 12.0, kOrderHi = 20.0;

struct Line {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --------------------------------------------------------------------------

Line qp_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dd(1, 6), md(1, 12);
  double worst = 0.0;
  int bad_status = 0, no_oracle = 0;
  for (int k = 0; k < kQpInstances; ++k) {
    const int d = dd(rng), m = md(rng);
    const auto q = oracle::random_qp(rng, d, m);
    const auto want = oracle::kkt_enumeration(q.H, q.f, q.A, q.b);
    const auto sol = solve_qp({q.H, q.f, q.A, q.b});
    if (!want) {
      ++no_oracle;
      continue;
    }
    if (sol.status != QpStatus::optimal) ++bad_status;
    worst = std::max(worst, (sol.z - *want).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  Line l{"qp-oracle-equivalence"};
  l.pass = worst <= kQpTol && bad_status == 0 && no_oracle == 0 && secs < kQpSeconds;
  l.detail = std::to_string(kQpInstances) + " instances, max |z - z_kkt| = " + fmt("%.2e", worst) +
             ", non-optimal = " + std::to_string(bad_status) + ", " + fmt("%.2f s", secs);
  return l;
}

Line ridge_equivalence() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  const auto spec = BarrierSpec::ellipse(Eigen::Vector2d::Zero(), 2.0, 2.0, 0.0);
  double worst = 0.0;
  int bad_status = 0;
  for (int k = 0; k < kRidgeDatasets; ++k) {
    std::vector<Trajectory> demos;
    for (int c = 0; c < 3; ++c) {
      Trajectory t;
      t.dt = 0.01;
      t.derivatives.emplace();
      for (int s = 0; s < 40; ++s) {
        t.states.push_back(Eigen::Vector2d(0.5 * nd(rng), 0.5 * nd(rng)));
        t.derivatives->push_back(Eigen::Vector2d(nd(rng), nd(rng)));
      }
      demos.push_back(std::move(t));
    }
    const auto params = random_init(2, 10, static_cast<std::uint64_t>(k));
    LearnConfig cfg;
    cfg.x_star = Eigen::Vector2d::Zero();
    cfg.mu_W = 0.01;
    cfg.p = 0.0;
    const auto qp = assemble_qp(demos, params, spec, cfg, {Eigen::Vector2d::Zero()}, RowSelection{false, false});
    const auto sol = solve_qp(qp);
    if (sol.status != QpStatus::optimal) ++bad_status;
    const auto [G, Y] = stack_samples(demos, params);
    const Matrix ridge = ridge_fit(G, Y, cfg.mu_W);
    const Matrix W = Eigen::Map<const Matrix>(sol.z.data(), 11, 2);
    worst = std::max(worst, (W - ridge).norm());
  }
  Line l{"ridge-equivalence"};
  l.pass = worst <= kRidgeTol && bad_status == 0;
  l.detail = std::to_string(kRidgeDatasets) + " datasets (mu_W = 0.01, p = 0), max ||W_qp - W_ridge||_F = " +
             fmt("%.2e", worst);
  return l;
}

Line gradient_checks() {
  const std::vector<std::pair<std::string, BarrierSpec>> specs{
      {"circle", BarrierSpec::ellipse(Eigen::Vector2d(0.2, -0.1), 1.0, 1.0, 0.0)},
      {"ellipse", BarrierSpec::ellipse(Eigen::Vector2d(0.0, 0.3), 2.0, 0.5, 0.0)},
      {"rotated", BarrierSpec::ellipse(Eigen::Vector2d(-0.4, 0.1), 1.5, 0.6, M_PI / 4.0)}};
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (const auto& [name, spec] : specs) {
    const Box box = working_box(spec);
    for (int k = 0; k < kGradPoints; ++k) {
      Vector x(2);
      for (int i = 0; i < 2; ++i) x[i] = std::uniform_real_distribution<double>(box.lower[i], box.upper[i])(rng);
      const Vector fd = oracle::finite_difference_gradient([&](const Vector& y) { return h(y, spec); }, x, 1e-6);
      const Vector g = grad_h(x, spec);
      worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-12));
    }
  }
  Line l{"gradient-checks"};
  l.pass = worst < kGradRelTol;
  l.detail = std::to_string(kGradPoints) + " points x {circle, ellipse, rotated pi/4}, max rel err = " +
             fmt("%.2e", worst);
  return l;
}

// --------------------------------------------------------------------------

struct Scenario {
  SpiralScenario spiral;
  std::vector<Trajectory> demos;
  TrainJob job;
};

Scenario make_scenario() {
  Scenario s;
  s.spiral = reference_spiral_scenario();
  s.demos = s.spiral.demonstrations();
  s.job.cfg.gamma = 2.0;
  s.job.cfg.rho = 5.0;
  s.job.cfg.tau = 1e-9;
  s.job.cfg.mu_W = 0.01;
  s.job.cfg.p = 1e-3;
  s.job.cfg.L_f = 0.01;
  s.job.cfg.L_V = 0.01;
  s.job.seed = 1;
  s.job.settings.n_h = 25;
  s.job.plan.strategy = SampleStrategy::uniform_random;
  s.job.plan.count = 1000;
  s.job.plan.seed = 42;
  return s;
}

LearnedModel train_scenario(const Scenario& s, RowSelection rows) {
  TrainSettings settings = s.job.settings;
  settings.rows = rows;
  return train(s.demos, s.spiral.spec, s.job.cfg, s.job.plan, s.job.seed, settings);
}

/// max h - min h over the working box; h is concave so the minimum sits at a corner.
double h_range(const BarrierSpec& spec) {
  const Box box = working_box(spec);
  double lo = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 4; ++c) {
    const Eigen::Vector2d x(c & 1 ? box.upper[0] : box.lower[0], c & 2 ? box.upper[1] : box.lower[1]);
    lo = std::min(lo, h(x, spec));
  }
  return h(spec.center, spec) - lo;
}

double min_h_along(const LearnedModel& m, const Vector& x0, double dt) {
  double lo = std::numeric_limits<double>::infinity();
  try {
    const auto traj = rollout(m, x0, dt, kSteps, Integrator::rk4);
    for (const auto& x : traj.states) lo = std::min(lo, h(x, m.spec));
  } catch (const DivergenceError&) {
    lo = -std::numeric_limits<double>::infinity();
  }
  return lo;
}

Line forward_invariance(const Scenario& s, const LearnedModel& m, double train_secs) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& spec = s.spiral.spec;
  const LipschitzData lip = lipschitz_constants(spec, working_box(spec));
  const CertReport cert = certify_invariance(m, spec, lip, default_cert_pitch(spec));
  const double tol = kInvTolFraction * h_range(spec);
  int exits = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kRollouts; ++i) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(i));
    const double lo = min_h_along(m, random_interior_point(spec, rng), s.spiral.dt);
    lowest = std::min(lowest, lo);
    if (lo < -tol) ++exits;
  }
  const double secs = train_secs + seconds_since(t0);
  Line l{"forward-invariance"};
  l.pass = m.diagnostics.status == QpStatus::optimal && cert.pass && exits == 0 && secs < kInvSeconds;
  l.detail = std::string("status ") + to_string(m.diagnostics.status) + ", certificate min slack " +
             fmt("%.4f", cert.min_slack) + " vs allowance -" + fmt("%.4f", cert.allowance) + " over " +
             std::to_string(cert.points) + " points; " + std::to_string(exits) + "/" + std::to_string(kRollouts) +
             " rollouts below -" + fmt("%.1e", tol) + " (min h " + fmt("%.4f", lowest) + "); " + fmt("%.1f s", secs);
  return l;
}

Line uub(const LearnedModel& m) {
  MonteCarloOptions opt;
  opt.runs = kRollouts;
  opt.steps = kSteps;
  opt.window = kWindow;
  opt.dt = m.diagnostics.demo_dt;
  const auto rep = monte_carlo(m, DisturbanceSpec{}, opt);
  const int ok = static_cast<int>(std::lround(rep.success_rate * rep.runs));
  Line l{"uub-bound"};
  l.pass = ok >= kUubMinSuccess;
  l.detail = std::to_string(ok) + "/" + std::to_string(rep.runs) + " tail maxima within eps_bar/rho = " +
             fmt("%.4f", rep.mu_ub) + " (mean tail max " + fmt("%.2e", rep.mu_lim) + ")";
  return l;
}

Line robustness(const LearnedModel& m) {
  // Disturbance scaled to the data: mean 2 and std sqrt(2) per 100 units of
  // the safe-set diameter.
  const double scale = 2.0 * m.spec.semi_axes.maxCoeff();
  DisturbanceSpec d;
  d.kind = DisturbanceKind::gaussian;
  d.mean = 2.0 * scale / 100.0;
  d.stddev = std::sqrt(2.0) * scale / 100.0;
  MonteCarloOptions opt;
  opt.runs = kRollouts;
  opt.steps = kSteps;
  opt.window = kWindow;
  opt.dt = m.diagnostics.demo_dt;
  const auto rep = monte_carlo(m, d, opt);
  Line l{"robustness-bound"};
  l.pass = rep.success_rate >= kRobustMinRate;
  l.detail = "synthetic spiral, mean " + fmt("%.4f", d.mean) + ", std " + fmt("%.4f", d.stddev) + ": success " +
             fmt("%.2f", rep.success_rate) + ", mu_ub " + fmt("%.4f", rep.mu_ub) + ", mu_lim " +
             fmt("%.4f", rep.mu_lim) + "; LASA Khamesh variant not run (no LASA data or converter in this build)";
  return l;
}

Line sea_checks(const Scenario& s, const LearnedModel& m) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  auto random_path = [&](int count) {
    Trajectory t;
    t.dt = 0.01;
    Vector x = Eigen::Vector2d(nd(rng), nd(rng));
    for (int k = 0; k < count; ++k) {
      t.states.push_back(x);
      x += 0.1 * Eigen::Vector2d(nd(rng), nd(rng));
    }
    return t;
  };
  const auto p = random_path(40);
  const double same = sea({p}, {p});

  Trajectory d1, r1;
  d1.dt = r1.dt = 0.01;
  d1.states = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)};
  r1.states = {Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)};
  const double unit = sea({d1}, {r1});

  double worst_scale = 0.0;
  std::uniform_real_distribution<double> su(0.1, 10.0);
  for (int k = 0; k < kSeaPairs; ++k) {
    const auto a = random_path(30), b = random_path(45);
    const double sc = su(rng);
    auto scaled = [sc](Trajectory t) {
      for (auto& x : t.states) x *= sc;
      return t;
    };
    const double base = sea({a}, {b});
    worst_scale = std::max(worst_scale, std::abs(sea({scaled(a)}, {scaled(b)}) - sc * sc * base) / (sc * sc * base));
  }

  const double trained = sea(s.demos, reproduce(m, s.demos));
  const double zero =
      sea(s.demos, reproduce([](const Vector& x) { return Vector(Vector::Zero(x.size())); }, s.demos));

  Line l{"sea-oracle"};
  l.pass = same == 0.0 && std::abs(unit - 1.0) <= kSeaTol && worst_scale <= kSeaTol && std::isfinite(trained) &&
           trained < zero;
  l.detail = "identical " + fmt("%.1e", same) + ", unit square " + fmt("%.12f", unit) + ", scaling max rel err " +
             fmt("%.1e", worst_scale) + "; trained model SEA " + fmt("%.4f", trained) + " vs zero field " +
             fmt("%.4f", zero);
  return l;
}

Line contrast(const Scenario& s, const LearnedModel& full) {
  const LearnedModel lyap = train_scenario(s, RowSelection{false, true});
  const auto& spec = s.spiral.spec;
  const Eigen::Rotation2D<double> rot(spec.rotation);
  int exits_full = 0, exits_lyap = 0;
  for (int k = 0; k < kRollouts; ++k) {
    const double a = 2.0 * M_PI * k / kRollouts;
    const Vector x0 = spec.center + rot * Eigen::Vector2d(kBoundaryFraction * spec.semi_axes[0] * std::cos(a),
                                                          kBoundaryFraction * spec.semi_axes[1] * std::sin(a));
    if (min_h_along(full, x0, s.spiral.dt) < 0.0) ++exits_full;
    if (min_h_along(lyap, x0, s.spiral.dt) < 0.0) ++exits_lyap;
  }
  Line l{"stability-vs-safety-contrast"};
  l.pass = exits_lyap >= 1 && exits_full == 0;
  l.detail = std::to_string(kRollouts) + " starts at " + fmt("%.2f", kBoundaryFraction) +
             " of the boundary: Lyapunov-only exits " + std::to_string(exits_lyap) + " (status " +
             to_string(lyap.diagnostics.status) + "), full model exits " + std::to_string(exits_full);
  return l;
}

Line integrator_order() {
  auto err = [](double dt) {
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    const auto t = rollout([](const Vector& x) { return Vector(-x); }, Vector::Constant(1, 1.0), dt, steps);
    return std::abs(t.states.back()[0] - std::exp(-1.0));
  };
  std::string ratios;
  bool ok = true;
  double prev = err(0.1);
  for (int k = 1; k <= 3; ++k) {
    const double next = err(0.1 / std::pow(2.0, k));
    const double r = prev / next;
    ok = ok && r >= kOrderLo && r <= kOrderHi;
    ratios += (k > 1 ? ", " : "") + fmt("%.2f", r);
    prev = next;
  }
  Line l{"integrator-order"};
  l.pass = ok;
  l.detail = "rk4 on x' = -x, error ratios per halving from dt = 0.1: " + ratios;
  return l;
}

}  // namespace

int main() {
  std::vector<Line> lines;
  auto report = [&](Line l) {
    std::printf("%s  %-30s %s\n", l.pass ? "PASS" : "FAIL", l.name.c_str(), l.detail.c_str());
    std::fflush(stdout);
    lines.push_back(std::move(l));
  };
  auto guarded = [&](const char* name, const std::function<Line()>& fn) {
    try {
      report(fn());
    } catch (const std::exception& e) {
      report(Line{name, false, std::string("error: ") + e.what()});
    }
  };

  guarded("qp-oracle-equivalence", qp_oracle);
  guarded("ridge-equivalence", ridge_equivalence);
  guarded("gradient-checks", gradient_checks);

  const Scenario s = make_scenario();
  const auto t0 = std::chrono::steady_clock::now();
  LearnedModel model;
  bool trained = true;
  try {
    model = train_scenario(s, RowSelection{});
  } catch (const std::exception& e) {
    trained = false;
    for (const char* name : {"forward-invariance", "uub-bound", "robustness-bound", "sea-oracle",
                             "stability-vs-safety-contrast"})
      report(Line{name, false, std::string("training failed: ") + e.what()});
  }
  if (trained) {
    const double train_secs = seconds_since(t0);
    guarded("forward-invariance", [&] { return forward_invariance(s, model, train_secs); });
    guarded("uub-bound", [&] { return uub(model); });
    guarded("robustness-bound", [&] { return robustness(model); });
    guarded("sea-oracle", [&] { return sea_checks(s, model); });
    guarded("stability-vs-safety-contrast", [&] { return contrast(s, model); });
  }
  guarded("integrator-order", integrator_order);

  int failed = 0;
  for (const auto& l : lines) failed += l.pass ? 0 : 1;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(lines.size()) - failed, lines.size());
  return failed == 0 ? 0 : 1;
}
