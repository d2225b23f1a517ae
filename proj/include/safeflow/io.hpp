#pragma once

// JSON file formats, finite-difference derivatives and plot-data output.

#include "safeflow/barrier.hpp"
#include "safeflow/core.hpp"
#include "safeflow/elm.hpp"
#include "safeflow/evaluation.hpp"
#include "safeflow/learner.hpp"
#include "safeflow/simulator.hpp"
#include "safeflow/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace safeflow {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "safeflow/1";

// ---------------------------------------------------------------- files ----

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

// -------------------------------------------------------------- helpers ----

namespace detail {

/// Typed lookup that turns json type errors into InvalidInput.
template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidInput(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

/// Rejects keys outside `allowed`; keys starting with '_' are comments.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw InvalidInput(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!k.empty() && k[0] == '_') continue;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw InvalidInput(std::string(what) + ": unknown field '" + k + "'");
  }
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput(std::string(what) + " must contain numbers only");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

/// Matrices are stored as a list of rows.
inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

inline Matrix matrix_from(const Json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be a list of rows");
  if (j.empty()) return Matrix(0, 0);
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw InvalidInput(std::string(what) + " has ragged rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline std::vector<Vector> states_from(const Json& j, Eigen::Index dims, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be a list of states");
  std::vector<Vector> out;
  out.reserve(j.size());
  for (const auto& row : j) {
    Vector v = vector_from(row, what);
    if (v.size() != dims) throw InvalidInput(std::string(what) + ": state has " + std::to_string(v.size()) +
                                             " entries, expected " + std::to_string(dims));
    out.push_back(std::move(v));
  }
  return out;
}

inline Json states_json(const std::vector<Vector>& states) {
  Json a = Json::array();
  for (const auto& s : states) a.push_back(to_json(s));
  return a;
}

}  // namespace detail

// -------------------------------------------------------- demonstrations ----

/// {"dt", "dims", "demonstrations": [{"states", "derivatives"?}]}
inline std::vector<Trajectory> demos_from_json(const Json& j) {
  detail::check_keys(j, {"dt", "dims", "demonstrations", "source"}, "demo file");
  const double dt = detail::get<double>(j, "dt");
  const int dims = detail::get<int>(j, "dims");
  require(dims >= 1, "dims must be positive");
  const auto source = detail::get_or<std::string>(j, "source", "demonstration");
  require(source == "demonstration" || source == "rollout", "source must be 'demonstration' or 'rollout'");
  const Json& list = j.at("demonstrations");
  require(list.is_array() && !list.empty(), "demonstrations must be a non-empty list");
  std::vector<Trajectory> out;
  for (const auto& d : list) {
    detail::check_keys(d, {"states", "derivatives"}, "demonstration");
    Trajectory tr;
    tr.dt = dt;
    tr.source = source == "rollout" ? TrajectorySource::rollout : TrajectorySource::demonstration;
    if (!d.contains("states")) throw InvalidInput("demonstration without states");
    tr.states = detail::states_from(d.at("states"), dims, "states");
    if (d.contains("derivatives")) tr.derivatives = detail::states_from(d.at("derivatives"), dims, "derivatives");
    tr.validate(1);
    out.push_back(std::move(tr));
  }
  return out;
}

inline Json demos_to_json(const std::vector<Trajectory>& demos) {
  require(!demos.empty(), "no trajectories to write");
  Json j;
  j["dt"] = demos.front().dt;
  j["dims"] = demos.front().dim();
  j["source"] = to_string(demos.front().source);
  Json list = Json::array();
  for (const auto& d : demos) {
    require(d.dim() == demos.front().dim(), "trajectories have different dimensions");
    Json e;
    e["states"] = detail::states_json(d.states);
    if (d.derivatives) e["derivatives"] = detail::states_json(*d.derivatives);
    list.push_back(std::move(e));
  }
  j["demonstrations"] = std::move(list);
  return j;
}

inline std::vector<Trajectory> load_demos(const std::string& path) { return demos_from_json(read_json_file(path)); }

inline void save_demos(const std::string& path, const std::vector<Trajectory>& demos) {
  write_json_file(path, demos_to_json(demos));
}

/// Central differences inside, second-order one-sided differences at both
/// ends. Exact for paths quadratic in time.
inline Trajectory finite_difference_derivatives(Trajectory traj) {
  if (traj.size() < 3) throw InvalidInput("finite differences need at least 3 states");
  require(traj.dt > 0.0 && std::isfinite(traj.dt), "trajectory dt must be positive");
  const auto& x = traj.states;
  const double dt = traj.dt;
  const std::size_t T = x.size();
  std::vector<Vector> d(T);
  d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
  for (std::size_t t = 1; t + 1 < T; ++t) d[t] = (x[t + 1] - x[t - 1]) / (2.0 * dt);
  d[T - 1] = (3.0 * x[T - 1] - 4.0 * x[T - 2] + x[T - 3]) / (2.0 * dt);
  traj.derivatives = std::move(d);
  return traj;
}

// --------------------------------------------------------------- barrier ----

inline BarrierSpec barrier_from_json(const Json& j) {
  detail::check_keys(j, {"kind", "center", "semi_axes", "rotation", "gamma"}, "barrier");
  BarrierSpec s;
  const auto kind = detail::get_or<std::string>(j, "kind", "ellipse2d");
  if (kind == "ellipse2d") {
    s.kind = BarrierKind::ellipse2d;
  } else if (kind == "ellipsoidNd") {
    s.kind = BarrierKind::ellipsoidNd;
  } else {
    throw InvalidInput("barrier kind must be 'ellipse2d' or 'ellipsoidNd'");
  }
  if (!j.contains("center") || !j.contains("semi_axes")) throw InvalidInput("barrier needs center and semi_axes");
  s.center = detail::vector_from(j.at("center"), "center");
  s.semi_axes = detail::vector_from(j.at("semi_axes"), "semi_axes");
  s.rotation = detail::get_or<double>(j, "rotation", 0.0);
  s.gamma = detail::get_or<double>(j, "gamma", 2.0);
  s.validate();
  return s;
}

inline Json barrier_to_json(const BarrierSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"center", detail::to_json(s.center)},
          {"semi_axes", detail::to_json(s.semi_axes)},
          {"rotation", s.rotation},
          {"gamma", s.gamma}};
}

// ---------------------------------------------------------------- config ----

inline Json bounds_to_json(const BoundEstimates& b) {
  return {{"eps_bar", b.eps_bar}, {"eps_prime_bar", b.eps_prime_bar}, {"w_bar", b.w_bar}, {"u_bar", b.u_bar},
          {"a_bar", b.a_bar},     {"w_nh_bar", b.w_nh_bar},           {"g_bar", b.g_bar}};
}

inline BoundEstimates bounds_from_json(const Json& j) {
  detail::check_keys(j, {"eps_bar", "eps_prime_bar", "w_bar", "u_bar", "a_bar", "w_nh_bar", "g_bar"}, "bounds");
  BoundEstimates b;
  b.eps_bar = detail::get<double>(j, "eps_bar");
  b.eps_prime_bar = detail::get<double>(j, "eps_prime_bar");
  b.w_bar = detail::get<double>(j, "w_bar");
  b.u_bar = detail::get<double>(j, "u_bar");
  b.a_bar = detail::get<double>(j, "a_bar");
  b.w_nh_bar = detail::get<double>(j, "w_nh_bar");
  b.g_bar = detail::get<double>(j, "g_bar");
  return b;
}

inline Json learn_config_to_json(const LearnConfig& c) {
  Json j = {{"gamma", c.gamma}, {"rho", c.rho}, {"tau", c.tau}, {"mu_W", c.mu_W},
            {"p", c.p},         {"L_f", c.L_f}, {"L_V", c.L_V}, {"bounds", bounds_to_json(c.bounds)}};
  if (c.x_star.size() > 0) j["x_star"] = detail::to_json(c.x_star);
  return j;
}

inline LearnConfig learn_config_from_json(const Json& j) {
  LearnConfig c;
  c.gamma = detail::get_or<double>(j, "gamma", c.gamma);
  c.rho = detail::get_or<double>(j, "rho", c.rho);
  c.tau = detail::get_or<double>(j, "tau", c.tau);
  c.mu_W = detail::get_or<double>(j, "mu_W", c.mu_W);
  c.p = detail::get_or<double>(j, "p", c.p);
  c.L_f = detail::get_or<double>(j, "L_f", c.L_f);
  c.L_V = detail::get_or<double>(j, "L_V", c.L_V);
  if (j.contains("bounds")) c.bounds = bounds_from_json(j.at("bounds"));
  if (j.contains("x_star")) c.x_star = detail::vector_from(j.at("x_star"), "x_star");
  return c;
}

/// Everything the `train` command reads from its config file.
struct TrainJob {
  LearnConfig cfg;
  SamplePlan plan;
  TrainSettings settings;
  std::uint64_t seed = 0;
};

inline TrainJob train_job_from_json(const Json& j) {
  detail::check_keys(j,
                     {"gamma", "rho", "tau", "mu_W", "p", "L_f", "L_V", "x_star", "bounds", "seed", "training",
                      "sampling", "qp"},
                     "config");
  TrainJob job;
  job.cfg = learn_config_from_json(j);
  job.seed = detail::get_or<std::uint64_t>(j, "seed", 0);

  if (j.contains("training")) {
    const Json& t = j.at("training");
    detail::check_keys(t, {"n_h", "mu_exp", "bip", "bip_inputs", "safety_factor", "safety_rows", "stability_rows"},
                       "training");
    auto& s = job.settings;
    s.n_h = detail::get_or<int>(t, "n_h", s.n_h);
    s.mu_exp = detail::get_or<double>(t, "mu_exp", s.mu_exp);
    s.bip = detail::get_or<bool>(t, "bip", s.bip);
    const auto inputs = detail::get_or<std::string>(t, "bip_inputs", "equidistant");
    require(inputs == "equidistant" || inputs == "raw", "bip_inputs must be 'equidistant' or 'raw'");
    s.bip_inputs = inputs == "raw" ? BipInputs::demo_states : BipInputs::equidistant_demo_states;
    s.safety_factor = detail::get_or<double>(t, "safety_factor", s.safety_factor);
    s.rows.safety = detail::get_or<bool>(t, "safety_rows", true);
    s.rows.stability = detail::get_or<bool>(t, "stability_rows", true);
  }
  if (j.contains("sampling")) {
    const Json& t = j.at("sampling");
    detail::check_keys(t, {"strategy", "count", "grid_pitch", "kappa_d", "seed"}, "sampling");
    auto& p = job.plan;
    const auto strategy = detail::get_or<std::string>(t, "strategy", "uniform_random");
    require(strategy == "uniform_random" || strategy == "grid", "sampling strategy must be 'uniform_random' or 'grid'");
    p.strategy = strategy == "grid" ? SampleStrategy::grid : SampleStrategy::uniform_random;
    p.count = detail::get_or<int>(t, "count", p.count);
    p.grid_pitch = detail::get_or<double>(t, "grid_pitch", p.grid_pitch);
    if (t.contains("kappa_d")) p.kappa_d = detail::get<double>(t, "kappa_d");
    p.seed = detail::get_or<std::uint64_t>(t, "seed", job.seed);
  } else {
    job.plan.seed = job.seed;
  }
  if (j.contains("qp")) {
    const Json& t = j.at("qp");
    detail::check_keys(t, {"eps_primal", "eps_dual", "max_iter", "polish"}, "qp");
    auto& q = job.settings.qp;
    q.eps_primal = detail::get_or<double>(t, "eps_primal", q.eps_primal);
    q.eps_dual = detail::get_or<double>(t, "eps_dual", q.eps_dual);
    q.max_iter = detail::get_or<int>(t, "max_iter", q.max_iter);
    q.polish = detail::get_or<bool>(t, "polish", q.polish);
  }
  return job;
}

// ----------------------------------------------------------- disturbance ----

inline DisturbanceSpec disturbance_from_json(const Json& j) {
  detail::check_keys(j, {"kind", "mean", "stddev", "amplitude", "direction", "trigger_step", "seed"}, "disturbance");
  DisturbanceSpec d;
  const auto kind = detail::get_or<std::string>(j, "kind", "none");
  if (kind == "none") {
    d.kind = DisturbanceKind::none;
  } else if (kind == "gaussian") {
    d.kind = DisturbanceKind::gaussian;
  } else if (kind == "discrete-push") {
    d.kind = DisturbanceKind::discrete_push;
  } else {
    throw InvalidInput("disturbance kind must be 'none', 'gaussian' or 'discrete-push'");
  }
  d.mean = detail::get_or<double>(j, "mean", 0.0);
  d.stddev = detail::get_or<double>(j, "stddev", 0.0);
  d.amplitude = detail::get_or<double>(j, "amplitude", 0.0);
  if (j.contains("direction")) d.direction = detail::vector_from(j.at("direction"), "direction");
  if (j.contains("trigger_step")) d.trigger_step = detail::get<int>(j, "trigger_step");
  d.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  require(d.stddev >= 0.0, "disturbance std must be >= 0");
  return d;
}

inline Json disturbance_to_json(const DisturbanceSpec& d) {
  Json j = {{"kind", to_string(d.kind)}, {"mean", d.mean}, {"stddev", d.stddev}, {"amplitude", d.amplitude},
            {"seed", d.seed}};
  if (d.direction.size() > 0) j["direction"] = detail::to_json(d.direction);
  if (d.trigger_step) j["trigger_step"] = *d.trigger_step;
  return j;
}

// ----------------------------------------------------------------- model ----

inline Json model_to_json(const LearnedModel& m) {
  const auto& d = m.diagnostics;
  Json diag = {{"objective", d.objective},
               {"data_term", d.data_term},
               {"ridge_data_term", d.ridge_data_term},
               {"sample_count", d.sample_count},
               {"safety_rows", d.safety_rows},
               {"stability_rows", d.stability_rows},
               {"status", to_string(d.status)},
               {"iterations", d.iterations},
               {"primal_residual", d.primal_residual},
               {"dual_residual", d.dual_residual},
               {"safety_margin", d.safety_margin},
               {"demo_dt", d.demo_dt}};
  return {{"format", kModelFormat},
          {"params",
           {{"U", detail::to_json(m.params.U)},
            {"a_p", detail::to_json(m.params.a_p)},
            {"b_p", detail::to_json(m.params.b_p)},
            {"W", detail::to_json(m.params.W)}}},
          {"delta_star", m.delta_star},
          {"barrier", barrier_to_json(m.spec)},
          {"config", learn_config_to_json(m.cfg)},
          {"diagnostics", std::move(diag)}};
}

inline QpStatus qp_status_from(const std::string& s) {
  if (s == "optimal") return QpStatus::optimal;
  if (s == "infeasible") return QpStatus::infeasible;
  if (s == "max-iterations") return QpStatus::max_iterations;
  throw InvalidInput("unknown solver status '" + s + "'");
}

inline LearnedModel model_from_json(const Json& j) {
  if (detail::get<std::string>(j, "format") != kModelFormat)
    throw InvalidInput(std::string("model format must be '") + kModelFormat + "'");
  LearnedModel m;
  const Json& p = j.at("params");
  m.params.U = detail::matrix_from(p.at("U"), "U");
  m.params.a_p = detail::vector_from(p.at("a_p"), "a_p");
  m.params.b_p = detail::vector_from(p.at("b_p"), "b_p");
  m.params.W = detail::matrix_from(p.at("W"), "W");
  m.params.validate();
  m.delta_star = detail::get<double>(j, "delta_star");
  m.spec = barrier_from_json(j.at("barrier"));
  m.cfg = learn_config_from_json(j.at("config"));
  require(m.spec.dim() == m.params.n(), "barrier and network dimensions differ");
  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    auto& g = m.diagnostics;
    g.objective = detail::get_or<double>(d, "objective", 0.0);
    g.data_term = detail::get_or<double>(d, "data_term", 0.0);
    g.ridge_data_term = detail::get_or<double>(d, "ridge_data_term", 0.0);
    g.sample_count = detail::get_or<int>(d, "sample_count", 0);
    g.safety_rows = detail::get_or<int>(d, "safety_rows", 0);
    g.stability_rows = detail::get_or<int>(d, "stability_rows", 0);
    g.status = qp_status_from(detail::get_or<std::string>(d, "status", "optimal"));
    g.iterations = detail::get_or<int>(d, "iterations", 0);
    g.primal_residual = detail::get_or<double>(d, "primal_residual", 0.0);
    g.dual_residual = detail::get_or<double>(d, "dual_residual", 0.0);
    g.safety_margin = detail::get_or<double>(d, "safety_margin", 0.0);
    g.demo_dt = detail::get_or<double>(d, "demo_dt", 0.0);
  }
  return m;
}

inline LearnedModel load_model(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    return model_from_json(j);
  } catch (const Json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void save_model(const std::string& path, const LearnedModel& m) { write_json_file(path, model_to_json(m)); }

// --------------------------------------------------------------- reports ----

inline Json cert_report_to_json(const CertReport& r) {
  return {{"pass", r.pass},   {"min_slack", r.min_slack}, {"argmin", detail::to_json(r.argmin)},
          {"allowance", r.allowance}, {"pitch", r.pitch}, {"points", r.points}};
}

inline Json monte_carlo_to_json(const MonteCarloReport& r) {
  Json runs = Json::array();
  for (const auto& x : r.records) {
    runs.push_back({{"seed", x.seed},
                    {"start", detail::to_json(x.start)},
                    {"tail_max", x.diverged ? Json(nullptr) : Json(x.tail_max)},
                    {"bound", x.bound},
                    {"success", x.success},
                    {"diverged", x.diverged}});
  }
  const bool any_diverged = std::any_of(r.records.begin(), r.records.end(), [](const auto& x) { return x.diverged; });
  return {{"runs", r.runs},
          {"steps", r.steps},
          {"window", r.window},
          {"mu_ub", r.mu_ub},
          {"mu_lim", any_diverged ? Json(nullptr) : Json(r.mu_lim)},
          {"success_rate", r.success_rate},
          {"records", std::move(runs)}};
}

// ------------------------------------------------------------ plot data ----

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<double> linspace(double a, double b, int k) {
  std::vector<double> v(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = k == 1 ? a : a + (b - a) * i / (k - 1);
  v.back() = b;
  return v;
}

using Point2 = std::pair<double, double>;

/// Closed h = 0 contours of a planar barrier by marching squares over
/// `res` x `res` nodes spanning `box`. Open chains (contour leaving the box)
/// are returned unclosed.
inline std::vector<std::vector<Point2>> zero_contours(const BarrierSpec& spec, const Box& box, int res,
                                                      std::vector<bool>* closed = nullptr) {
  const auto xs = linspace(box.lower[0], box.upper[0], res);
  const auto ys = linspace(box.lower[1], box.upper[1], res);
  std::vector<double> v(static_cast<std::size_t>(res * res));
  auto at = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(j * res + i)]; };
  for (int j = 0; j < res; ++j)
    for (int i = 0; i < res; ++i) at(i, j) = h(Eigen::Vector2d(xs[i], ys[j]), spec);

  // Edge ids: horizontal (i,j)-(i+1,j) -> 2*(j*res+i), vertical (i,j)-(i,j+1) -> 2*(j*res+i)+1.
  auto hid = [&](int i, int j) { return 2L * (j * res + i); };
  auto vid = [&](int i, int j) { return 2L * (j * res + i) + 1; };
  std::map<long, Point2> where;
  auto cross = [&](long id, double x0, double y0, double v0, double x1, double y1, double v1) {
    const double t = v0 / (v0 - v1);
    where[id] = {x0 + t * (x1 - x0), y0 + t * (y1 - y0)};
    return id;
  };

  std::map<long, std::vector<long>> adj;
  auto link = [&](long a, long b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int j = 0; j + 1 < res; ++j) {
    for (int i = 0; i + 1 < res; ++i) {
      const double a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
      std::vector<long> hits;
      if ((a >= 0) != (b >= 0)) hits.push_back(cross(hid(i, j), xs[i], ys[j], a, xs[i + 1], ys[j], b));
      if ((b >= 0) != (c >= 0)) hits.push_back(cross(vid(i + 1, j), xs[i + 1], ys[j], b, xs[i + 1], ys[j + 1], c));
      if ((d >= 0) != (c >= 0)) hits.push_back(cross(hid(i, j + 1), xs[i], ys[j + 1], d, xs[i + 1], ys[j + 1], c));
      if ((a >= 0) != (d >= 0)) hits.push_back(cross(vid(i, j), xs[i], ys[j], a, xs[i], ys[j + 1], d));
      if (hits.size() == 2) {
        link(hits[0], hits[1]);
      } else if (hits.size() == 4) {
        // Saddle: decide the pairing from the cell-center value.
        const double mid = h(Eigen::Vector2d(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])), spec);
        if ((mid >= 0) == (a >= 0)) {
          link(hits[0], hits[1]);
          link(hits[2], hits[3]);
        } else {
          link(hits[0], hits[3]);
          link(hits[1], hits[2]);
        }
      }
    }
  }

  std::vector<std::vector<Point2>> paths;
  std::map<long, bool> used;
  auto walk = [&](long start) {
    std::vector<Point2> path{where[start]};
    used[start] = true;
    long prev = -1, cur = start;
    bool is_closed = false;
    while (true) {
      long next = -1;
      for (long n : adj[cur]) {
        if (n == prev) continue;
        if (n == start && path.size() > 2) {
          is_closed = true;
          break;
        }
        if (!used[n]) {
          next = n;
          break;
        }
      }
      if (is_closed || next < 0) break;
      used[next] = true;
      path.push_back(where[next]);
      prev = cur;
      cur = next;
    }
    paths.push_back(std::move(path));
    if (closed) closed->push_back(is_closed);
  };
  // Open chains first, starting from their loose ends.
  for (const auto& [id, nb] : adj)
    if (nb.size() == 1 && !used[id]) walk(id);
  for (const auto& [id, nb] : adj)
    if (!used[id]) walk(id);
  return paths;
}

}  // namespace detail

struct PlotFiles {
  std::string grid_csv;
  std::vector<std::string> rollout_csv;
  std::string svg;
};

/// CSV text of the vector field on a `grid_res` x `grid_res` lattice over the
/// barrier's bounding box: x1,x2,dx1,dx2,h with x1 varying fastest.
template <typename Field>
std::string vector_field_csv(Field&& field, const BarrierSpec& spec, int grid_res) {
  require(grid_res >= 2, "grid resolution must be at least 2");
  require(spec.dim() == 2, "plot data is planar only");
  const Box box = bounding_box(spec);
  const auto xs = detail::linspace(box.lower[0], box.upper[0], grid_res);
  const auto ys = detail::linspace(box.lower[1], box.upper[1], grid_res);
  std::ostringstream os;
  os << "x1,x2,dx1,dx2,h\n";
  for (double y : ys) {
    for (double x : xs) {
      const Eigen::Vector2d p(x, y);
      const Vector f = field(Vector(p));
      os << detail::fmt(x) << ',' << detail::fmt(y) << ',' << detail::fmt(f[0]) << ',' << detail::fmt(f[1]) << ','
         << detail::fmt(h(p, spec)) << '\n';
    }
  }
  return os.str();
}

inline std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os << 't';
  for (Eigen::Index i = 0; i < t.dim(); ++i) os << ",x" << (i + 1);
  os << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << detail::fmt(t.dt * static_cast<double>(k));
    for (Eigen::Index i = 0; i < t.dim(); ++i) os << ',' << detail::fmt(t.states[k][i]);
    os << '\n';
  }
  return os.str();
}

/// SVG with the h = 0 contour (marching squares over the 1.1x padded
/// bounding box) and the rollouts as polylines.
inline std::string plot_svg(const BarrierSpec& spec, int grid_res, const std::vector<Trajectory>& rollouts) {
  require(grid_res >= 2, "grid resolution must be at least 2");
  require(spec.dim() == 2, "plot data is planar only");
  const Box pad = bounding_box(spec).inflated(1.1);
  Box view = pad;
  for (const auto& r : rollouts)
    for (const auto& x : r.states) {
      view.lower = view.lower.cwiseMin(x);
      view.upper = view.upper.cwiseMax(x);
    }
  constexpr double kSize = 600.0;
  const double scale = kSize / view.extent().maxCoeff();
  const double width = view.extent()[0] * scale, height = view.extent()[1] * scale;
  auto X = [&](double x) { return detail::fmt((x - view.lower[0]) * scale); };
  auto Y = [&](double y) { return detail::fmt((view.upper[1] - y) * scale); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(width) << "\" height=\""
     << detail::fmt(height) << "\" viewBox=\"0 0 " << detail::fmt(width) << ' ' << detail::fmt(height) << "\">\n";
  std::vector<bool> closed;
  const auto paths = detail::zero_contours(spec, pad, grid_res, &closed);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    os << "<path class=\"boundary\" fill=\"none\" stroke=\"black\" d=\"";
    for (std::size_t i = 0; i < paths[k].size(); ++i)
      os << (i == 0 ? "M" : " L") << X(paths[k][i].first) << ',' << Y(paths[k][i].second);
    if (closed[k]) os << " Z";
    os << "\"/>\n";
  }
  for (const auto& r : rollouts) {
    os << "<polyline class=\"rollout\" fill=\"none\" stroke=\"steelblue\" points=\"";
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? " " : "") << X(r.states[i][0]) << ',' << Y(r.states[i][1]);
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes field.csv, rollout_<k>.csv and plot.svg into `dir`.
template <typename Field>
PlotFiles emit_plot_data(Field&& field, const BarrierSpec& spec, int grid_res, const std::vector<Trajectory>& rollouts,
                         const std::string& dir, bool svg = true) {
  require(grid_res >= 2, "grid resolution must be at least 2");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir);
  const std::filesystem::path base(dir);
  PlotFiles out;
  out.grid_csv = (base / "field.csv").string();
  write_text_file(out.grid_csv, vector_field_csv(field, spec, grid_res));
  for (std::size_t k = 0; k < rollouts.size(); ++k) {
    out.rollout_csv.push_back((base / ("rollout_" + std::to_string(k) + ".csv")).string());
    write_text_file(out.rollout_csv.back(), trajectory_csv(rollouts[k]));
  }
  if (svg) {
    out.svg = (base / "plot.svg").string();
    write_text_file(out.svg, plot_svg(spec, grid_res, rollouts));
  }
  return out;
}

inline PlotFiles emit_plot_data(const LearnedModel& model, const BarrierSpec& spec, int grid_res,
                                const std::vector<Trajectory>& rollouts, const std::string& dir, bool svg = true) {
  return emit_plot_data([&model](const Vector& x) { return eval(x, model.params); }, spec, grid_res, rollouts, dir,
                        svg);
}

}  // namespace safeflow
