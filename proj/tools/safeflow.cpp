// safeflow command-line tool.
//
// Exit codes: 0 ok, 1 invalid input, 2 infeasible training / failed
// certification, 3 I/O error. Failures are reported as one JSON object on
// stderr.

#include "safeflow.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace safeflow;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kInfeasible = 2, kIo = 3 };

/// Raised for results that are valid but fail their check (exit 2).
class CheckFailed : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "check-failed"; }
};

void report_error(const char* kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

Vector parse_vector(const std::string& text, const char* what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput(std::string(what) + ": cannot parse '" + item + "' as a number");
    }
  }
  require(!vals.empty(), std::string(what) + " is empty");
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Integrator parse_method(const std::string& m) {
  if (m == "rk4") return Integrator::rk4;
  if (m == "euler") return Integrator::euler;
  throw InvalidInput("method must be 'rk4' or 'euler'");
}

double model_dt(const LearnedModel& m, double dt) {
  if (dt > 0.0) return dt;
  require(m.diagnostics.demo_dt > 0.0, "model has no recorded demo dt; pass --dt");
  return m.diagnostics.demo_dt;
}

std::vector<Trajectory> with_derivatives(std::vector<Trajectory> demos) {
  for (auto& d : demos)
    if (!d.has_derivatives()) d = finite_difference_derivatives(std::move(d));
  return demos;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn safe, stable vector fields from demonstrations"};
  app.require_subcommand(1);

  // train
  std::string demos_path, barrier_path, config_path, out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto* train_cmd = app.add_subcommand("train", "Fit a model under barrier and Lyapunov constraints");
  train_cmd->add_option("--demos", demos_path, "Demonstration file (JSON)")->required();
  train_cmd->add_option("--barrier", barrier_path, "Barrier spec (JSON)")->required();
  train_cmd->add_option("--config", config_path, "Learning config (JSON)")->required();
  train_cmd->add_option("--out", out_path, "Model output")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Overrides the config seed");

  // rollout
  std::string model_path, x0_text, dist_path, method = "rk4";
  int steps = 1000;
  double dt = 0.0;
  auto* rollout_cmd = app.add_subcommand("rollout", "Integrate the learned field from x0");
  rollout_cmd->add_option("--model", model_path)->required();
  rollout_cmd->add_option("--x0", x0_text, "Start state, comma separated")->required();
  rollout_cmd->add_option("--steps", steps)->capture_default_str();
  rollout_cmd->add_option("--dt", dt, "Step size (default: demo dt)");
  rollout_cmd->add_option("--disturbance", dist_path);
  rollout_cmd->add_option("--method", method)->capture_default_str();
  rollout_cmd->add_option("--out", out_path)->required();

  // certify
  double pitch = 0.0;
  auto* certify_cmd = app.add_subcommand("certify", "Grid check of forward invariance");
  certify_cmd->add_option("--model", model_path)->required();
  certify_cmd->add_option("--pitch", pitch, "Grid pitch (default: diameter / 400)");
  certify_cmd->add_option("--out", out_path)->required();

  // sea
  auto* sea_cmd = app.add_subcommand("sea", "Swept error area against demonstrations");
  sea_cmd->add_option("--model", model_path)->required();
  sea_cmd->add_option("--demos", demos_path)->required();
  sea_cmd->add_option("--method", method)->capture_default_str();
  sea_cmd->add_option("--out", out_path)->required();

  // montecarlo
  int runs = 100, window = 10;
  std::string starts_path;
  auto* mc_cmd = app.add_subcommand("montecarlo", "Disturbed rollouts against the ultimate bound");
  mc_cmd->add_option("--model", model_path)->required();
  mc_cmd->add_option("--disturbance", dist_path)->required();
  mc_cmd->add_option("--runs", runs)->capture_default_str();
  mc_cmd->add_option("--steps", steps)->capture_default_str();
  mc_cmd->add_option("--window", window)->capture_default_str();
  mc_cmd->add_option("--dt", dt, "Step size (default: demo dt)");
  mc_cmd->add_option("--seed", seed, "Base seed; run i uses seed + i")->capture_default_str();
  mc_cmd->add_option("--starts", starts_path, "Demo file whose first states are cycled as starts");
  mc_cmd->add_option("--method", method)->capture_default_str();
  mc_cmd->add_option("--out", out_path)->required();

  // plot
  std::vector<std::string> rollout_paths;
  int grid_res = 40;
  bool no_svg = false;
  auto* plot_cmd = app.add_subcommand("plot", "Write field grid CSV, rollout CSVs and an SVG");
  plot_cmd->add_option("--model", model_path)->required();
  plot_cmd->add_option("--rollouts", rollout_paths, "Trajectory files");
  plot_cmd->add_option("--grid-res", grid_res)->capture_default_str();
  plot_cmd->add_flag("--no-svg", no_svg);
  plot_cmd->add_option("--out", out_path, "Output directory")->required();

  // spiral
  SpiralScenario scenario = reference_spiral_scenario();
  std::string xstar_text, starts_text;
  bool no_derivatives = false;
  auto* spiral_cmd = app.add_subcommand("spiral", "Generate synthetic spiral demonstrations");
  spiral_cmd->add_option("--decay", scenario.field.decay)->capture_default_str();
  spiral_cmd->add_option("--spin", scenario.field.spin)->capture_default_str();
  spiral_cmd->add_option("--x-star", xstar_text, "Equilibrium (default 0.1,0)");
  spiral_cmd->add_option("--starts", starts_text, "Start states 'a,b;c,d;...' (default: five starts inside the reference ellipse)");
  spiral_cmd->add_option("--samples", scenario.samples)->capture_default_str();
  spiral_cmd->add_option("--dt", scenario.dt)->capture_default_str();
  spiral_cmd->add_flag("--no-derivatives", no_derivatives, "Omit exact derivatives");
  spiral_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("invalid-input", e.what());
    return kInvalid;
  }
  seed_given = seed_opt->count() > 0;

  try {
    if (*train_cmd) {
      const auto demos = with_derivatives(load_demos(demos_path));
      const BarrierSpec spec = barrier_from_json(read_json_file(barrier_path));
      TrainJob job = train_job_from_json(read_json_file(config_path));
      if (seed_given) {
        job.seed = seed;
        job.plan.seed = seed;
      }
      const LearnedModel model = train(demos, spec, job.cfg, job.plan, job.seed, job.settings);
      save_model(out_path, model);
      if (model.diagnostics.status != QpStatus::optimal) {
        throw CheckFailed(std::string("solver stopped with status ") + to_string(model.diagnostics.status) +
                          "; model written but constraints may be violated");
      }
    } else if (*rollout_cmd) {
      const LearnedModel model = load_model(model_path);
      const Vector x0 = parse_vector(x0_text, "--x0");
      DisturbanceSpec dist;
      if (!dist_path.empty()) dist = disturbance_from_json(read_json_file(dist_path));
      const Trajectory traj = rollout(model, x0, model_dt(model, dt), steps, parse_method(method), dist);
      save_demos(out_path, {traj});
    } else if (*certify_cmd) {
      const LearnedModel model = load_model(model_path);
      const LipschitzData lip = lipschitz_constants(model.spec, working_box(model.spec));
      const CertReport rep = certify_invariance(model, model.spec, lip, pitch > 0.0 ? pitch : default_cert_pitch(model.spec));
      write_json_file(out_path, cert_report_to_json(rep));
      if (!rep.pass) throw CheckFailed("certification failed: min slack " + std::to_string(rep.min_slack));
    } else if (*sea_cmd) {
      const LearnedModel model = load_model(model_path);
      const auto demos = load_demos(demos_path);
      const auto reps = reproduce(model, demos, parse_method(method));
      Json per = Json::array();
      for (std::size_t k = 0; k < demos.size(); ++k) per.push_back(sea({demos[k]}, {reps[k]}));
      write_json_file(out_path, {{"sea", sea(demos, reps)}, {"per_demo", per}, {"demos", demos.size()}});
    } else if (*mc_cmd) {
      const LearnedModel model = load_model(model_path);
      const DisturbanceSpec dist = disturbance_from_json(read_json_file(dist_path));
      MonteCarloOptions opt;
      opt.runs = runs;
      opt.steps = steps;
      opt.window = window;
      opt.dt = model_dt(model, dt);
      opt.base_seed = seed;
      opt.method = parse_method(method);
      if (!starts_path.empty())
        for (const auto& d : load_demos(starts_path)) opt.starts.push_back(d.states.front());
      write_json_file(out_path, monte_carlo_to_json(monte_carlo(model, dist, opt)));
    } else if (*plot_cmd) {
      const LearnedModel model = load_model(model_path);
      std::vector<Trajectory> rollouts;
      for (const auto& p : rollout_paths)
        for (auto& t : load_demos(p)) rollouts.push_back(std::move(t));
      emit_plot_data(model, model.spec, grid_res, rollouts, out_path, !no_svg);
    } else if (*spiral_cmd) {
      if (!xstar_text.empty()) scenario.field.x_star = parse_vector(xstar_text, "--x-star");
      require(scenario.field.x_star.size() == 2, "--x-star must have two entries");
      if (!starts_text.empty()) {
        scenario.starts.clear();
        std::stringstream ss(starts_text);
        std::string item;
        while (std::getline(ss, item, ';')) scenario.starts.push_back(parse_vector(item, "--starts"));
      }
      auto demos = scenario.demonstrations();
      if (no_derivatives)
        for (auto& d : demos) d.derivatives.reset();
      save_demos(out_path, demos);
    }
  } catch (const IoError& e) {
    report_error(e.kind(), e.what());
    return kIo;
  } catch (const TrainingFailure& e) {
    report_error(e.kind(), e.what());
    return kInfeasible;
  } catch (const CheckFailed& e) {
    report_error(e.kind(), e.what());
    return kInfeasible;
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
    return kInvalid;
  }
  return kOk;
}
