// heatplan: simulate, plan, train, sweep and plot for the deadline-aware heater benchmark.
//
// Exit codes: 0 success, 1 runtime fault, 2 configuration error.

#ifdef HEATPLAN_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "heatplan/baseline.hpp"
#include "heatplan/env.hpp"
#include "heatplan/mcts.hpp"
#include "heatplan/plot.hpp"
#include "heatplan/ppo.hpp"
#include "heatplan/sweep.hpp"

namespace {

using namespace heatplan;

constexpr int kExitOk = 0;
constexpr int kExitFault = 1;
constexpr int kExitConfig = 2;

/// Every knob of every command. Resolved as flag > HEATPLAN_SEED > config file > default.
struct RunConfig {
  // Episode
  double t0 = 20.0;
  double target = 60.0;
  int deadline = 60;
  double band = 1.0;
  double mass = 50.0;
  double ambient = 20.0;
  std::uint64_t seed = 0;

  // simulate / plan
  std::string controller = "bangbang";
  std::string policy;
  std::string trajectory_out = "trajectory.csv";
  std::string trace;
  bool brute_force = false;

  // MCTS
  int mcts_sims = 25000;
  double mcts_c = 1.4142135623730951;

  // train
  long steps = 500000;
  int batch_steps = 2048;
  int minibatch = 64;
  int epochs = 10;
  double lr = 3e-4;
  std::string curve;

  // sweep
  std::string vary;  // sweep: deadline when unset; plot: inferred from the rows when unset
  std::vector<double> values;
  std::vector<std::string> controllers{"bangbang", "mcts", "oracle"};
  std::vector<std::uint64_t> seeds;
  int jobs = 0;
  bool no_timing = false;
  bool ppo_sample = false;
  std::string summary;

  // plot
  std::vector<std::string> inputs;
  std::string kind = "scatter_by_axis";
  std::optional<double> plot_target;

  std::string out;
};

TankParams tank_params(const RunConfig& c) {
  TankParams p;
  p.mass_kg = c.mass;
  p.t_ambient_c = c.ambient;
  return p;
}

EpisodeSpec episode_spec(const RunConfig& c) {
  EpisodeSpec s;
  s.t0_c = c.t0;
  s.t_target_c = c.target;
  s.deadline_steps = c.deadline;
  s.band_c = c.band;
  s.params = tank_params(c);
  s.validate();
  return s;
}

MctsConfig mcts_config(const RunConfig& c) {
  MctsConfig m;
  m.n_simulations = c.mcts_sims;
  m.c_ucb = c.mcts_c;
  m.rng_seed = c.seed;
  m.validate();
  return m;
}

void print_summary(const EpisodeResult& r) {
  std::cout << "energy_wh=" << r.energy_wh << " terminal_c=" << r.terminal_temp_c
            << " success=" << (r.success ? "true" : "false") << std::endl;
}

int cmd_simulate(const RunConfig& c) {
  const EpisodeSpec spec = episode_spec(c);
  EpisodeResult r;
  if (c.controller == "bangbang") {
    r = run_controller(spec, bang_bang_action);
  } else if (c.controller == "oracle") {
    r = run_schedule(spec, just_in_time_schedule(spec).schedule);
  } else if (c.controller == "mcts") {
    std::ofstream trace_os;
    MctsTraceSink sink;
    if (!c.trace.empty()) {
      trace_os.open(c.trace, std::ios::binary);
      if (!trace_os) throw IoError("cannot open trace file '" + c.trace + "'");
      sink = [&trace_os](const MctsDecision& d) {
        nlohmann::json j;
        j["step"] = d.step;
        j["root_visits"] = {d.root_visits[0], d.root_visits[1]};
        j["q"] = {d.q[0], d.q[1]};
        j["chosen"] = static_cast<int>(d.chosen);
        trace_os << j.dump() << '\n';
      };
    }
    r = run_mcts_episode(spec, mcts_config(c), {}, sink);
  } else if (c.controller == "ppo") {
    if (c.policy.empty()) throw ConfigError("--policy is required for controller ppo");
    const PolicyNet net = load_policy(c.policy);
    r = run_controller(spec, GreedyPolicy{&net});
  } else {
    throw ConfigError("unknown controller '" + c.controller + "'");
  }
  std::ofstream os(c.trajectory_out, std::ios::binary);
  if (!os) throw IoError("cannot open '" + c.trajectory_out + "' for writing");
  write_trajectory_csv(os, r, spec.params);
  print_summary(r);
  return kExitOk;
}

int cmd_plan(const RunConfig& c) {
  const EpisodeSpec spec = episode_spec(c);
  const OracleResult o = c.brute_force ? brute_force_schedule(spec) : just_in_time_schedule(spec);
  std::cout << "schedule=" << to_string(o.schedule) << '\n'
            << "on_count=" << o.on_count << " energy_wh=" << o.energy_wh
            << " predicted_terminal_c=" << o.predicted_terminal_c << " feasible=" << (o.feasible ? "true" : "false")
            << std::endl;
  return kExitOk;
}

int cmd_train(const RunConfig& c) {
  PpoConfig cfg;
  cfg.total_steps = c.steps;
  cfg.steps_per_batch = c.batch_steps;
  cfg.minibatch = c.minibatch;
  cfg.epochs_per_batch = c.epochs;
  cfg.learning_rate = c.lr;
  cfg.rng_seed = c.seed;
  cfg.validate();
  const std::string out = c.out.empty() ? "policy.json" : c.out;
  std::string curve = c.curve;
  if (curve.empty()) curve = std::filesystem::path(out).replace_extension(".curve.csv").string();

  const TrainResult res = train(cfg, default_spec_sampler, {}, [](const CurvePoint& p, const UpdateStats& s) {
    std::cerr << "steps=" << p.env_steps << " mean_return=" << p.mean_return << " mean_energy_wh=" << p.mean_energy_wh
              << " loss=" << s.mean_loss.total << " entropy=" << s.mean_loss.entropy << '\n';
  });
  save_policy(res.net, out);
  std::ofstream cs(curve, std::ios::binary);
  if (!cs) throw IoError("cannot open '" + curve + "' for writing");
  write_curve_csv(cs, res.curve);
  std::cout << "policy=" << out << " curve=" << curve << " batches=" << res.curve.size() << std::endl;
  return kExitOk;
}

int cmd_sweep(const RunConfig& c) {
  SweepSpec s;
  const auto axis = parse_axis(c.vary.empty() ? "deadline" : c.vary);
  if (!axis) throw ConfigError("unknown axis '" + c.vary + "'");
  s.axis = *axis;
  s.values = c.values;
  s.t0_c = c.t0;
  s.t_target_c = c.target;
  s.deadline_steps = c.deadline;
  s.band_c = c.band;
  s.params = tank_params(c);
  for (const auto& name : c.controllers) {
    const auto k = parse_controller(name);
    if (!k) throw ConfigError("unknown controller '" + name + "'");
    s.controllers.push_back(*k);
  }
  if (c.seeds.empty()) {
    s.seeds.clear();
    for (std::uint64_t i = 0; i < 5; ++i) s.seeds.push_back(c.seed + i);
  } else {
    s.seeds = c.seeds;
  }
  if (!c.policy.empty()) s.policy_path = c.policy;
  s.ppo_sample = c.ppo_sample;
  s.mcts = mcts_config(c);
  s.jobs = c.jobs;

  const std::string out = c.out.empty() ? "results.csv" : c.out;
  const auto rows = run_sweep(s);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw IoError("cannot open '" + out + "' for writing");
  write_results_csv(os, rows, !c.no_timing);
  if (!c.summary.empty() && !rows.empty()) {
    std::ofstream ss(c.summary, std::ios::binary);
    if (!ss) throw IoError("cannot open '" + c.summary + "' for writing");
    write_summary_csv(ss, summarize(rows, s.axis), s.axis);
  }
  std::cout << "rows=" << rows.size() << " out=" << out << std::endl;
  return kExitOk;
}

int cmd_plot(const RunConfig& c) {
  const auto kind = parse_plot_kind(c.kind);
  if (!kind) throw ConfigError("unknown plot kind '" + c.kind + "'");
  if (c.inputs.empty()) throw ConfigError("--in is required");
  const std::string out = c.out.empty() ? "fig.svg" : c.out;
  if (*kind == PlotKind::ScatterByAxis) {
    std::vector<SweepRow> rows;
    for (const auto& in : c.inputs) {
      std::ifstream is(in);
      if (!is) throw ConfigError("cannot open '" + in + "'");
      auto part = read_results_csv(is);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw ConfigError("no rows to plot");
    const SweepAxis axis = c.vary.empty() ? infer_axis(rows) : parse_axis(c.vary).value_or(infer_axis(rows));
    emit_scatter_plot(rows, axis, out);
  } else {
    std::vector<LabeledTrajectory> trajs;
    for (const auto& in : c.inputs) {
      std::ifstream is(in);
      if (!is) throw ConfigError("cannot open '" + in + "'");
      trajs.push_back({std::filesystem::path(in).stem().string(), read_trajectory_temps(is)});
    }
    emit_trajectory_plot(trajs, c.plot_target, out);
  }
  std::cout << "plot=" << out << " data=" << sidecar_path(out).string() << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadline-aware immersion heater control benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value configuration file");

  RunConfig c;
  const std::vector<std::string> known_controllers{"bangbang", "mcts", "ppo", "oracle"};

  app.add_option("--t0", c.t0, "Initial temperature (degC)")->capture_default_str();
  app.add_option("--target", c.target, "Target temperature (degC)")->capture_default_str();
  app.add_option("--deadline", c.deadline, "Deadline in steps")->capture_default_str();
  app.add_option("--band", c.band, "Service band half-width (degC)")->capture_default_str();
  app.add_option("--mass", c.mass, "Water mass (kg)")->capture_default_str();
  app.add_option("--ambient", c.ambient, "Ambient temperature (degC)")->capture_default_str();
  app.add_option("--seed", c.seed, "Global seed")->envname("HEATPLAN_SEED")->capture_default_str();
  app.add_option("--controller", c.controller, "Controller for simulate")
      ->check(CLI::IsMember(known_controllers))
      ->capture_default_str();
  app.add_option("--policy", c.policy, "Policy file (JSON)");
  app.add_option("--trajectory-out", c.trajectory_out, "Trajectory CSV written by simulate")->capture_default_str();
  app.add_option("--trace", c.trace, "MCTS search trace (JSON lines)");
  app.add_flag("--brute-force", c.brute_force, "plan: enumerate all schedules (deadline <= 20)");
  app.add_option("--mcts-sims", c.mcts_sims, "MCTS simulations per decision")->capture_default_str();
  app.add_option("--mcts-c", c.mcts_c, "UCB1 exploration constant")->default_str("1.4142135623730951");
  app.add_option("--steps", c.steps, "PPO environment steps")->capture_default_str();
  app.add_option("--batch-steps", c.batch_steps, "PPO steps per rollout batch")->capture_default_str();
  app.add_option("--minibatch", c.minibatch, "PPO minibatch size")->capture_default_str();
  app.add_option("--epochs", c.epochs, "PPO epochs per batch")->capture_default_str();
  app.add_option("--lr", c.lr, "PPO learning rate")->capture_default_str();
  app.add_option("--curve", c.curve, "Learning curve CSV (default <out>.curve.csv)");
  app.add_option("--vary", c.vary, "Sweep axis (default deadline)")
      ->check(CLI::IsMember({"initial_temp", "deadline", "target_temp"}))
      ->capture_default_str();
  app.add_option("--values", c.values, "Sweep grid override")->delimiter(',');
  app.add_option("--controllers", c.controllers, "Sweep controllers")
      ->delimiter(',')
      ->check(CLI::IsMember(known_controllers))
      ->capture_default_str();
  app.add_option("--seeds", c.seeds, "Sweep seeds (default seed..seed+4)")->delimiter(',');
  app.add_option("--jobs", c.jobs, "Sweep worker threads (0: all cores)")->capture_default_str();
  app.add_flag("--no-timing", c.no_timing, "Write wall_ms as 0 for byte-comparable results");
  app.add_flag("--ppo-sample", c.ppo_sample, "Sweep: sample PPO actions per seed instead of greedy");
  app.add_option("--summary", c.summary, "Sweep: per-controller summary CSV");
  app.add_option("--in", c.inputs, "plot: input CSV file(s)")->delimiter(',');
  app.add_option("--kind", c.kind, "plot: scatter_by_axis or trajectory")
      ->check(CLI::IsMember({"scatter_by_axis", "trajectory"}))
      ->capture_default_str();
  app.add_option("--plot-target", c.plot_target, "plot: reference target line (degC)");
  app.add_option("--out", c.out, "Output file (policy, results or figure)");

  auto* simulate = app.add_subcommand("simulate", "Run one episode and write its trajectory");
  auto* plan = app.add_subcommand("plan", "Print the minimal-energy open-loop schedule");
  auto* train_cmd = app.add_subcommand("train", "Train a PPO policy");
  auto* sweep = app.add_subcommand("sweep", "Run a one-dimensional sweep");
  auto* plot = app.add_subcommand("plot", "Plot sweep results or trajectories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::cerr << "# resolved configuration\n" << app.config_to_str(true, false) << std::flush;

  try {
    if (*simulate) return cmd_simulate(c);
    if (*plan) return cmd_plan(c);
    if (*train_cmd) return cmd_train(c);
    if (*sweep) return cmd_sweep(c);
    if (*plot) return cmd_plot(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
  return kExitConfig;
}
