#pragma once

// One-dimensional experiment sweeps: every controller on every grid point,
// under one set of tank and reward parameters.

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "heatplan/baseline.hpp"
#include "heatplan/env.hpp"
#include "heatplan/mcts.hpp"
#include "heatplan/ppo.hpp"
#include "heatplan/rng.hpp"

namespace heatplan {

enum class SweepAxis { InitialTemp, Deadline, TargetTemp };

enum class ControllerKind { BangBang, Mcts, Ppo, Oracle };

inline std::string_view axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::InitialTemp: return "initial_temp";
    case SweepAxis::Deadline: return "deadline";
    case SweepAxis::TargetTemp: return "target_temp";
  }
  return "?";
}

inline std::optional<SweepAxis> parse_axis(std::string_view s) {
  for (SweepAxis a : {SweepAxis::InitialTemp, SweepAxis::Deadline, SweepAxis::TargetTemp})
    if (axis_name(a) == s) return a;
  return std::nullopt;
}

inline std::string_view controller_name(ControllerKind c) {
  switch (c) {
    case ControllerKind::BangBang: return "bangbang";
    case ControllerKind::Mcts: return "mcts";
    case ControllerKind::Ppo: return "ppo";
    case ControllerKind::Oracle: return "oracle";
  }
  return "?";
}

inline std::optional<ControllerKind> parse_controller(std::string_view s) {
  for (ControllerKind c : {ControllerKind::BangBang, ControllerKind::Mcts, ControllerKind::Ppo, ControllerKind::Oracle})
    if (controller_name(c) == s) return c;
  return std::nullopt;
}

inline std::vector<double> default_grid(SweepAxis a) {
  switch (a) {
    case SweepAxis::InitialTemp: return {10, 15, 20, 25, 30};
    case SweepAxis::Deadline: return {30, 45, 60, 75, 90};
    case SweepAxis::TargetTemp: return {40, 50, 60, 70, 80};
  }
  return {};
}

/// FNV-1a over the bit patterns of every physical and reward constant.
inline std::uint64_t config_hash(const TankParams& p, const RewardParams& rp) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : {p.mass_kg, p.cp, p.h, p.area_m2, p.eta, p.p_on_w, p.p_off_w, p.dt_s, p.t_ambient_c, rp.alpha,
                   rp.beta}) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// RNG seed of one episode, a function of the grid value, controller and seed only.
inline std::uint64_t episode_seed(double grid_value, ControllerKind c, std::uint64_t seed) {
  std::uint64_t s = mix_seed(seed);
  s = mix_seed(s ^ std::bit_cast<std::uint64_t>(grid_value));
  return mix_seed(s ^ static_cast<std::uint64_t>(c));
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::Deadline;
  std::vector<double> values;  // empty: the default grid of `axis`
  Celsius t0_c = 20.0;
  Celsius t_target_c = 60.0;
  int deadline_steps = 60;
  double band_c = 1.0;
  std::vector<ControllerKind> controllers;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<std::string> policy_path;
  bool ppo_sample = false;  // sample PPO actions per seed instead of one greedy row
  TankParams params{};
  RewardParams reward{};
  MctsConfig mcts{};
  int jobs = 0;  // 0: hardware concurrency

  std::vector<double> grid() const { return values.empty() ? default_grid(axis) : values; }

  EpisodeSpec episode_at(double v) const {
    EpisodeSpec e;
    e.t0_c = t0_c;
    e.t_target_c = t_target_c;
    e.deadline_steps = deadline_steps;
    e.band_c = band_c;
    e.params = params;
    switch (axis) {
      case SweepAxis::InitialTemp: e.t0_c = v; break;
      case SweepAxis::Deadline: e.deadline_steps = static_cast<int>(v); break;
      case SweepAxis::TargetTemp: e.t_target_c = v; break;
    }
    return e;
  }
};

struct SweepRow {
  std::string controller;
  Celsius t0_c = 0.0;
  Celsius t_target_c = 0.0;
  int deadline_steps = 0;
  std::uint64_t seed = 0;
  double energy_wh = 0.0;
  Celsius terminal_temp_c = 0.0;
  bool success = false;
  std::size_t on_steps = 0;
  double episode_return = 0.0;
  double wall_ms = 0.0;
  std::uint64_t params_hash = 0;  // not serialized; ties the row to its physics

  double axis_value(SweepAxis a) const {
    switch (a) {
      case SweepAxis::InitialTemp: return t0_c;
      case SweepAxis::Deadline: return deadline_steps;
      case SweepAxis::TargetTemp: return t_target_c;
    }
    return 0.0;
  }
};

inline bool is_stochastic(ControllerKind c, const SweepSpec& spec) {
  return c == ControllerKind::Mcts || (c == ControllerKind::Ppo && spec.ppo_sample);
}

/// Runs one row per (grid point, controller, seed); deterministic controllers
/// get a single row with the first seed. Rows are ordered by controller name,
/// grid value and seed. Worker threads never change results.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  const std::vector<double> grid = spec.grid();
  for (double v : grid) spec.episode_at(v).validate();
  spec.reward.validate(spec.params);
  spec.mcts.validate();

  std::optional<PolicyNet> policy;
  const bool wants_ppo =
      std::find(spec.controllers.begin(), spec.controllers.end(), ControllerKind::Ppo) != spec.controllers.end();
  if (wants_ppo) {
    if (!spec.policy_path) throw ConfigError("run_sweep: ppo requested without a policy file");
    policy = load_policy(*spec.policy_path);
  }

  struct Task {
    ControllerKind controller;
    double value;
    std::uint64_t seed;
  };
  std::vector<ControllerKind> order = spec.controllers;
  std::sort(order.begin(), order.end(),
            [](ControllerKind a, ControllerKind b) { return controller_name(a) < controller_name(b); });
  order.erase(std::unique(order.begin(), order.end()), order.end());
  std::vector<double> values = grid;
  std::sort(values.begin(), values.end());
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());
  const std::uint64_t first_seed = spec.seeds.empty() ? 0 : spec.seeds.front();

  std::vector<Task> tasks;
  for (ControllerKind c : order)
    for (double v : values) {
      if (is_stochastic(c, spec)) {
        for (std::uint64_t s : seeds) tasks.push_back({c, v, s});
      } else {
        tasks.push_back({c, v, first_seed});
      }
    }

  const std::uint64_t hash = config_hash(spec.params, spec.reward);
  std::vector<SweepRow> rows(tasks.size());
  auto run_task = [&](const Task& task) {
    const EpisodeSpec ep = spec.episode_at(task.value);
    const auto start = std::chrono::steady_clock::now();
    EpisodeResult r;
    switch (task.controller) {
      case ControllerKind::BangBang: r = run_controller(ep, bang_bang_action, spec.reward); break;
      case ControllerKind::Oracle: r = run_schedule(ep, just_in_time_schedule(ep).schedule, spec.reward); break;
      case ControllerKind::Mcts: {
        MctsConfig cfg = spec.mcts;
        cfg.rng_seed = episode_seed(task.value, task.controller, task.seed);
        r = run_mcts_episode(ep, cfg, spec.reward);
        break;
      }
      case ControllerKind::Ppo:
        if (spec.ppo_sample)
          r = run_controller(ep, SampledPolicy{&*policy, Rng(episode_seed(task.value, task.controller, task.seed))},
                             spec.reward);
        else
          r = run_controller(ep, GreedyPolicy{&*policy}, spec.reward);
        break;
    }
    const auto stop = std::chrono::steady_clock::now();
    SweepRow row;
    row.controller = std::string(controller_name(task.controller));
    row.t0_c = ep.t0_c;
    row.t_target_c = ep.t_target_c;
    row.deadline_steps = ep.deadline_steps;
    row.seed = task.seed;
    row.energy_wh = r.energy_wh;
    row.terminal_temp_c = r.terminal_temp_c;
    row.success = r.success;
    row.on_steps = r.on_steps();
    row.episode_return = r.episode_return;
    row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    row.params_hash = hash;
    return row;
  };

  unsigned workers = spec.jobs > 0 ? static_cast<unsigned>(spec.jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        rows[i] = run_task(tasks[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

// ---------------------------------------------------------------------------
// Results CSV

inline constexpr std::string_view kResultsHeader =
    "controller,t0_c,t_target_c,deadline_steps,seed,energy_wh,terminal_temp_c,success,on_steps,episode_return,"
    "wall_ms";

namespace detail {

/// Shortest round-trip decimal representation.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(std::string("results CSV: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace detail

/// Writes the results table. With `timing` false the wall_ms column is written
/// as 0 so files from repeated runs compare byte for byte.
inline void write_results_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool timing = true) {
  using detail::fmt_double;
  os << kResultsHeader << '\n';
  for (const auto& r : rows) {
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", timing ? r.wall_ms : 0.0);
    os << r.controller << ',' << fmt_double(r.t0_c) << ',' << fmt_double(r.t_target_c) << ',' << r.deadline_steps
       << ',' << r.seed << ',' << fmt_double(r.energy_wh) << ',' << fmt_double(r.terminal_temp_c) << ','
       << (r.success ? "true" : "false") << ',' << r.on_steps << ',' << fmt_double(r.episode_return) << ',' << ms
       << '\n';
  }
}

inline std::vector<SweepRow> read_results_csv(std::istream& is) {
  using detail::parse_number;
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) throw ConfigError("results CSV: unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11) throw ConfigError("results CSV: expected 11 fields in '" + line + "'");
    SweepRow r;
    r.controller = f[0];
    r.t0_c = parse_number<double>(f[1], "t0_c");
    r.t_target_c = parse_number<double>(f[2], "t_target_c");
    r.deadline_steps = parse_number<int>(f[3], "deadline_steps");
    r.seed = parse_number<std::uint64_t>(f[4], "seed");
    r.energy_wh = parse_number<double>(f[5], "energy_wh");
    r.terminal_temp_c = parse_number<double>(f[6], "terminal_temp_c");
    if (f[7] != "true" && f[7] != "false") throw ConfigError("results CSV: bad success '" + f[7] + "'");
    r.success = f[7] == "true";
    r.on_steps = parse_number<std::size_t>(f[8], "on_steps");
    r.episode_return = parse_number<double>(f[9], "episode_return");
    r.wall_ms = parse_number<double>(f[10], "wall_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

/// Fractional saving 1 - E_c / E_ref; undefined when the reference used no energy.
inline std::optional<double> energy_savings(double energy, double reference) {
  if (reference == 0.0) return std::nullopt;
  return 1.0 - energy / reference;
}

struct SummaryRow {
  std::string controller;
  double value = 0.0;
  int runs = 0;
  double mean_energy_wh = 0.0;
  double min_energy_wh = 0.0;
  double max_energy_wh = 0.0;
  double success_rate = 0.0;
  std::optional<double> savings_vs_bangbang;
};

/// The axis whose column takes more than one value (deadline if none does).
inline SweepAxis infer_axis(const std::vector<SweepRow>& rows) {
  auto varies = [&rows](auto field) {
    for (const auto& r : rows)
      if (field(r) != field(rows.front())) return true;
    return false;
  };
  if (rows.empty()) return SweepAxis::Deadline;
  if (varies([](const SweepRow& r) { return r.t0_c; })) return SweepAxis::InitialTemp;
  if (varies([](const SweepRow& r) { return r.t_target_c; })) return SweepAxis::TargetTemp;
  return SweepAxis::Deadline;
}

inline std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows, SweepAxis axis) {
  if (rows.empty()) throw ConfigError("summarize: no rows");
  std::map<std::pair<std::string, double>, SummaryRow> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.controller, r.axis_value(axis)}];
    if (g.runs == 0) {
      g.controller = r.controller;
      g.value = r.axis_value(axis);
      g.min_energy_wh = r.energy_wh;
      g.max_energy_wh = r.energy_wh;
    }
    ++g.runs;
    g.mean_energy_wh += r.energy_wh;
    g.min_energy_wh = std::min(g.min_energy_wh, r.energy_wh);
    g.max_energy_wh = std::max(g.max_energy_wh, r.energy_wh);
    g.success_rate += r.success ? 1.0 : 0.0;
  }
  for (auto& [key, g] : groups) {
    g.mean_energy_wh /= g.runs;
    g.success_rate /= g.runs;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, g] : groups) {
    const auto bb = groups.find({"bangbang", key.second});
    if (bb != groups.end()) g.savings_vs_bangbang = energy_savings(g.mean_energy_wh, bb->second.mean_energy_wh);
    out.push_back(g);
  }
  return out;
}

inline std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) { return summarize(rows, infer_axis(rows)); }

/// Summary CSV; undefined savings are written as NA.
inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows, SweepAxis axis) {
  using detail::fmt_double;
  os << "controller," << axis_name(axis) << ",runs,mean_energy_wh,min_energy_wh,max_energy_wh,success_rate,"
     << "savings_vs_bangbang\n";
  for (const auto& r : rows) {
    os << r.controller << ',' << fmt_double(r.value) << ',' << r.runs << ',' << fmt_double(r.mean_energy_wh) << ','
       << fmt_double(r.min_energy_wh) << ',' << fmt_double(r.max_energy_wh) << ',' << fmt_double(r.success_rate)
       << ',' << (r.savings_vs_bangbang ? fmt_double(*r.savings_vs_bangbang) : std::string("NA")) << '\n';
  }
}

}  // namespace heatplan
