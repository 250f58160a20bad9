#pragma once

// UCB1 tree search over the binary heater action, planning from scratch at
// every control step with the exact simulator as the rollout model.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "heatplan/env.hpp"
#include "heatplan/rng.hpp"
#include "heatplan/thermal.hpp"

namespace heatplan {

struct MctsConfig {
  int n_simulations = 25000;
  double c_ucb = 1.4142135623730951;
  std::uint64_t rng_seed = 0;
  int max_rollout_depth = 0;  // 0: roll out to the deadline

  void validate() const {
    if (n_simulations < 1) throw ConfigError("MctsConfig: n_simulations must be >= 1");
    if (!(c_ucb >= 0.0)) throw ConfigError("MctsConfig: c_ucb must be >= 0");
    if (max_rollout_depth < 0) throw ConfigError("MctsConfig: max_rollout_depth must be >= 0");
  }
};

struct SearchNode {
  static constexpr std::int32_t kNone = -1;

  Celsius temp = 0.0;
  int time_index = 0;
  double edge_reward = 0.0;  // reward of the transition into this node
  std::int64_t visits = 0;
  double total_return = 0.0;
  std::array<std::int32_t, 2> children{kNone, kNone};  // indexed by Action

  double mean_return() const { return visits > 0 ? total_return / static_cast<double>(visits) : 0.0; }
};

/// UCB1 score Q/n + c sqrt(ln N / n); unvisited children score +inf.
inline double ucb1_score(double total_return, std::int64_t visits, std::int64_t parent_visits, double c) {
  if (visits == 0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(visits);
  return total_return / n + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / n);
}

inline double ucb1_score(const SearchNode& child, std::int64_t parent_visits, double c) {
  return ucb1_score(child.total_return, child.visits, parent_visits, c);
}

/// Root statistics of one decision, for the optional search trace.
struct MctsDecision {
  int step = 0;
  std::array<std::int64_t, 2> root_visits{0, 0};
  std::array<double, 2> q{0.0, 0.0};  // mean return per root child
  Action chosen = Action::Off;
};

/// One search tree. Single-threaded; build a fresh planner per decision.
///
/// Backup convention: every simulation adds one visit to the root and to each
/// node on its path, so after n simulations root.visits == n and the root
/// children's visits sum to n. The backed-up value is the undiscounted return
/// from the root state to the end of the rollout (reward-to-go of the decision).
class MctsPlanner {
 public:
  MctsPlanner(const EpisodeSpec& spec, const RewardParams& rp, const MctsConfig& cfg)
      : spec_(spec), rp_(rp), cfg_(cfg) {}

  Action plan(Celsius temp, int time_index, std::uint64_t stream_seed) {
    if (time_index < 0 || time_index >= spec_.deadline_steps)
      throw UsageError("MctsPlanner::plan: time index outside [0, D)");
    rng_ = Rng(stream_seed);
    nodes_.clear();
    nodes_.reserve(static_cast<std::size_t>(std::min(cfg_.n_simulations, 1 << 20)) + 1);
    nodes_.push_back(SearchNode{temp, time_index});
    for (int i = 0; i < cfg_.n_simulations; ++i) simulate();
    return best_root_action();
  }

  const SearchNode& root() const { return nodes_.front(); }
  const std::vector<SearchNode>& nodes() const { return nodes_; }

  const SearchNode* root_child(Action a) const {
    const auto idx = root().children[static_cast<std::size_t>(a)];
    return idx == SearchNode::kNone ? nullptr : &nodes_[static_cast<std::size_t>(idx)];
  }

  /// Highest visit count, ties to Off.
  Action best_root_action() const {
    const SearchNode* off = root_child(Action::Off);
    const SearchNode* on = root_child(Action::On);
    const std::int64_t n_off = off ? off->visits : 0;
    const std::int64_t n_on = on ? on->visits : 0;
    return n_on > n_off ? Action::On : Action::Off;
  }

  MctsDecision decision(int step) const {
    MctsDecision d;
    d.step = step;
    for (Action a : {Action::Off, Action::On}) {
      const auto i = static_cast<std::size_t>(a);
      if (const SearchNode* c = root_child(a)) {
        d.root_visits[i] = c->visits;
        d.q[i] = c->mean_return();
      }
    }
    d.chosen = best_root_action();
    return d;
  }

  /// Uniform-random rollout from (temp, time_index). Returns the accumulated
  /// reward; the actions taken are appended to `taken` when it is non-null.
  double rollout(Celsius temp, int time_index, Schedule* taken = nullptr) {
    const TankParams& p = spec_.params;
    const int horizon = cfg_.max_rollout_depth > 0
                            ? std::min(spec_.deadline_steps, time_index + cfg_.max_rollout_depth)
                            : spec_.deadline_steps;
    double ret = 0.0;
    for (int t = time_index; t < horizon; ++t) {
      const Action a = rng_.coin() ? Action::On : Action::Off;
      const double power = p.power_of(a);
      temp = step_temperature(temp, power, p);
      ret += transition_reward(power * p.dt_s, temp, t + 1, spec_, rp_);
      if (taken) taken->push_back(a);
    }
    return ret;
  }

 private:
  void simulate() {
    path_.clear();
    std::size_t cur = 0;
    path_.push_back(cur);
    double ret = 0.0;
    for (;;) {
      const SearchNode& node = nodes_[cur];
      if (node.time_index >= spec_.deadline_steps) break;  // terminal leaf
      const std::int32_t off = node.children[0];
      const std::int32_t on = node.children[1];
      if (off == SearchNode::kNone || on == SearchNode::kNone) {
        const Action a = off == SearchNode::kNone ? Action::Off : Action::On;
        cur = expand(cur, a);
        path_.push_back(cur);
        ret += nodes_[cur].edge_reward;
        ret += rollout(nodes_[cur].temp, nodes_[cur].time_index);
        break;
      }
      const std::int64_t parent_visits = std::max<std::int64_t>(node.visits, 1);
      const double s_off = ucb1_score(nodes_[static_cast<std::size_t>(off)], parent_visits, cfg_.c_ucb);
      const double s_on = ucb1_score(nodes_[static_cast<std::size_t>(on)], parent_visits, cfg_.c_ucb);
      cur = static_cast<std::size_t>(s_on > s_off ? on : off);
      path_.push_back(cur);
      ret += nodes_[cur].edge_reward;
    }
    for (std::size_t i : path_) {
      nodes_[i].visits += 1;
      nodes_[i].total_return += ret;
    }
  }

  std::size_t expand(std::size_t parent, Action a) {
    const SearchNode& p = nodes_[parent];
    const double power = spec_.params.power_of(a);
    SearchNode child;
    child.temp = step_temperature(p.temp, power, spec_.params);
    child.time_index = p.time_index + 1;
    child.edge_reward = transition_reward(power * spec_.params.dt_s, child.temp, child.time_index, spec_, rp_);
    const auto idx = nodes_.size();
    nodes_.push_back(child);
    nodes_[parent].children[static_cast<std::size_t>(a)] = static_cast<std::int32_t>(idx);
    return idx;
  }

  EpisodeSpec spec_;
  RewardParams rp_;
  MctsConfig cfg_;
  Rng rng_{0};
  std::vector<SearchNode> nodes_;
  std::vector<std::size_t> path_;
};

/// Per-decision RNG stream: the configured seed XOR the step index.
inline std::uint64_t decision_seed(const MctsConfig& cfg, int time_index) {
  return cfg.rng_seed ^ static_cast<std::uint64_t>(time_index);
}

/// Root action for the state (temp, time_index) of `spec`.
inline Action plan_action(Celsius temp, int time_index, const EpisodeSpec& spec, const MctsConfig& cfg,
                          const RewardParams& rp = {}) {
  cfg.validate();
  MctsPlanner planner(spec, rp, cfg);
  return planner.plan(temp, time_index, decision_seed(cfg, time_index));
}

using MctsTraceSink = std::function<void(const MctsDecision&)>;

/// Closed-loop episode, replanning from the current state at every step.
inline EpisodeResult run_mcts_episode(const EpisodeSpec& spec, const MctsConfig& cfg, const RewardParams& rp = {},
                                      const MctsTraceSink& trace = {}) {
  cfg.validate();
  HeaterEnv env(rp);
  env.reset(spec);
  EpisodeRecorder rec(spec);
  MctsPlanner planner(spec, rp, cfg);
  while (!env.done()) {
    const int t = env.time_index();
    const Action a = planner.plan(env.temperature(), t, decision_seed(cfg, t));
    if (trace) trace(planner.decision(t));
    rec.record(a, env.step(a));
  }
  return rec.finish();
}

}  // namespace heatplan
