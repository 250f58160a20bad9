#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "heatplan/error.hpp"
#include "heatplan/thermal.hpp"

namespace heatplan {

/// One experiment instance: start and target temperatures, deadline and service band.
struct EpisodeSpec {
  Celsius t0_c = 20.0;
  Celsius t_target_c = 60.0;
  int deadline_steps = 60;
  double band_c = 1.0;
  int tol_steps = 1;  // evaluation-time tolerance only; episodes always end at the deadline
  TankParams params{};

  void validate() const {
    params.validate();
    if (deadline_steps < 1) throw ConfigError("EpisodeSpec: deadline_steps must be >= 1");
    if (!(band_c > 0.0)) throw ConfigError("EpisodeSpec: band_c must be > 0");
    if (tol_steps < 1) throw ConfigError("EpisodeSpec: tol_steps must be >= 1");
    if (!std::isfinite(t0_c) || !std::isfinite(t_target_c))
      throw ConfigError("EpisodeSpec: temperatures must be finite");
  }

  bool within_band(Celsius terminal) const { return std::abs(terminal - t_target_c) <= band_c; }
};

/// Reward constants: energy penalty per joule and terminal penalty per degree.
struct RewardParams {
  double alpha = 1.86e-8;
  double beta = 0.03;

  /// The cost of one more on-step must stay below the gain of a 1 degC terminal
  /// improvement. Checked against the heat delivered per on-step.
  void validate(const TankParams& p) const {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("RewardParams: alpha and beta must be >= 0");
    if (!(alpha * p.on_step_delivered_j() < beta * 1.0))
      throw ConfigError("RewardParams: alpha * E_step must be < beta * 1 degC");
  }
};

struct Observation {
  Celsius t_c = 0.0;
  Celsius t_target_c = 0.0;
  Celsius t_ambient_c = 0.0;
  int steps_remaining = 0;

  bool operator==(const Observation&) const = default;
};

struct StepOutcome {
  Observation obs;
  double reward = 0.0;
  double energy_j = 0.0;
  bool done = false;
};

struct EpisodeResult {
  std::vector<Celsius> temps;  // D + 1 entries, temps[0] = t0
  Schedule actions;            // D entries
  std::vector<double> rewards; // D entries
  double energy_wh = 0.0;
  Celsius terminal_temp_c = 0.0;
  bool success = false;
  double episode_return = 0.0;

  std::size_t on_steps() const { return count_on(actions); }

  bool operator==(const EpisodeResult&) const = default;
};

/// Reward of the transition that lands at `next_temp` with post-step clock `next_step`.
///
/// Electrical energy is charged every step; the absolute terminal error is
/// charged once, when the clock reaches the deadline.
inline double transition_reward(double energy_j, Celsius next_temp, int next_step, const EpisodeSpec& spec,
                                const RewardParams& rp) {
  double r = 0.0;  // subtracting keeps zero penalties at +0.0
  r -= rp.alpha * energy_j;
  if (next_step == spec.deadline_steps) r -= rp.beta * std::abs(spec.t_target_c - next_temp);
  return r;
}

struct ReturnBounds {
  double lo = 0.0;
  double hi = 0.0;
  double energy_cost = 0.0;      // alpha * E_step * D, the all-on energy penalty
  double max_terminal_cost = 0.0;
};

/// Range of achievable episode returns. Reachable terminal temperatures are
/// bracketed by the all-off and all-on schedules since the update is monotone.
inline ReturnBounds episode_return_bounds(const EpisodeSpec& spec, const RewardParams& rp) {
  if (spec.deadline_steps < 0) throw ConfigError("episode_return_bounds: negative deadline");
  const auto d = static_cast<std::size_t>(spec.deadline_steps);
  const Schedule all_off(d, Action::Off);
  const Schedule all_on(d, Action::On);
  const Celsius lo_t = deviation_after_schedule(spec.t0_c, all_off, spec.params);
  const Celsius hi_t = deviation_after_schedule(spec.t0_c, all_on, spec.params);
  ReturnBounds b;
  b.energy_cost = rp.alpha * spec.params.on_step_energy_j() * static_cast<double>(d);
  b.max_terminal_cost =
      d == 0 ? 0.0 : rp.beta * std::max(std::abs(spec.t_target_c - lo_t), std::abs(spec.t_target_c - hi_t));
  b.lo = -(b.energy_cost + b.max_terminal_cost);
  b.hi = 0.0;
  return b;
}

/// The finite-horizon heating episode.
///
/// Single-threaded: holds a mutable clock. Distinct instances are independent.
class HeaterEnv {
 public:
  static constexpr Celsius kMinSaneTemp = -50.0;
  static constexpr Celsius kMaxSaneTemp = 150.0;

  HeaterEnv() = default;
  explicit HeaterEnv(RewardParams rp) : rp_(rp) {}

  Observation reset(const EpisodeSpec& spec) {
    spec.validate();
    rp_.validate(spec.params);
    spec_ = spec;
    t_ = 0;
    temp_ = spec.t0_c;
    started_ = true;
    return observe();
  }

  StepOutcome step(Action a) {
    if (!started_) throw UsageError("HeaterEnv::step before reset");
    if (done()) throw UsageError("HeaterEnv::step on a finished episode");
    const double power = spec_.params.power_of(a);
    const Celsius next = step_temperature(temp_, power, spec_.params);
    if (!(next >= kMinSaneTemp && next <= kMaxSaneTemp)) {
      std::ostringstream msg;
      msg << "HeaterEnv: temperature " << next << " left the sane range";
      throw NumericFault(msg.str());
    }
    const double energy = power * spec_.params.dt_s;
    ++t_;
    temp_ = next;
    StepOutcome out;
    out.energy_j = energy;
    out.reward = transition_reward(energy, next, t_, spec_, rp_);
    out.done = done();
    out.obs = observe();
    return out;
  }

  Observation observe() const {
    return {temp_, spec_.t_target_c, spec_.params.t_ambient_c, spec_.deadline_steps - t_};
  }

  bool done() const { return t_ >= spec_.deadline_steps; }
  int time_index() const { return t_; }
  Celsius temperature() const { return temp_; }
  const EpisodeSpec& spec() const { return spec_; }
  const RewardParams& reward_params() const { return rp_; }

 private:
  EpisodeSpec spec_{};
  RewardParams rp_{};
  int t_ = 0;
  Celsius temp_ = 0.0;
  bool started_ = false;
};

/// Incrementally builds an EpisodeResult from env transitions.
class EpisodeRecorder {
 public:
  explicit EpisodeRecorder(const EpisodeSpec& spec) : spec_(spec) {
    result_.temps.reserve(static_cast<std::size_t>(spec.deadline_steps) + 1);
    result_.temps.push_back(spec.t0_c);
  }

  void record(Action a, const StepOutcome& out) {
    result_.actions.push_back(a);
    result_.rewards.push_back(out.reward);
    result_.temps.push_back(out.obs.t_c);
    result_.episode_return += out.reward;
  }

  EpisodeResult finish() {
    result_.terminal_temp_c = result_.temps.back();
    result_.energy_wh = static_cast<double>(result_.on_steps()) * spec_.params.on_step_energy_wh();
    result_.success = spec_.within_band(result_.terminal_temp_c);
    return std::move(result_);
  }

 private:
  EpisodeSpec spec_;
  EpisodeResult result_;
};

/// Replays a fixed schedule through the environment.
inline EpisodeResult run_schedule(const EpisodeSpec& spec, std::span<const Action> schedule,
                                  const RewardParams& rp = {}) {
  HeaterEnv env(rp);
  env.reset(spec);
  if (schedule.size() != static_cast<std::size_t>(spec.deadline_steps))
    throw ConfigError("run_schedule: schedule length must equal the deadline");
  EpisodeRecorder rec(spec);
  for (Action a : schedule) rec.record(a, env.step(a));
  return rec.finish();
}

/// Trajectory CSV: header `step,temp_c,action,power_w,reward,cum_energy_wh`.
///
/// Row t (0 <= t < D) carries the temperature at the start of step t, the action
/// taken, its power and reward, and the cumulative energy after the step. A final
/// row t = D carries the terminal temperature with action -1 and zero power.
inline void write_trajectory_csv(std::ostream& os, const EpisodeResult& r, const TankParams& p) {
  os << "step,temp_c,action,power_w,reward,cum_energy_wh\n";
  double cum_wh = 0.0;
  const auto fixed6 = [&os](double v) { os << std::fixed << std::setprecision(6) << v; };
  for (std::size_t t = 0; t < r.actions.size(); ++t) {
    const double power = p.power_of(r.actions[t]);
    cum_wh += power * p.dt_s / 3600.0;
    os << t << ',';
    fixed6(r.temps[t]);
    os << ',' << static_cast<int>(r.actions[t]) << ',';
    os << std::setprecision(0) << power << ',';
    os << std::setprecision(10) << r.rewards[t] << ',';
    fixed6(cum_wh);
    os << '\n';
  }
  os << r.actions.size() << ',';
  fixed6(r.temps.back());
  os << ",-1,0,0.0000000000,";
  fixed6(cum_wh);
  os << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace heatplan
