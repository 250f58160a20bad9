#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>

#include "heatplan/env.hpp"
#include "heatplan/thermal.hpp"

namespace heatplan {

/// Relay baseline: full power while below the target, off otherwise.
inline Action bang_bang_action(const Observation& obs) {
  return obs.t_c < obs.t_target_c ? Action::On : Action::Off;
}

template <typename F>
concept Controller = std::invocable<F&, const Observation&> &&
                     std::convertible_to<std::invoke_result_t<F&, const Observation&>, Action>;

/// Closed-loop rollout of `controller` through a fresh environment.
template <Controller F>
EpisodeResult run_controller(const EpisodeSpec& spec, F&& controller, const RewardParams& rp = {}) {
  HeaterEnv env(rp);
  Observation obs = env.reset(spec);
  EpisodeRecorder rec(spec);
  while (!env.done()) {
    const Action a = controller(obs);
    const StepOutcome out = env.step(a);
    rec.record(a, out);
    obs = out.obs;
  }
  return rec.finish();
}

struct OracleResult {
  Schedule schedule;
  std::size_t on_count = 0;
  double energy_wh = 0.0;
  Celsius predicted_terminal_c = 0.0;
  bool feasible = false;
};

namespace detail {

inline OracleResult make_oracle_result(const EpisodeSpec& spec, Schedule s) {
  OracleResult r;
  r.predicted_terminal_c = deviation_after_schedule(spec.t0_c, s, spec.params);
  r.on_count = count_on(s);
  r.energy_wh = static_cast<double>(r.on_count) * spec.params.on_step_energy_wh();
  r.feasible = spec.within_band(r.predicted_terminal_c);
  r.schedule = std::move(s);
  return r;
}

}  // namespace detail

/// Minimal-energy open-loop schedule for the linear tank.
///
/// An on-step at time t adds b a^(D-1-t) to the terminal temperature, so for a
/// fixed on-count the latest placement lands highest. The smallest k whose
/// last-k block reaches the lower band edge is the minimal on-count; when that
/// block overshoots the upper edge, on-steps are slid earlier one slot at a
/// time (each slide scales that step's contribution by a) until the terminal
/// enters the band. Infeasible specs return the closest schedule seen.
inline OracleResult just_in_time_schedule(const EpisodeSpec& spec) {
  spec.validate();
  const auto d = static_cast<std::size_t>(spec.deadline_steps);
  const Celsius lower = spec.t_target_c - spec.band_c;

  auto last_k = [d](std::size_t k) {
    Schedule s(d, Action::Off);
    std::fill(s.end() - static_cast<std::ptrdiff_t>(k), s.end(), Action::On);
    return s;
  };

  std::size_t k = 0;
  while (k < d && deviation_after_schedule(spec.t0_c, last_k(k), spec.params) < lower) ++k;

  Schedule s = last_k(k);
  OracleResult best = detail::make_oracle_result(spec, s);
  if (best.feasible || best.predicted_terminal_c < lower) return best;  // fits, or all-on falls short

  // Overshoot. Slide the earliest slidable on-step one slot earlier per iteration.
  auto error = [&spec](const OracleResult& r) { return std::abs(r.predicted_terminal_c - spec.t_target_c); };
  for (;;) {
    std::size_t slot = d;  // index of the earliest on-step that has a free slot before it
    for (std::size_t t = 0; t < d; ++t) {
      if (s[t] == Action::On && t > 0 && s[t - 1] == Action::Off) {
        slot = t;
        break;
      }
    }
    if (slot == d) break;  // all on-steps packed at the start
    s[slot - 1] = Action::On;
    s[slot] = Action::Off;
    OracleResult cand = detail::make_oracle_result(spec, s);
    if (cand.feasible) return cand;
    if (error(cand) < error(best)) best = std::move(cand);
    if (cand.predicted_terminal_c < lower) break;  // slid past the band in one move
  }
  return best;
}

inline constexpr int kBruteForceMaxSteps = 20;

/// Exhaustive minimal-on-count schedule over all 2^D schedules.
///
/// Feasible schedules are ranked by on-count, ties going to the latest
/// placement (the schedule read as a binary number with step t weighted 2^t is
/// largest). Without a feasible schedule the minimum terminal error wins.
inline OracleResult brute_force_schedule(const EpisodeSpec& spec) {
  spec.validate();
  if (spec.deadline_steps > kBruteForceMaxSteps)
    throw ConfigError("brute_force_schedule: deadline exceeds the 2^20 enumeration budget");
  const int d = spec.deadline_steps;
  const double a = 1.0 - spec.params.cooling_factor();
  const double b = spec.params.heating_increment();
  const double decay = std::pow(a, static_cast<double>(d));
  const double free_temp = spec.params.t_ambient_c + decay * (spec.t0_c - spec.params.t_ambient_c);

  const std::uint32_t total = 1u << d;
  std::uint32_t best_feasible = 0;
  int best_feasible_count = std::numeric_limits<int>::max();
  std::uint32_t best_any = 0;
  double best_any_err = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    // Horner over steps in time order to match deviation_after_schedule exactly.
    double forced = 0.0;
    for (int t = 0; t < d; ++t) forced = forced * a + (((mask >> t) & 1u) ? b : 0.0);
    const double terminal = free_temp + forced;
    const double err = std::abs(terminal - spec.t_target_c);
    const int count = std::popcount(mask);
    if (err <= spec.band_c) {
      if (count < best_feasible_count || (count == best_feasible_count && mask > best_feasible)) {
        best_feasible_count = count;
        best_feasible = mask;
      }
    }
    if (err < best_any_err || (err == best_any_err && mask > best_any)) {
      best_any_err = err;
      best_any = mask;
    }
  }

  const std::uint32_t chosen = best_feasible_count != std::numeric_limits<int>::max() ? best_feasible : best_any;
  Schedule s(static_cast<std::size_t>(d));
  for (int t = 0; t < d; ++t) s[static_cast<std::size_t>(t)] = ((chosen >> t) & 1u) ? Action::On : Action::Off;
  return detail::make_oracle_result(spec, std::move(s));
}

}  // namespace heatplan
