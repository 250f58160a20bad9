#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "heatplan/baseline.hpp"

using namespace heatplan;

namespace {

EpisodeSpec spec_of(double t0, double target, int d) {
  EpisodeSpec s;
  s.t0_c = t0;
  s.t_target_c = target;
  s.deadline_steps = d;
  return s;
}

Schedule last_k(std::size_t d, std::size_t k) {
  Schedule s(d, Action::Off);
  std::fill(s.end() - static_cast<std::ptrdiff_t>(k), s.end(), Action::On);
  return s;
}

}  // namespace

TEST(JustInTime, DefaultEpisode) {
  const auto r = just_in_time_schedule(spec_of(20, 60, 60));
  EXPECT_EQ(r.on_count, 17u);
  EXPECT_EQ(r.energy_wh, 3400.0);
  EXPECT_NEAR(r.predicted_terminal_c, 60.0, 0.05);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.schedule, last_k(60, 17));
  // One fewer on-step falls short of the band.
  EXPECT_LT(deviation_after_schedule(20, last_k(60, 16), {}), 59.0);
  EXPECT_NEAR(simulate_schedule(20, r.schedule, {}), r.predicted_terminal_c, 1e-9);
}

TEST(JustInTime, StartingAtTarget) {
  const auto r = just_in_time_schedule(spec_of(60, 60, 60));
  EXPECT_EQ(r.on_count, 15u);
  EXPECT_NEAR(r.predicted_terminal_c, 59.5628, 1e-3);
  EXPECT_TRUE(r.feasible);
}

TEST(JustInTime, InfeasibleReturnsAllOn) {
  const auto r = just_in_time_schedule(spec_of(10, 80, 10));
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.on_count, 10u);
  EXPECT_NEAR(r.predicted_terminal_c, 40.598, 1e-2);
}

TEST(JustInTime, ShortEpisode) {
  const auto r = just_in_time_schedule(spec_of(20, 26, 4));
  EXPECT_EQ(r.schedule, last_k(4, 2));
  EXPECT_NEAR(r.predicted_terminal_c, 26.3985, 1e-3);
  EXPECT_TRUE(r.feasible);
}

TEST(JustInTime, ZeroOnStepsWhenAlreadyInBand) {
  // Free cooling from 61 over 1 step lands at 59.59, inside the band.
  const auto r = just_in_time_schedule(spec_of(61, 60, 1));
  EXPECT_EQ(r.on_count, 0u);
  EXPECT_TRUE(r.feasible);
}

TEST(BruteForce, MatchesExamples) {
  const auto r = brute_force_schedule(spec_of(20, 26, 4));
  EXPECT_EQ(r.schedule, last_k(4, 2));
  EXPECT_TRUE(r.feasible);
  const auto inf = brute_force_schedule(spec_of(10, 80, 10));
  EXPECT_FALSE(inf.feasible);
  EXPECT_EQ(inf.on_count, 10u);
  EXPECT_THROW(brute_force_schedule(spec_of(20, 60, kBruteForceMaxSteps + 1)), ConfigError);
}

TEST(Oracle, GreedyMatchesBruteForceOnSmallGrid) {
  int feasible = 0, total = 0;
  for (double t0 : {10.0, 20.0, 30.0})
    for (double target : {30.0, 40.0, 50.0})
      for (int d = 2; d <= 14; d += 1) {
        const auto spec = spec_of(t0, target, d);
        const auto g = just_in_time_schedule(spec);
        const auto b = brute_force_schedule(spec);
        ++total;
        ASSERT_EQ(g.feasible, b.feasible) << t0 << ' ' << target << ' ' << d;
        if (b.feasible) {
          ++feasible;
          EXPECT_EQ(g.on_count, b.on_count) << t0 << ' ' << target << ' ' << d;
        }
      }
  EXPECT_GE(total, 100);
  EXPECT_GT(feasible, 30);
}

TEST(Oracle, LatePackingBeatsEarlyPacking) {
  const TankParams p;
  for (std::size_t d : {10u, 30u, 60u})
    for (std::size_t k = 1; k < d; k += 3) {
      Schedule early(d, Action::Off);
      std::fill(early.begin(), early.begin() + static_cast<std::ptrdiff_t>(k), Action::On);
      EXPECT_GT(deviation_after_schedule(20, last_k(d, k), p), deviation_after_schedule(20, early, p));
    }
}

TEST(BangBang, Action) {
  EXPECT_EQ(bang_bang_action({59.9, 60, 20, 10}), Action::On);
  EXPECT_EQ(bang_bang_action({60.0, 60, 20, 10}), Action::Off);
  EXPECT_EQ(bang_bang_action({75.0, 60, 20, 10}), Action::Off);
}

TEST(BangBang, EnergyAtDefaultEpisode) {
  const auto r = run_controller(spec_of(20, 60, 60), bang_bang_action);
  EXPECT_GE(r.energy_wh, 7400.0);
  EXPECT_LE(r.energy_wh, 7900.0);
  EXPECT_EQ(r.energy_wh, 7800.0);
  // The ramp is 17 consecutive on-steps.
  for (int t = 0; t < 17; ++t) EXPECT_EQ(r.actions[static_cast<std::size_t>(t)], Action::On);
}

TEST(BangBang, EnergyGrowsWithDeadlineAndStaysNearPaper) {
  double prev = 0.0;
  for (int d = 30; d <= 90; d += 15) {
    const auto r = run_controller(spec_of(20, 60, d), bang_bang_action);
    EXPECT_GT(r.energy_wh, prev) << d;
    prev = r.energy_wh;
    // Relay swing around the target: ramp overshoots by at most one step lift.
    EXPECT_GE(r.terminal_temp_c, 60.0 - 1.8) << d;
    EXPECT_LE(r.terminal_temp_c, 60.0 + 1.6) << d;
  }
  EXPECT_NEAR(run_controller(spec_of(20, 60, 30), bang_bang_action).energy_wh, 4370.0, 0.15 * 4370.0);
  EXPECT_NEAR(run_controller(spec_of(20, 60, 90), bang_bang_action).energy_wh, 10450.0, 0.15 * 10450.0);
}

TEST(BangBang, UsesAtLeastTheOracleEnergy) {
  for (double t0 : {10.0, 20.0, 30.0})
    for (double target : {40.0, 60.0, 80.0})
      for (int d : {30, 60, 90}) {
        const auto spec = spec_of(t0, target, d);
        const auto o = just_in_time_schedule(spec);
        if (!o.feasible) continue;
        EXPECT_GE(run_controller(spec, bang_bang_action).energy_wh, o.energy_wh);
      }
}
