#pragma once

// Lumped single-tank immersion heater physics.
//
// The tank is one well-mixed water mass losing heat to a constant ambient
// through a linear (Newtonian) loss term, heated by a relay-switched element
// with fixed efficiency. The control interval is integrated with one explicit
// Euler step:
//
//   T' = T + dt / (m cp) * (eta P - h A (T - Ta))
//
// which makes the deviation from ambient evolve as the linear recurrence
// x' = a x + b u, with a = 1 - h A dt / (m cp) and b = eta P_on dt / (m cp).

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "heatplan/error.hpp"

namespace heatplan {

/// Temperature in degrees Celsius.
using Celsius = double;

enum class Action : std::uint8_t { Off = 0, On = 1 };

/// Open-loop action sequence, one entry per control interval.
using Schedule = std::vector<Action>;

struct TankParams {
  double mass_kg = 50.0;
  double cp = 4184.0;        // J / (kg K)
  double h = 50.0;           // W / degC
  double area_m2 = 1.5;
  double eta = 0.95;
  double p_on_w = 6000.0;
  double p_off_w = 0.0;
  double dt_s = 120.0;
  Celsius t_ambient_c = 20.0;

  /// Heat-loss conductance h*A (W / degC).
  double loss_conductance() const { return h * area_m2; }

  /// Per-step fractional decay of the deviation from ambient.
  double cooling_factor() const { return h * area_m2 * dt_s / (mass_kg * cp); }

  /// Temperature rise from one on-step, excluding losses.
  double heating_increment() const { return eta * p_on_w * dt_s / (mass_kg * cp); }

  /// Electrical energy of one on-step (J).
  double on_step_energy_j() const { return p_on_w * dt_s; }

  /// Heat delivered to the water by one on-step (J).
  double on_step_delivered_j() const { return eta * p_on_w * dt_s; }

  double on_step_energy_wh() const { return p_on_w * dt_s / 3600.0; }

  double power_of(Action a) const { return a == Action::On ? p_on_w : p_off_w; }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const {
    auto fail = [](const char* what) { throw ConfigError(std::string("TankParams: ") + what); };
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(finite(mass_kg) && finite(cp) && finite(h) && finite(area_m2) && finite(eta) &&
          finite(p_on_w) && finite(p_off_w) && finite(dt_s) && finite(t_ambient_c)))
      fail("all fields must be finite");
    if (!(mass_kg > 0.0)) fail("mass_kg must be > 0");
    if (!(cp > 0.0)) fail("cp must be > 0");
    if (h < 0.0) fail("h must be >= 0");
    if (area_m2 < 0.0) fail("area_m2 must be >= 0");
    if (!(dt_s > 0.0)) fail("dt_s must be > 0");
    if (!(eta > 0.0 && eta <= 1.0)) fail("eta must lie in (0, 1]");
    if (p_on_w < 0.0) fail("p_on_w must be >= 0");
    if (p_off_w != 0.0) fail("p_off_w must be 0");
    if (cooling_factor() >= 1.0) {
      std::ostringstream msg;
      msg << "cooling factor " << cooling_factor() << " >= 1 makes the explicit update unstable";
      fail(msg.str().c_str());
    }
  }
};

/// Dimensionless h A dt / (m cp).
inline double cooling_factor(const TankParams& p) { return p.cooling_factor(); }

/// One Euler step of the energy balance at electrical power `power_w`.
///
/// `power_w` must be one of the two relay levels. The update is evaluated in
/// the operand order of the balance equation so results are reproducible.
inline Celsius step_temperature(Celsius t, double power_w, const TankParams& p) {
  if (!std::isfinite(t)) throw NumericFault("step_temperature: non-finite temperature");
  if (power_w != p.p_on_w && power_w != p.p_off_w)
    throw ConfigError("step_temperature: power must be p_on_w or p_off_w");
  return t + (p.dt_s / (p.mass_kg * p.cp)) * (p.eta * power_w - p.h * p.area_m2 * (t - p.t_ambient_c));
}

inline Celsius step_temperature(Celsius t, Action a, const TankParams& p) {
  return step_temperature(t, p.power_of(a), p);
}

/// Fixed point of continuous heating, Ta + eta P_on / (h A).
///
/// Returns nullopt when h A = 0 (no losses, heating is unbounded).
inline std::optional<Celsius> max_steady_temperature(const TankParams& p) {
  const double ua = p.loss_conductance();
  if (ua <= 0.0) return std::nullopt;
  return p.t_ambient_c + p.eta * p.p_on_w / ua;
}

/// Terminal temperature after running `schedule` from `t0`, via the closed-form
/// superposition Ta + a^D (T0 - Ta) + b * sum_{u_t = On} a^(D-1-t).
inline Celsius deviation_after_schedule(Celsius t0, std::span<const Action> schedule, const TankParams& p) {
  const double a = 1.0 - p.cooling_factor();
  const double b = p.heating_increment();
  double forced = 0.0;  // Horner form of the input sum
  for (Action u : schedule) forced = forced * a + (u == Action::On ? b : 0.0);
  const double decay = std::pow(a, static_cast<double>(schedule.size()));
  return p.t_ambient_c + decay * (t0 - p.t_ambient_c) + forced;
}

/// Reference path for deviation_after_schedule: iterate the Euler step.
inline Celsius simulate_schedule(Celsius t0, std::span<const Action> schedule, const TankParams& p) {
  Celsius t = t0;
  for (Action u : schedule) t = step_temperature(t, u, p);
  return t;
}

inline std::size_t count_on(std::span<const Action> schedule) {
  std::size_t n = 0;
  for (Action u : schedule) n += (u == Action::On);
  return n;
}

/// Schedule rendered as a string of '0' / '1', one character per step.
inline std::string to_string(std::span<const Action> schedule) {
  std::string s;
  s.reserve(schedule.size());
  for (Action u : schedule) s.push_back(u == Action::On ? '1' : '0');
  return s;
}

}  // namespace heatplan
