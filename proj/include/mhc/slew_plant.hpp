// Synthetic ground-truth hydraulic slew motor. Stands in for the machine:
// generates identification data and serves as the held-out plant for
// transfer evaluation of trained policies.
//
// Deliberately richer than the model class that identifies it: command
// delay, dead zone, first-order chamber lag, viscous + coulomb friction,
// and a binary brake that engages whenever the (delayed) command is near
// zero while the cabin still turns.
#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>

#include "mhc/common.hpp"

namespace mhc {

struct PlantParams {
  double dt = kInnerDt;                  // s, plant step
  double dead_zone = 0.05;               // normalized command units
  double command_delay = 0.3;            // s, must be a multiple of dt
  double pump_gain = 1.5e7;              // Pa per unit effective command
  double chamber_time_constant = 0.25;   // s
  double torque_per_pressure = 0.008;    // N*m/Pa
  double viscous_friction = 2.0e5;       // N*m*s/rad
  double coulomb_friction = 5.0e3;       // N*m
  double brake_threshold_command = 0.05; // normalized
  double brake_torque = 6.0e4;           // N*m
  double velocity_limit = 0.26;          // rad/s, pump-flow bound (~15 deg/s)
  double ambient_pressure = 0.0;         // Pa (gauge)
  double noise_std_pressure = 2.0e4;     // Pa, read-out noise
  double noise_std_omega = 5.0e-3;       // rad/s, read-out noise

  int delay_steps() const {
    return static_cast<int>(std::lround(command_delay / dt));
  }

  void validate() const {
    if (dt <= 0 || chamber_time_constant <= 0)
      throw ConfigError("plant: time constants must be positive");
    if (dead_zone < 0 || dead_zone >= 0.3)
      throw ConfigError("plant: dead_zone must be in [0, 0.3)");
    const int d = delay_steps();
    if (d < 1 || std::abs(d * dt - command_delay) > 1e-9)
      throw ConfigError("plant: command_delay must be a positive multiple of dt");
  }
};

struct PlantState {
  double angle = 0;          // rad
  double velocity = 0;       // rad/s
  double p_left = 0;         // Pa (gauge)
  double p_right = 0;        // Pa (gauge)
  bool brake_engaged = false;
  std::deque<double> delay_line;  // pending commands, front = next to apply
};

struct PlantMeasurement {
  double p_left = 0;
  double p_right = 0;
  double omega = 0;
  double angle = 0;  // encoder, noise-free
};

namespace detail {
// Symmetric dead zone with unity gain outside the band.
inline double apply_dead_zone(double u, double dz) {
  if (std::abs(u) <= dz) return 0.0;
  const double s = u > 0 ? 1.0 : -1.0;
  return s * (std::abs(u) - dz) / (1.0 - dz);
}
}  // namespace detail

inline PlantState plant_reset(const PlantParams& params,
                              double initial_angle = 0.0) {
  params.validate();
  PlantState s;
  s.angle = initial_angle;
  s.p_left = params.ambient_pressure;
  s.p_right = params.ambient_pressure;
  s.delay_line.assign(params.delay_steps(), 0.0);
  return s;
}

// One 0.02 s plant step. Applies the command that entered the delay line
// delay_steps ago; the new command is queued for later.
inline void plant_step(PlantState& s, const PlantParams& params, double u,
                       double inertia_z, double dt) {
  if (!std::isfinite(u) || !std::isfinite(inertia_z) || inertia_z <= 0)
    throw std::invalid_argument("plant_step: non-finite command or inertia <= 0");
  if (std::abs(dt - params.dt) > 1e-12)
    throw std::invalid_argument("plant_step: dt does not match configured plant step");

  s.delay_line.push_back(u);
  const double u_delayed = s.delay_line.front();
  s.delay_line.pop_front();

  // Chamber pressures relax toward the commanded differential.
  const double eff = detail::apply_dead_zone(u_delayed, params.dead_zone);
  const double target_l = params.ambient_pressure + params.pump_gain * std::max(eff, 0.0);
  const double target_r = params.ambient_pressure + params.pump_gain * std::max(-eff, 0.0);
  const double relax = dt / params.chamber_time_constant;
  s.p_left += relax * (target_l - s.p_left);
  s.p_right += relax * (target_r - s.p_right);

  s.brake_engaged = std::abs(u_delayed) < params.brake_threshold_command &&
                    s.velocity != 0.0;

  const double drive = params.torque_per_pressure * (s.p_left - s.p_right);
  const double resist = params.coulomb_friction +
                        (s.brake_engaged ? params.brake_torque : 0.0);

  double v = s.velocity;
  if (v == 0.0) {
    // Stiction: the drive torque must exceed the resistive bound to move.
    if (std::abs(drive) > resist) {
      const double sgn = drive > 0 ? 1.0 : -1.0;
      v += dt * (drive - sgn * resist) / inertia_z;
    }
  } else {
    const double sgn = v > 0 ? 1.0 : -1.0;
    const double v_new =
        v + dt * (drive - params.viscous_friction * v - sgn * resist) / inertia_z;
    // Resistive torque stops at zero, it never reverses the motion.
    v = (v_new * v < 0.0) ? 0.0 : v_new;
  }
  v = std::clamp(v, -params.velocity_limit, params.velocity_limit);

  s.angle += dt * 0.5 * (s.velocity + v);
  s.velocity = v;
}

// Gaussian read-out noise; plant state itself stays deterministic.
inline PlantMeasurement plant_measure(const PlantState& s,
                                      const PlantParams& params, Rng* rng) {
  PlantMeasurement m;
  m.p_left = s.p_left;
  m.p_right = s.p_right;
  m.omega = s.velocity;
  m.angle = s.angle;
  if (rng != nullptr) {
    m.p_left += rng->normal(0.0, params.noise_std_pressure);
    m.p_right += rng->normal(0.0, params.noise_std_pressure);
    m.omega += rng->normal(0.0, params.noise_std_omega);
  }
  return m;
}

}  // namespace mhc
