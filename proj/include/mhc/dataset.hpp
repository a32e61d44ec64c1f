// Identification dataset for the slew actuator: excitation signals, plant
// recording at 0.1 s sample rate, mirroring augmentation, and windowing
// into the paired 41-feature layouts consumed by the pressure and velocity
// networks.
#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mhc/common.hpp"
#include "mhc/geometry.hpp"
#include "mhc/slew_plant.hpp"

namespace mhc {

struct SlewSample {
  double t = 0;          // s
  double u = 0;          // normalized command
  double p_l = 0;        // Pa
  double p_r = 0;        // Pa
  double omega = 0;      // rad/s
  double inertia_z = 0;  // kg*m^2
};

enum class SourceTag { periodic, random_arm, driving, closed_loop };

inline const char* to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::periodic: return "periodic";
    case SourceTag::random_arm: return "random_arm";
    case SourceTag::driving: return "driving";
    case SourceTag::closed_loop: return "closed_loop";
  }
  return "?";
}

inline SourceTag source_tag_from_string(const std::string& s) {
  if (s == "periodic") return SourceTag::periodic;
  if (s == "random_arm") return SourceTag::random_arm;
  if (s == "driving") return SourceTag::driving;
  if (s == "closed_loop") return SourceTag::closed_loop;
  throw ConfigError("unknown source tag: " + s);
}

// Minimum run length: 10-step state history + 10-step command history + 1
// target sample.
inline constexpr int kMinRunLength = 21;
inline constexpr int kFirstWindowAnchor = kMinRunLength - 1;

struct Run {
  std::vector<SlewSample> samples;
  SourceTag source_tag = SourceTag::periodic;
};

// Feature layouts (proposed configuration):
//   pressure net: [u(k-9..k), p_l(k-10..k-1), p_r(k-10..k-1),
//                  w(k-10..k-1), I_z(k-1)]           -> 41
//   velocity net: [u(k-9..k), p_l(k-9..k), p_r(k-9..k),
//                  w(k-10..k-1), I_z(k-1)]           -> 41
struct WindowedPair {
  std::array<double, 41> pressure_features{};
  std::array<double, 41> velocity_features{};
  std::array<double, 2> pressure_target{};  // p_l(k), p_r(k)
  double velocity_target = 0;               // w(k)
};

// ---------------------------------------------------------------------------
// Excitation signals

enum class ExcitationKind { step, sinusoidal, trapezoidal, random };

inline ExcitationKind excitation_kind_from_string(const std::string& s) {
  if (s == "step") return ExcitationKind::step;
  if (s == "sinusoidal") return ExcitationKind::sinusoidal;
  if (s == "trapezoidal") return ExcitationKind::trapezoidal;
  if (s == "random") return ExcitationKind::random;
  throw ConfigError("unknown excitation kind: " + s);
}

struct ExcitationParams {
  double amplitude = 1.0;
  double period_s = 10.0;   // step / sinusoidal / trapezoidal
  double ramp_s = 2.0;      // trapezoidal ramp duration
  double hold_min_s = 0.5;  // random: piecewise-constant hold range
  double hold_max_s = 3.0;
};

// Command sequence at the plant rate (kInnerDt).
inline std::vector<double> generate_excitation(ExcitationKind kind,
                                               const ExcitationParams& p,
                                               double duration_s,
                                               uint64_t seed) {
  if (duration_s <= 0) throw ConfigError("excitation: duration must be > 0");
  if (std::abs(p.amplitude) > 1.0)
    throw ConfigError("excitation: amplitude must be <= 1");
  const int n = static_cast<int>(std::lround(duration_s / kInnerDt));
  std::vector<double> u(n, 0.0);
  switch (kind) {
    case ExcitationKind::step: {
      // Alternating +/- amplitude, sign flips every full period.
      for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(i * kInnerDt / p.period_s);
        u[i] = (k % 2 == 0) ? p.amplitude : -p.amplitude;
      }
      break;
    }
    case ExcitationKind::sinusoidal: {
      for (int i = 0; i < n; ++i)
        u[i] = p.amplitude * std::sin(2.0 * kPi * i * kInnerDt / p.period_s);
      break;
    }
    case ExcitationKind::trapezoidal: {
      // One symmetric trapezoid per period: ramp up, plateau, ramp through
      // zero to -amplitude, plateau, ramp back to zero.
      const double P = p.period_s;
      const double r = p.ramp_s;
      if (P < 4 * r) throw ConfigError("excitation: trapezoid period < 4*ramp");
      for (int i = 0; i < n; ++i) {
        const double t = std::fmod(i * kInnerDt, P);
        double v;
        if (t < r)
          v = t / r;
        else if (t < P / 2 - r)
          v = 1.0;
        else if (t < P / 2 + r)
          v = 1.0 - (t - (P / 2 - r)) / r;
        else if (t < P - r)
          v = -1.0;
        else
          v = -1.0 + (t - (P - r)) / r;
        u[i] = p.amplitude * v;
      }
      break;
    }
    case ExcitationKind::random: {
      Rng rng(seed);
      int i = 0;
      while (i < n) {
        const double level = rng.uniform(-p.amplitude, p.amplitude);
        const int hold = std::max(
            1, static_cast<int>(rng.uniform(p.hold_min_s, p.hold_max_s) / kInnerDt));
        for (int j = 0; j < hold && i < n; ++j, ++i) u[i] = level;
      }
      break;
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Recording

// Arm configuration during a collection run. Either static or a scripted
// periodic boom/stick sweep (the stand-in for manual random movements).
struct ArmScript {
  JointState base;          // tool angles zero, qdot zero
  bool moving = false;
  double boom_amp = 0.15;   // rad
  double stick_amp = 0.25;  // rad
  double period_s = 20.0;
  double load_kg = 0.0;

  JointState at(double t, const MachineGeometry& g) const {
    JointState js = base;
    if (moving) {
      const double ph = 2.0 * kPi * t / period_s;
      js.q[1] = std::clamp(base.q[1] + boom_amp * std::sin(ph), g.boom_min,
                           g.boom_max);
      js.q[2] = std::clamp(base.q[2] + stick_amp * std::sin(0.7 * ph + 1.0),
                           g.stick_min, g.stick_max);
    }
    return js;
  }
};

// Step the plant at 0.02 s under the given command sequence and record
// samples every 0.1 s. Sample k carries the measurement at t_k and the
// command that was applied over the interval ending at t_k, so the recorded
// u(..k) history is exactly what caused the recorded state at k.
inline Run collect(const PlantParams& plant_params,
                   const std::vector<double>& commands,
                   const ArmScript& arm, const MachineGeometry& geom,
                   SourceTag tag, uint64_t seed, bool with_noise = true) {
  Run run;
  run.source_tag = tag;
  Rng noise_rng(derive_seed(seed, 0xDA7A));
  Rng* noise = with_noise ? &noise_rng : nullptr;

  PlantState state = plant_reset(plant_params, 0.0);
  const int n_samples = static_cast<int>(commands.size()) / kInnerPerTick;
  run.samples.reserve(n_samples + 1);

  auto record = [&](int k, double u_interval) {
    const double t = k * kTickDt;
    const JointState js = arm.at(t, geom);
    const PlantMeasurement m = plant_measure(state, plant_params, noise);
    run.samples.push_back(
        {t, u_interval, m.p_left, m.p_right, m.omega,
         inertia_about_z(js, geom, arm.load_kg)});
  };

  record(0, 0.0);
  for (int k = 1; k <= n_samples; ++k) {
    for (int j = 0; j < kInnerPerTick; ++j) {
      const int idx = (k - 1) * kInnerPerTick + j;
      const JointState js = arm.at(idx * kInnerDt, geom);
      plant_step(state, plant_params, commands[idx],
                 inertia_about_z(js, geom, arm.load_kg), plant_params.dt);
    }
    record(k, commands[(k - 1) * kInnerPerTick]);
  }
  return run;
}

// Mirroring augmentation: the slew joint has symmetric rotation dynamics,
// so a negated-command trajectory is the negated trajectory with the
// chamber roles exchanged.
inline Run mirror(const Run& run) {
  Run m = run;
  for (auto& s : m.samples) {
    s.u = -s.u;
    s.omega = -s.omega;
    std::swap(s.p_l, s.p_r);
  }
  return m;
}

// Slice a run into training pairs. Anchors start at kFirstWindowAnchor so a
// minimum-length run yields exactly one pair.
inline std::vector<WindowedPair> window(const Run& run) {
  const int n = static_cast<int>(run.samples.size());
  std::vector<WindowedPair> out;
  if (n < kMinRunLength) return out;
  out.reserve(n - kFirstWindowAnchor);
  const auto& s = run.samples;
  for (int k = kFirstWindowAnchor; k < n; ++k) {
    WindowedPair w;
    for (int i = 0; i < 10; ++i) {
      w.pressure_features[i] = s[k - 9 + i].u;
      w.pressure_features[10 + i] = s[k - 10 + i].p_l;
      w.pressure_features[20 + i] = s[k - 10 + i].p_r;
      w.pressure_features[30 + i] = s[k - 10 + i].omega;

      w.velocity_features[i] = s[k - 9 + i].u;
      w.velocity_features[10 + i] = s[k - 9 + i].p_l;
      w.velocity_features[20 + i] = s[k - 9 + i].p_r;
      w.velocity_features[30 + i] = s[k - 10 + i].omega;
    }
    w.pressure_features[40] = s[k - 1].inertia_z;
    w.velocity_features[40] = s[k - 1].inertia_z;
    w.pressure_target = {s[k].p_l, s[k].p_r};
    w.velocity_target = s[k].omega;
    out.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run files

inline void write_run_csv(const std::filesystem::path& path, const Run& run) {
  CsvWriter w(path, "t,u,p_l,p_r,omega,inertia_z");
  for (const auto& s : run.samples)
    w.row({s.t, s.u, s.p_l, s.p_r, s.omega, s.inertia_z});
}

inline Run read_run_csv(const std::filesystem::path& path, SourceTag tag) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"t", "u", "p_l", "p_r", "omega",
                                           "inertia_z"})
    throw IoError("unexpected run csv header in " + path.string());
  Run run;
  run.source_tag = tag;
  run.samples.reserve(t.rows.size());
  for (const auto& r : t.rows)
    run.samples.push_back({r[0], r[1], r[2], r[3], r[4], r[5]});
  return run;
}

}  // namespace mhc
