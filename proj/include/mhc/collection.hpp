// Dataset collection campaign against the synthetic plant: regular
// excitation runs with a static arm, random references with arm motion,
// pseudo driving cycles, and closed-loop runs with a controller tracking
// slew targets. Runs land as CSV files plus a manifest carrying tags and
// the train/validation split.
#pragma once

#include <json.hpp>

#include <filesystem>

#include "mhc/common.hpp"
#include "mhc/config.hpp"
#include "mhc/dataset.hpp"
#include "mhc/eval.hpp"

namespace mhc {

struct CollectionEntry {
  SourceTag tag = SourceTag::periodic;
  ExcitationKind kind = ExcitationKind::step;
  ExcitationParams params;
  double duration_s = 120;
  ArmScript arm;
  uint64_t seed = 0;
};

inline ArmScript random_arm_script(Rng& rng, const MachineGeometry& geom,
                                   const RandomizationRanges& ranges,
                                   bool moving) {
  ArmScript a;
  a.base.q[1] = rng.uniform(geom.boom_min + 0.05, geom.boom_max - 0.05);
  a.base.q[2] = rng.uniform(geom.stick_min + 0.05, geom.stick_max - 0.05);
  a.load_kg = rng.uniform(ranges.load_min, ranges.load_max);
  a.moving = moving;
  if (moving) {
    a.boom_amp = rng.uniform(0.05, 0.2);
    a.stick_amp = rng.uniform(0.1, 0.35);
    a.period_s = rng.uniform(12.0, 30.0);
  }
  return a;
}

// Open-loop portion of the campaign (everything except closed_loop).
inline std::vector<CollectionEntry> build_collection_plan(
    const GlobalConfig& cfg, double scale, uint64_t seed) {
  std::vector<CollectionEntry> plan;
  Rng rng(derive_seed(seed, 0xC011EC7));
  const double run_s = cfg.dataset.run_seconds;

  auto add_runs = [&](double minutes, SourceTag tag, bool moving_arm,
                      bool random_kind) {
    double remaining = minutes * 60.0 * scale;
    int i = 0;
    while (remaining > 1.0) {
      CollectionEntry e;
      e.tag = tag;
      e.duration_s = std::min(run_s, remaining);
      if (e.duration_s / kTickDt < kMinRunLength) break;
      if (random_kind) {
        e.kind = ExcitationKind::random;
        e.params.amplitude = rng.uniform(0.5, 1.0);
        e.params.hold_min_s = tag == SourceTag::driving ? 1.0 : 0.5;
        e.params.hold_max_s = tag == SourceTag::driving ? 6.0 : 3.0;
      } else {
        const int which = i % 3;
        e.kind = which == 0   ? ExcitationKind::step
                 : which == 1 ? ExcitationKind::sinusoidal
                              : ExcitationKind::trapezoidal;
        e.params.amplitude = rng.uniform(0.3, 1.0);
        e.params.period_s = rng.uniform(8.0, 24.0);
        e.params.ramp_s = rng.uniform(1.0, 2.5);
      }
      e.arm = random_arm_script(rng, cfg.geometry, cfg.ranges, moving_arm);
      e.seed = derive_seed(seed, 0xA0000 + plan.size());
      plan.push_back(e);
      remaining -= e.duration_s;
      ++i;
    }
  };

  add_runs(cfg.dataset.periodic_minutes, SourceTag::periodic, false, false);
  add_runs(cfg.dataset.random_arm_minutes, SourceTag::random_arm, true, true);
  add_runs(cfg.dataset.driving_minutes, SourceTag::driving, true, true);
  return plan;
}

// Closed-loop run: a PI controller (or any tick-rate command source) tracks
// a random slew-target schedule on the plant; samples are recorded with the
// same convention as open-loop collection.
inline Run collect_closed_loop(const PlantParams& plant_params,
                               const PiGains& gains, const ArmScript& arm,
                               const MachineGeometry& geom, double duration_s,
                               uint64_t seed, bool with_noise = true) {
  Run run;
  run.source_tag = SourceTag::closed_loop;
  Rng rng(derive_seed(seed, 0xC105ED));
  Rng noise_rng(derive_seed(seed, 0xDA7A));
  Rng* noise = with_noise ? &noise_rng : nullptr;

  PlantState state = plant_reset(plant_params, 0.0);
  const int n_ticks = static_cast<int>(duration_s / kTickDt);

  double target = 0;
  int next_switch = 0;
  double integral = 0;

  auto inertia_at = [&](double t) {
    return inertia_about_z(arm.at(t, geom), geom, arm.load_kg);
  };

  auto record = [&](int k, double u_interval) {
    const PlantMeasurement m = plant_measure(state, plant_params, noise);
    run.samples.push_back({k * kTickDt, u_interval, m.p_left, m.p_right,
                           m.omega, inertia_at(k * kTickDt)});
  };

  record(0, 0.0);
  for (int k = 0; k < n_ticks; ++k) {
    if (k >= next_switch) {
      target = state.angle + rng.sign() * rng.uniform(0.3, 1.2);
      next_switch = k + rng.uniform_int(60, 120);  // 6-12 s per target
      integral = 0;
    }
    const double error = target - state.angle;
    integral += error * kTickDt;
    if (gains.ki > 0)
      integral = std::clamp(integral, -1.0 / gains.ki, 1.0 / gains.ki);
    const double u =
        std::clamp(gains.kp * error + gains.ki * integral, -1.0, 1.0);
    for (int j = 0; j < kInnerPerTick; ++j) {
      const double t = k * kTickDt + j * kInnerDt;
      plant_step(state, plant_params, u, inertia_at(t), plant_params.dt);
    }
    record(k + 1, u);
  }
  return run;
}

// Closed-loop run with a trained slew policy in the loop (the two-stage
// collection the final model is built from). The policy drives the plant
// through the regular environment; pressures are read off the plant.
inline Run collect_closed_loop_policy(const GlobalConfig& cfg,
                                      const PolicyCheckpoint& ckpt,
                                      double duration_s, uint64_t seed,
                                      bool with_noise = true) {
  if (!ckpt.config.slew_only)
    throw ConfigError("closed-loop collection needs a slew-only policy");
  Run run;
  run.source_tag = SourceTag::closed_loop;
  Rng noise_rng(derive_seed(seed, 0xDA7A));
  Rng* noise = with_noise ? &noise_rng : nullptr;

  Environment::Config env_cfg = cfg.env_config(/*slew_only=*/true);
  env_cfg.history = ckpt.config.history;
  env_cfg.max_ticks = static_cast<int>(duration_s / kTickDt) + 10;
  Environment env(env_cfg, cfg.plant);
  env.reset(derive_seed(seed, 1));

  const int n_ticks = static_cast<int>(duration_s / kTickDt);
  auto record = [&](int k, double u_interval) {
    const PlantMeasurement m =
        plant_measure(*env.plant_state(), cfg.plant, noise);
    run.samples.push_back({k * kTickDt, u_interval, m.p_left, m.p_right,
                           m.omega, env.true_inertia()});
  };
  record(0, 0.0);
  Rng retarget(derive_seed(seed, 2));
  int next_switch = retarget.uniform_int(60, 120);
  for (int k = 0; k < n_ticks; ++k) {
    if (k >= next_switch) {
      env.retarget_slew(retarget.sign() * retarget.uniform(0.3, 1.2));
      next_switch = k + retarget.uniform_int(60, 120);
    }
    const VectorXd obs = build_observation(env, ckpt.config, &env.obs_rng());
    const StepInfo info =
        env.step(act_deterministic(ckpt.policy, obs, /*slew_only=*/true));
    record(k + 1, info.applied_action[0]);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Dataset directory

struct DatasetIndexEntry {
  std::string file;
  SourceTag tag = SourceTag::periodic;
  std::string split;  // "train" or "val"
};

struct Dataset {
  std::vector<Run> train;
  std::vector<Run> val;
};

inline void write_dataset(const std::filesystem::path& dir,
                          const std::vector<Run>& runs, double val_fraction,
                          uint64_t seed) {
  std::filesystem::create_directories(dir);
  const int n = static_cast<int>(runs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5B117));
  std::shuffle(order.begin(), order.end(), rng.engine());
  const int n_val = std::max(1, static_cast<int>(std::floor(n * val_fraction)));
  std::vector<std::string> split(n, "train");
  for (int i = 0; i < n_val && i < n; ++i) split[order[i]] = "val";

  nlohmann::json manifest;
  manifest["format"] = "mhc-dataset-v1";
  manifest["runs"] = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03d.csv", i);
    write_run_csv(dir / name, runs[i]);
    nlohmann::json entry;
    entry["file"] = name;
    entry["source_tag"] = to_string(runs[i].source_tag);
    entry["split"] = split[i];
    manifest["runs"].push_back(entry);
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest =
      nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  if (manifest.at("format") != "mhc-dataset-v1")
    throw IoError("unexpected dataset format in " + dir.string());
  Dataset ds;
  for (const auto& entry : manifest.at("runs")) {
    const Run run =
        read_run_csv(dir / entry.at("file").get<std::string>(),
                     source_tag_from_string(entry.at("source_tag")));
    if (entry.at("split") == "val")
      ds.val.push_back(run);
    else
      ds.train.push_back(run);
  }
  if (ds.train.empty())
    throw IoError("dataset has no training runs: " + dir.string());
  return ds;
}

// Execute the full campaign: open-loop plan plus closed-loop slice.
inline std::vector<Run> run_collection(const GlobalConfig& cfg, double scale,
                                       uint64_t seed,
                                       const PiGains& closed_loop_gains) {
  std::vector<Run> runs;
  const auto plan = build_collection_plan(cfg, scale, seed);
  for (const auto& e : plan) {
    const auto commands =
        generate_excitation(e.kind, e.params, e.duration_s, e.seed);
    runs.push_back(
        collect(cfg.plant, commands, e.arm, cfg.geometry, e.tag, e.seed));
  }
  Rng rng(derive_seed(seed, 0xC10));
  double remaining = cfg.dataset.closed_loop_minutes * 60.0 * scale;
  int i = 0;
  while (remaining > 1.0) {
    const double dur = std::min(cfg.dataset.run_seconds, remaining);
    if (dur / kTickDt < kMinRunLength) break;
    const ArmScript arm =
        random_arm_script(rng, cfg.geometry, cfg.ranges, false);
    runs.push_back(collect_closed_loop(cfg.plant, closed_loop_gains, arm,
                                       cfg.geometry, dur,
                                       derive_seed(seed, 0xB0000 + i)));
    remaining -= dur;
    ++i;
  }
  return runs;
}

}  // namespace mhc
