// Global run configuration: one JSON file covering every stage of the
// pipeline. Parsing is strict, unknown keys are rejected, and each run
// writes the fully resolved config next to its outputs.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>

#include "mhc/actuator_model.hpp"
#include "mhc/common.hpp"
#include "mhc/dataset.hpp"
#include "mhc/eval.hpp"
#include "mhc/geometry.hpp"
#include "mhc/mixed_sim.hpp"
#include "mhc/rl.hpp"
#include "mhc/slew_plant.hpp"

namespace mhc {

namespace detail {

// Tracks which keys a section consumed; leftovers are config errors.
class Section {
 public:
  Section(nlohmann::json j, std::string path)
      : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError("config: " + path_ + " must be an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: bad value type for " + path_ + "." + key);
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  nlohmann::json sub(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? j_.at(key) : nlohmann::json::object();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError("config: unknown key " + path_ + "." + it.key());
  }

 private:
  nlohmann::json j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

struct DatasetSpec {
  double periodic_minutes = 40.0;    // regular references, static arm
  double random_arm_minutes = 16.0;  // random references, moving arm
  double driving_minutes = 7.0;      // pseudo driving cycles
  double closed_loop_minutes = 16.0; // early controller in the loop
  double run_seconds = 120.0;
  double val_fraction = 0.1;         // held out at run granularity

  double total_minutes() const {
    return periodic_minutes + random_arm_minutes + driving_minutes +
           closed_loop_minutes;
  }
};

struct ExcitationSpec {
  ExcitationKind kind = ExcitationKind::trapezoidal;
  ExcitationParams params;
  double duration_s = 40.0;
};

struct BudgetPreset {
  double dataset_scale = 1.0;
  int actuator_max_epochs = 30;
  long ppo_total_ticks = 400000;
  int seeds = 3;  // median-of-N protocol
};

struct EvalSpec {
  MetricParams metrics;
};

struct GlobalConfig {
  uint64_t seed = 0;
  std::string out_root = "runs";
  std::string budget = "desk";
  MachineGeometry geometry;
  PlantParams plant;
  ExcitationSpec excitation;
  DatasetSpec dataset;
  ActuatorTrainConfig actuator;
  FeatureConfig feature_config = FeatureConfig::proposed;
  RandomizationRanges ranges;
  TerminationParams termination;
  bool zoh_slew_interp = false;
  bool centrifugal_projected = false;
  bool load_blind_obs = true;  // robust observation set by default
  PolicyConfig policy;
  RewardConfig reward;
  CurriculumSchedule curriculum;
  PpoConfig ppo;
  EvalSpec eval;
  std::map<std::string, BudgetPreset> budgets = {
      {"smoke", {0.04, 3, 20000, 1}},
      {"desk", {1.0, 12, 400000, 3}},
      {"full", {1.0, 40, 2000000, 3}}};

  BudgetPreset preset() const {
    const auto it = budgets.find(budget);
    if (it == budgets.end())
      throw ConfigError("config: unknown budget preset " + budget);
    return it->second;
  }

  Environment::Config env_config(bool slew_only) const {
    Environment::Config cfg;
    cfg.geometry = geometry;
    cfg.ranges = ranges;
    cfg.termination = termination;
    cfg.slew_only = slew_only;
    cfg.load_blind_obs = load_blind_obs;
    cfg.zoh_slew_interp = zoh_slew_interp;
    cfg.history = policy.history;
    return cfg;
  }
};

inline GlobalConfig parse_config(const nlohmann::json& root) {
  GlobalConfig c;
  detail::Section top(root, "");
  c.seed = top.get<uint64_t>("seed", c.seed);
  c.out_root = top.get<std::string>("out_root", c.out_root);
  c.budget = top.get<std::string>("budget", c.budget);

  {
    detail::Section s(top.sub("geometry"), "geometry");
    auto& g = c.geometry;
    g.boom_length = s.get("boom_length", g.boom_length);
    g.stick_length = s.get("stick_length", g.stick_length);
    g.pivot_forward = s.get("pivot_forward", g.pivot_forward);
    g.pivot_up = s.get("pivot_up", g.pivot_up);
    g.boom_mass = s.get("boom_mass", g.boom_mass);
    g.stick_mass = s.get("stick_mass", g.stick_mass);
    g.tool_mass = s.get("tool_mass", g.tool_mass);
    g.tool_length_x = s.get("tool_length_x", g.tool_length_x);
    g.tool_length_y = s.get("tool_length_y", g.tool_length_y);
    g.boom_min = s.get("boom_min", g.boom_min);
    g.boom_max = s.get("boom_max", g.boom_max);
    g.stick_min = s.get("stick_min", g.stick_min);
    g.stick_max = s.get("stick_max", g.stick_max);
    s.finish();
    if (!g.valid()) throw ConfigError("config: invalid geometry");
  }
  {
    detail::Section s(top.sub("plant"), "plant");
    auto& p = c.plant;
    p.dead_zone = s.get("dead_zone", p.dead_zone);
    p.command_delay = s.get("command_delay", p.command_delay);
    p.pump_gain = s.get("pump_gain", p.pump_gain);
    p.chamber_time_constant =
        s.get("chamber_time_constant", p.chamber_time_constant);
    p.torque_per_pressure = s.get("torque_per_pressure", p.torque_per_pressure);
    p.viscous_friction = s.get("viscous_friction", p.viscous_friction);
    p.coulomb_friction = s.get("coulomb_friction", p.coulomb_friction);
    p.brake_threshold_command =
        s.get("brake_threshold_command", p.brake_threshold_command);
    p.brake_torque = s.get("brake_torque", p.brake_torque);
    p.velocity_limit = s.get("velocity_limit", p.velocity_limit);
    p.noise_std_pressure = s.get("noise_std_pressure", p.noise_std_pressure);
    p.noise_std_omega = s.get("noise_std_omega", p.noise_std_omega);
    s.finish();
    p.validate();
  }
  {
    detail::Section s(top.sub("excitation"), "excitation");
    auto& e = c.excitation;
    if (s.has("kind"))
      e.kind = excitation_kind_from_string(s.get<std::string>("kind", ""));
    e.params.amplitude = s.get("amplitude", e.params.amplitude);
    e.params.period_s = s.get("period_s", e.params.period_s);
    e.params.ramp_s = s.get("ramp_s", e.params.ramp_s);
    e.params.hold_min_s = s.get("hold_min_s", e.params.hold_min_s);
    e.params.hold_max_s = s.get("hold_max_s", e.params.hold_max_s);
    e.duration_s = s.get("duration_s", e.duration_s);
    s.finish();
  }
  {
    detail::Section s(top.sub("dataset"), "dataset");
    auto& d = c.dataset;
    d.periodic_minutes = s.get("periodic_minutes", d.periodic_minutes);
    d.random_arm_minutes = s.get("random_arm_minutes", d.random_arm_minutes);
    d.driving_minutes = s.get("driving_minutes", d.driving_minutes);
    d.closed_loop_minutes =
        s.get("closed_loop_minutes", d.closed_loop_minutes);
    d.run_seconds = s.get("run_seconds", d.run_seconds);
    d.val_fraction = s.get("val_fraction", d.val_fraction);
    s.finish();
    if (d.val_fraction <= 0 || d.val_fraction >= 1)
      throw ConfigError("config: dataset.val_fraction must be in (0,1)");
  }
  {
    detail::Section s(top.sub("actuator"), "actuator");
    auto& a = c.actuator;
    a.lr = s.get("lr", a.lr);
    a.batch_size = s.get("batch_size", a.batch_size);
    a.max_epochs = s.get("max_epochs", a.max_epochs);
    a.patience = s.get("patience", a.patience);
    if (s.has("feature_config"))
      c.feature_config =
          feature_config_from_string(s.get<std::string>("feature_config", ""));
    s.finish();
  }
  {
    detail::Section s(top.sub("env"), "env");
    auto& r = c.ranges;
    r.slew_abs_min = s.get("slew_abs_min", r.slew_abs_min);
    r.slew_abs_max = s.get("slew_abs_max", r.slew_abs_max);
    r.load_min = s.get("load_min", r.load_min);
    r.load_max = s.get("load_max", r.load_max);
    r.arm_gain_min = s.get("arm_gain_min", r.arm_gain_min);
    r.arm_gain_max = s.get("arm_gain_max", r.arm_gain_max);
    r.arm_delay_min = s.get("arm_delay_min", r.arm_delay_min);
    r.arm_delay_max = s.get("arm_delay_max", r.arm_delay_max);
    r.tool_damping_min = s.get("tool_damping_min", r.tool_damping_min);
    r.tool_damping_max = s.get("tool_damping_max", r.tool_damping_max);
    r.tool_length_min = s.get("tool_length_min", r.tool_length_min);
    r.tool_length_max = s.get("tool_length_max", r.tool_length_max);
    r.init_margin = s.get("init_margin", r.init_margin);
    r.safety_margin = s.get("safety_margin", r.safety_margin);
    r.obs_noise = s.get("obs_noise", r.obs_noise);
    c.termination.z_min = s.get("z_min", c.termination.z_min);
    c.termination.r_min = s.get("r_min", c.termination.r_min);
    c.zoh_slew_interp = s.get("zoh_slew_interp", c.zoh_slew_interp);
    c.centrifugal_projected =
        s.get("centrifugal_projected", c.centrifugal_projected);
    c.load_blind_obs = s.get("load_blind_obs", c.load_blind_obs);
    s.finish();
    r.validate();
  }
  {
    detail::Section s(top.sub("policy"), "policy");
    auto& p = c.policy;
    p.history = s.get("history", p.history);
    p.hidden = s.get("hidden", p.hidden);
    p.init_log_std = s.get("init_log_std", p.init_log_std);
    s.finish();
    if (p.history < 1) throw ConfigError("config: policy.history must be >= 1");
  }
  {
    detail::Section s(top.sub("reward"), "reward");
    auto& r = c.reward;
    r.w_balance = s.get("w_balance", r.w_balance);
    r.w_target = s.get("w_target", r.w_target);
    r.w_action = s.get("w_action", r.w_action);
    r.w_overshoot = s.get("w_overshoot", r.w_overshoot);
    r.w_oscillation = s.get("w_oscillation", r.w_oscillation);
    r.w_decouple = s.get("w_decouple", r.w_decouple);
    r.w_one_shot = s.get("w_one_shot", r.w_one_shot);
    r.termination_penalty = s.get("termination_penalty", r.termination_penalty);
    if (s.has("sigma_u")) {
      const auto v = s.get<std::vector<double>>("sigma_u", {});
      if (v.size() != 3) throw ConfigError("config: reward.sigma_u needs 3 values");
      r.sigma_u = {v[0], v[1], v[2]};
    }
    s.finish();
    for (double w : {r.w_balance, r.w_target, r.w_action, r.w_overshoot,
                     r.w_oscillation, r.w_decouple, r.w_one_shot})
      if (w < 0) throw ConfigError("config: reward weights must be >= 0");
  }
  {
    detail::Section s(top.sub("curriculum"), "curriculum");
    auto& k = c.curriculum;
    k.core_start = s.get("core_start", k.core_start);
    k.core_ramp_end = s.get("core_ramp_end", k.core_ramp_end);
    k.sharpness_start = s.get("sharpness_start", k.sharpness_start);
    k.sharpness_ramp_end = s.get("sharpness_ramp_end", k.sharpness_ramp_end);
    k.one_shot_warmup = s.get("one_shot_warmup", k.one_shot_warmup);
    k.one_shot_ramp_end = s.get("one_shot_ramp_end", k.one_shot_ramp_end);
    s.finish();
  }
  {
    detail::Section s(top.sub("ppo"), "ppo");
    auto& p = c.ppo;
    p.gamma = s.get("gamma", p.gamma);
    p.gae_lambda = s.get("gae_lambda", p.gae_lambda);
    p.clip_ratio = s.get("clip_ratio", p.clip_ratio);
    p.epochs = s.get("epochs", p.epochs);
    p.minibatch = s.get("minibatch", p.minibatch);
    p.rollout_steps = s.get("rollout_steps", p.rollout_steps);
    p.workers = s.get("workers", p.workers);
    p.total_ticks = s.get("total_ticks", p.total_ticks);
    p.lr_policy = s.get("lr_policy", p.lr_policy);
    p.lr_value = s.get("lr_value", p.lr_value);
    p.entropy_coef = s.get("entropy_coef", p.entropy_coef);
    p.value_coef = s.get("value_coef", p.value_coef);
    p.max_grad_norm = s.get("max_grad_norm", p.max_grad_norm);
    s.finish();
    p.validate();
  }
  {
    detail::Section s(top.sub("eval"), "eval");
    auto& m = c.eval.metrics;
    m.steady_rate_threshold =
        s.get("steady_rate_threshold", m.steady_rate_threshold);
    m.steady_hold_s = s.get("steady_hold_s", m.steady_hold_s);
    m.error_window_s = s.get("error_window_s", m.error_window_s);
    s.finish();
  }
  if (top.has("budgets")) {
    const nlohmann::json bj = top.sub("budgets");
    for (auto it = bj.begin(); it != bj.end(); ++it) {
      detail::Section s(it.value(), "budgets." + it.key());
      BudgetPreset p = c.budgets.count(it.key()) ? c.budgets[it.key()]
                                                 : BudgetPreset{};
      p.dataset_scale = s.get("dataset_scale", p.dataset_scale);
      p.actuator_max_epochs = s.get("actuator_max_epochs", p.actuator_max_epochs);
      p.ppo_total_ticks = s.get<long>("ppo_total_ticks", p.ppo_total_ticks);
      p.seeds = s.get("seeds", p.seeds);
      s.finish();
      c.budgets[it.key()] = p;
    }
  }
  top.finish();
  (void)c.preset();  // budget name must resolve
  return c;
}

inline GlobalConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

// Serialize the fully resolved configuration (for the run directory).
inline nlohmann::json resolved_config_json(const GlobalConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out_root"] = c.out_root;
  j["budget"] = c.budget;
  auto& g = j["geometry"];
  g["boom_length"] = c.geometry.boom_length;
  g["stick_length"] = c.geometry.stick_length;
  g["pivot_forward"] = c.geometry.pivot_forward;
  g["pivot_up"] = c.geometry.pivot_up;
  g["boom_mass"] = c.geometry.boom_mass;
  g["stick_mass"] = c.geometry.stick_mass;
  g["tool_mass"] = c.geometry.tool_mass;
  g["tool_length_x"] = c.geometry.tool_length_x;
  g["tool_length_y"] = c.geometry.tool_length_y;
  g["boom_min"] = c.geometry.boom_min;
  g["boom_max"] = c.geometry.boom_max;
  g["stick_min"] = c.geometry.stick_min;
  g["stick_max"] = c.geometry.stick_max;
  auto& p = j["plant"];
  p["dead_zone"] = c.plant.dead_zone;
  p["command_delay"] = c.plant.command_delay;
  p["pump_gain"] = c.plant.pump_gain;
  p["chamber_time_constant"] = c.plant.chamber_time_constant;
  p["torque_per_pressure"] = c.plant.torque_per_pressure;
  p["viscous_friction"] = c.plant.viscous_friction;
  p["coulomb_friction"] = c.plant.coulomb_friction;
  p["brake_threshold_command"] = c.plant.brake_threshold_command;
  p["brake_torque"] = c.plant.brake_torque;
  p["velocity_limit"] = c.plant.velocity_limit;
  p["noise_std_pressure"] = c.plant.noise_std_pressure;
  p["noise_std_omega"] = c.plant.noise_std_omega;
  auto& e = j["excitation"];
  e["kind"] = c.excitation.kind == ExcitationKind::step        ? "step"
              : c.excitation.kind == ExcitationKind::sinusoidal ? "sinusoidal"
              : c.excitation.kind == ExcitationKind::trapezoidal
                  ? "trapezoidal"
                  : "random";
  e["amplitude"] = c.excitation.params.amplitude;
  e["period_s"] = c.excitation.params.period_s;
  e["ramp_s"] = c.excitation.params.ramp_s;
  e["hold_min_s"] = c.excitation.params.hold_min_s;
  e["hold_max_s"] = c.excitation.params.hold_max_s;
  e["duration_s"] = c.excitation.duration_s;
  auto& d = j["dataset"];
  d["periodic_minutes"] = c.dataset.periodic_minutes;
  d["random_arm_minutes"] = c.dataset.random_arm_minutes;
  d["driving_minutes"] = c.dataset.driving_minutes;
  d["closed_loop_minutes"] = c.dataset.closed_loop_minutes;
  d["run_seconds"] = c.dataset.run_seconds;
  d["val_fraction"] = c.dataset.val_fraction;
  auto& a = j["actuator"];
  a["lr"] = c.actuator.lr;
  a["batch_size"] = c.actuator.batch_size;
  a["max_epochs"] = c.actuator.max_epochs;
  a["patience"] = c.actuator.patience;
  a["feature_config"] = to_string(c.feature_config);
  auto& env = j["env"];
  env["slew_abs_min"] = c.ranges.slew_abs_min;
  env["slew_abs_max"] = c.ranges.slew_abs_max;
  env["load_min"] = c.ranges.load_min;
  env["load_max"] = c.ranges.load_max;
  env["arm_gain_min"] = c.ranges.arm_gain_min;
  env["arm_gain_max"] = c.ranges.arm_gain_max;
  env["arm_delay_min"] = c.ranges.arm_delay_min;
  env["arm_delay_max"] = c.ranges.arm_delay_max;
  env["tool_damping_min"] = c.ranges.tool_damping_min;
  env["tool_damping_max"] = c.ranges.tool_damping_max;
  env["tool_length_min"] = c.ranges.tool_length_min;
  env["tool_length_max"] = c.ranges.tool_length_max;
  env["init_margin"] = c.ranges.init_margin;
  env["safety_margin"] = c.ranges.safety_margin;
  env["obs_noise"] = c.ranges.obs_noise;
  env["z_min"] = c.termination.z_min;
  env["r_min"] = c.termination.r_min;
  env["zoh_slew_interp"] = c.zoh_slew_interp;
  env["centrifugal_projected"] = c.centrifugal_projected;
  env["load_blind_obs"] = c.load_blind_obs;
  auto& pol = j["policy"];
  pol["history"] = c.policy.history;
  pol["hidden"] = c.policy.hidden;
  pol["init_log_std"] = c.policy.init_log_std;
  auto& r = j["reward"];
  r["w_balance"] = c.reward.w_balance;
  r["w_target"] = c.reward.w_target;
  r["w_action"] = c.reward.w_action;
  r["w_overshoot"] = c.reward.w_overshoot;
  r["w_oscillation"] = c.reward.w_oscillation;
  r["w_decouple"] = c.reward.w_decouple;
  r["w_one_shot"] = c.reward.w_one_shot;
  r["termination_penalty"] = c.reward.termination_penalty;
  r["sigma_u"] = c.reward.sigma_u;
  auto& k = j["curriculum"];
  k["core_start"] = c.curriculum.core_start;
  k["core_ramp_end"] = c.curriculum.core_ramp_end;
  k["sharpness_start"] = c.curriculum.sharpness_start;
  k["sharpness_ramp_end"] = c.curriculum.sharpness_ramp_end;
  k["one_shot_warmup"] = c.curriculum.one_shot_warmup;
  k["one_shot_ramp_end"] = c.curriculum.one_shot_ramp_end;
  auto& ppo = j["ppo"];
  ppo["gamma"] = c.ppo.gamma;
  ppo["gae_lambda"] = c.ppo.gae_lambda;
  ppo["clip_ratio"] = c.ppo.clip_ratio;
  ppo["epochs"] = c.ppo.epochs;
  ppo["minibatch"] = c.ppo.minibatch;
  ppo["rollout_steps"] = c.ppo.rollout_steps;
  ppo["workers"] = c.ppo.workers;
  ppo["total_ticks"] = c.ppo.total_ticks;
  ppo["lr_policy"] = c.ppo.lr_policy;
  ppo["lr_value"] = c.ppo.lr_value;
  ppo["entropy_coef"] = c.ppo.entropy_coef;
  ppo["value_coef"] = c.ppo.value_coef;
  ppo["max_grad_norm"] = c.ppo.max_grad_norm;
  auto& ev = j["eval"];
  ev["steady_rate_threshold"] = c.eval.metrics.steady_rate_threshold;
  ev["steady_hold_s"] = c.eval.metrics.steady_hold_s;
  ev["error_window_s"] = c.eval.metrics.error_window_s;
  auto& b = j["budgets"];
  for (const auto& [name, preset] : c.budgets) {
    b[name]["dataset_scale"] = preset.dataset_scale;
    b[name]["actuator_max_epochs"] = preset.actuator_max_epochs;
    b[name]["ppo_total_ticks"] = preset.ppo_total_ticks;
    b[name]["seeds"] = preset.seeds;
  }
  return j;
}

// Stamp a run directory with the resolved config and the tool version.
inline void write_run_stamp(const std::filesystem::path& dir,
                            const GlobalConfig& cfg) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "resolved_config.json",
                  resolved_config_json(cfg).dump(2) + "\n");
  write_text_file(dir / "VERSION", std::string(kToolVersion) + "\n");
}

}  // namespace mhc
