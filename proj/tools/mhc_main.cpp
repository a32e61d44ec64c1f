// Command-line entry point orchestrating the full pipeline: plant
// simulation, data collection, actuator-model training and evaluation,
// policy training, model-sim and plant-transfer evaluation, and report
// generation.
#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>

#include "mhc/collection.hpp"
#include "mhc/config.hpp"
#include "mhc/eval.hpp"

namespace fs = std::filesystem;
using namespace mhc;

namespace {

struct CommonOpts {
  std::string config_path = "configs/default.json";
  fs::path out;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> budget;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "global config file")
      ->capture_default_str();
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "override config seed");
  cmd->add_option("--workers", opts.workers, "parallel environments");
  cmd->add_option("--budget", opts.budget, "budget preset: smoke|desk|full");
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

GlobalConfig resolve(const CommonOpts& opts, const std::string& subcommand,
                     fs::path& out_dir) {
  GlobalConfig cfg = load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.workers) cfg.ppo.workers = *opts.workers;
  if (opts.budget) cfg.budget = *opts.budget;
  if (const char* root = std::getenv("MHC_OUT_ROOT")) cfg.out_root = root;
  (void)cfg.preset();
  out_dir = opts.out.empty()
                ? fs::path(cfg.out_root) /
                      (subcommand + "-" + timestamp() + "-s" +
                       std::to_string(cfg.seed))
                : opts.out;
  write_run_stamp(out_dir, cfg);
  return cfg;
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw IoError("missing artifact " + path.string() +
                  "; produce it with `mhc " + producer + "`");
}

// Static mid-range arm for standalone plant simulation.
ArmScript plant_sim_arm(const GlobalConfig& cfg) {
  ArmScript arm;
  arm.base.q[1] = 0.5 * (cfg.geometry.boom_min + cfg.geometry.boom_max);
  arm.base.q[2] = 0.5 * (cfg.geometry.stick_min + cfg.geometry.stick_max);
  return arm;
}

Scenario default_slew_scenario() {
  Scenario s;
  s.name = "default_slew";
  s.slew_only = true;
  for (double deg : {40.0, -30.0, 25.0, -20.0}) {
    ScenarioTarget t;
    t.slew_deg = deg;
    s.targets.push_back(t);
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_plant_sim(const CommonOpts& opts) {
  fs::path out;
  const GlobalConfig cfg = resolve(opts, "plant-sim", out);
  const auto commands =
      generate_excitation(cfg.excitation.kind, cfg.excitation.params,
                          cfg.excitation.duration_s, cfg.seed);
  const ArmScript arm = plant_sim_arm(cfg);
  PlantState state = plant_reset(cfg.plant, 0.0);
  CsvWriter w(out / "trajectory.csv", "t,u,p_l,p_r,omega,angle,inertia_z");
  const double inertia =
      inertia_about_z(arm.base, cfg.geometry, arm.load_kg);
  w.row({0, 0, state.p_left, state.p_right, state.velocity, state.angle,
         inertia});
  for (size_t k = 0; k < commands.size(); ++k) {
    plant_step(state, cfg.plant, commands[k], inertia, cfg.plant.dt);
    w.row({(k + 1) * kInnerDt, commands[k], state.p_left, state.p_right,
           state.velocity, state.angle, inertia});
  }
  std::cout << "plant-sim: wrote " << (out / "trajectory.csv").string()
            << " (" << commands.size() << " steps)\n";
  return 0;
}

int cmd_collect(const CommonOpts& opts, const std::string& policy_dir) {
  fs::path out;
  const GlobalConfig cfg = resolve(opts, "collect", out);
  const BudgetPreset preset = cfg.preset();

  std::vector<Run> runs;
  if (policy_dir.empty()) {
    // Early-controller stand-in for the closed-loop slice: a PI controller
    // grid-tuned on the plant.
    EvalEnvFactory factory;
    factory.build = [&](const Scenario& s) {
      return Environment(
          eval_env_config(cfg.geometry, s, cfg.policy.history,
                          static_cast<int>(s.targets.size() * s.dwell_s /
                                           kTickDt)),
          cfg.plant);
    };
    const PiTuneResult tuned =
        tune_pi_gains(factory, default_slew_scenario(), cfg.seed);
    std::cout << "collect: closed-loop controller = pi(kp=" << tuned.gains.kp
              << ", ki=" << tuned.gains.ki << ")\n";
    runs = run_collection(cfg, preset.dataset_scale, cfg.seed, tuned.gains);
  } else {
    require_artifact(fs::path(policy_dir) / "meta.json", "train-policy");
    const PolicyCheckpoint ckpt = load_policy(policy_dir);
    runs = run_collection(cfg, preset.dataset_scale, cfg.seed, PiGains{});
    // Replace the PI closed-loop slice with policy-in-the-loop runs.
    std::erase_if(runs, [](const Run& r) {
      return r.source_tag == SourceTag::closed_loop;
    });
    Rng rng(derive_seed(cfg.seed, 0xC10));
    double remaining =
        cfg.dataset.closed_loop_minutes * 60.0 * preset.dataset_scale;
    int i = 0;
    while (remaining > 1.0) {
      const double dur = std::min(cfg.dataset.run_seconds, remaining);
      if (dur / kTickDt < kMinRunLength) break;
      runs.push_back(collect_closed_loop_policy(
          cfg, ckpt, dur, derive_seed(cfg.seed, 0xB0000 + i)));
      remaining -= dur;
      ++i;
    }
  }
  write_dataset(out, runs, cfg.dataset.val_fraction, cfg.seed);
  double minutes = 0;
  for (const auto& r : runs)
    minutes += r.samples.size() * kTickDt / 60.0;
  std::cout << "collect: " << runs.size() << " runs, " << minutes
            << " minutes of data -> " << out.string() << "\n";
  return 0;
}

int cmd_train_actuator(const CommonOpts& opts, const std::string& dataset_dir,
                       const std::string& feature_config) {
  fs::path out;
  GlobalConfig cfg = resolve(opts, "train-actuator", out);
  require_artifact(fs::path(dataset_dir) / "manifest.json", "collect");
  const BudgetPreset preset = cfg.preset();
  cfg.actuator.max_epochs = preset.actuator_max_epochs;
  const FeatureConfig fc = feature_config.empty()
                               ? cfg.feature_config
                               : feature_config_from_string(feature_config);

  const Dataset ds = load_dataset(dataset_dir);
  const ActuatorTrainResult result =
      train_actuator(ds.train, ds.val, fc, cfg.actuator, cfg.seed);
  save_slew_model(result.model, out / "model");
  {
    CsvWriter w(out / "velocity_curve.csv", "epoch,train_loss,val_loss");
    for (const auto& row : result.velocity_curve.rows)
      w.row({row[0], row[1], row[2]});
  }
  if (result.model.uses_pressure()) {
    CsvWriter w(out / "pressure_curve.csv", "epoch,train_loss,val_loss");
    for (const auto& row : result.pressure_curve.rows)
      w.row({row[0], row[1], row[2]});
  }
  const ActuatorMae mae = evaluate_mae(result.model, ds.val);
  std::cout << "train-actuator[" << to_string(fc)
            << "]: val 10 s open-loop MAE: velocity "
            << rad2deg(mae.velocity) << " deg/s, position "
            << rad2deg(mae.position) << " deg (" << mae.windows
            << " windows)\n";
  return 0;
}

int cmd_eval_actuator(const CommonOpts& opts,
                      const std::vector<std::string>& model_dirs,
                      const std::string& dataset_dir) {
  fs::path out;
  const GlobalConfig cfg = resolve(opts, "eval-actuator", out);
  require_artifact(fs::path(dataset_dir) / "manifest.json", "collect");
  const Dataset ds = load_dataset(dataset_dir);

  CsvWriter table(out / "mae_table.csv",
                  "Features,VelocityMAE_deg_s,PositionMAE_deg,Windows");
  std::cout << "Features            Velocity MAE [deg/s]  Position MAE [deg]\n";
  for (const auto& dir : model_dirs) {
    require_artifact(fs::path(dir) / "meta.json", "train-actuator");
    const SlewModel model = load_slew_model(dir);
    const ActuatorMae mae = evaluate_mae(model, ds.val);
    table.raw_row(std::string(to_string(model.feature_config)) + "," +
                  fmt_num(rad2deg(mae.velocity)) + "," +
                  fmt_num(rad2deg(mae.position)) + "," +
                  std::to_string(mae.windows));
    std::printf("%-20s %-21.3f %.3f\n", to_string(model.feature_config),
                rad2deg(mae.velocity), rad2deg(mae.position));
  }

  // Open-loop prediction on a fresh trapezoidal test trajectory.
  if (!model_dirs.empty()) {
    const SlewModel model = load_slew_model(model_dirs.front());
    ExcitationParams trap;
    trap.amplitude = 1.0;
    trap.period_s = 40.0;
    trap.ramp_s = 2.0;
    const auto commands = generate_excitation(ExcitationKind::trapezoidal,
                                              trap, 40.0, cfg.seed);
    const ArmScript arm = plant_sim_arm(cfg);
    const Run truth = collect(cfg.plant, commands, arm, cfg.geometry,
                              SourceTag::periodic, derive_seed(cfg.seed, 5));
    std::vector<double> u, iz;
    for (size_t k = 1; k < truth.samples.size(); ++k) {
      u.push_back(truth.samples[k].u);
      iz.push_back(truth.samples[k - 1].inertia_z);
    }
    const RolloutSeries pred = rollout_open_loop(
        model, u, iz, static_cast<int>(u.size()));
    CsvWriter w(out / "open_loop_trapezoid.csv",
                "t,u,omega_true,omega_pred,angle_true,angle_pred");
    double angle_true = 0;
    for (size_t k = 0; k < u.size(); ++k) {
      const auto& s = truth.samples[k + 1];
      angle_true += kTickDt * 0.5 * (truth.samples[k].omega + s.omega);
      w.row({s.t, s.u, s.omega, pred.omega[k], angle_true, pred.angle[k]});
    }
    std::cout << "eval-actuator: wrote "
              << (out / "open_loop_trapezoid.csv").string() << "\n";
  }
  return 0;
}

int cmd_train_policy(const CommonOpts& opts, const std::string& model_dir,
                     const std::string& mode, double w_oscillation_override,
                     int load_blind_override) {
  fs::path out;
  GlobalConfig cfg = resolve(opts, "train-policy", out);
  require_artifact(fs::path(model_dir) / "meta.json", "train-actuator");
  const SlewModel model = load_slew_model(model_dir);

  TrainPolicyConfig tc;
  tc.policy = cfg.policy;
  tc.policy.slew_only = mode == "slew-only";
  tc.reward = cfg.reward;
  if (w_oscillation_override >= 0)
    tc.reward.w_oscillation = w_oscillation_override;
  tc.curriculum = cfg.curriculum;
  tc.ppo = cfg.ppo;
  tc.ppo.total_ticks = cfg.preset().ppo_total_ticks;
  tc.env = cfg.env_config(tc.policy.slew_only);
  if (load_blind_override >= 0) tc.env.load_blind_obs = load_blind_override;

  const TrainPolicyResult result = train_policy(tc, model, cfg.seed);
  save_policy(result.checkpoint, out / "policy");
  write_curve_csv(out / "training_curve.csv", result.curve);
  write_snapshot_csv(out / "snapshots.csv", result.snapshots);
  if (result.diverged) {
    std::cerr << "mhc-error: train-policy: diverged; kept last good "
                 "checkpoint at "
              << (out / "policy").string() << "\n";
    return 1;
  }
  const EvalSnapshot& last = result.snapshots.back();
  std::cout << "train-policy[" << mode << "]: " << result.checkpoint.trained_ticks
            << " ticks; final eval: |slew err| "
            << last.mean_abs_slew_error_deg << " deg, task err "
            << last.mean_task_error_m << " m, tool rate "
            << last.mean_tool_rate_deg_s << " deg/s\n";
  return 0;
}

int cmd_eval_policy(const CommonOpts& opts, const std::string& policy_dir,
                    const std::string& baseline, const std::string& model_dir,
                    const std::string& scenario_path) {
  fs::path out;
  const GlobalConfig cfg = resolve(opts, "eval-policy", out);
  require_artifact(fs::path(model_dir) / "meta.json", "train-actuator");
  const SlewModel model = load_slew_model(model_dir);
  const Scenario scenario = scenario_path.empty()
                                ? default_slew_scenario()
                                : load_scenario(scenario_path);
  const int total_ticks = static_cast<int>(
      scenario.targets.size() * std::lround(scenario.dwell_s / kTickDt));

  std::unique_ptr<Controller> controller;
  int history = cfg.policy.history;
  if (!baseline.empty()) {
    if (baseline != "pi")
      throw ConfigError("unknown baseline: " + baseline);
    EvalEnvFactory factory;
    factory.build = [&](const Scenario& s) {
      return Environment(
          eval_env_config(cfg.geometry, s, history, total_ticks), &model);
    };
    const PiTuneResult tuned = tune_pi_gains(factory, scenario, cfg.seed);
    controller = std::make_unique<PiController>(tuned.gains);
  } else {
    require_artifact(fs::path(policy_dir) / "meta.json", "train-policy");
    PolicyCheckpoint ckpt = load_policy(policy_dir);
    history = ckpt.config.history;
    if (ckpt.config.slew_only != scenario.slew_only)
      throw ConfigError("policy mode does not match the scenario mode");
    controller = std::make_unique<PolicyController>(std::move(ckpt));
  }

  Environment env(eval_env_config(cfg.geometry, scenario, history, total_ticks),
                  &model);
  const EpisodeLog log = run_targets(*controller, env, scenario, cfg.seed);
  const Metrics m = compute_metrics(log, cfg.eval.metrics);
  write_log_csv(out / "log.csv", log);
  write_log_plots(out, "trajectory", log);
  write_metrics_csv(out / "metrics.csv", {{controller->name(), m}});
  std::cout << controller->name() << ": speed " << m.avg_slew_speed_deg_s
            << " deg/s, overshoot " << m.avg_max_overshoot_deg
            << " deg, error " << m.avg_steady_state_error
            << (scenario.slew_only ? " deg" : " m") << ", tool "
            << m.avg_tool_rate_deg_s << " deg/s, terminations "
            << m.terminations << "\n";
  return 0;
}

int cmd_transfer_eval(const CommonOpts& opts, const std::string& policy_dir,
                      const std::string& model_dir,
                      const std::vector<std::string>& scenario_paths,
                      bool with_pi) {
  fs::path out;
  const GlobalConfig cfg = resolve(opts, "transfer-eval", out);
  require_artifact(fs::path(policy_dir) / "meta.json", "train-policy");
  require_artifact(fs::path(model_dir) / "meta.json", "train-actuator");
  const PolicyCheckpoint ckpt = load_policy(policy_dir);
  const SlewModel model = load_slew_model(model_dir);

  std::vector<Scenario> scenarios;
  for (const auto& p : scenario_paths) scenarios.push_back(load_scenario(p));
  if (scenario_paths.empty() && ckpt.config.slew_only)
    scenarios.push_back(default_slew_scenario());

  const auto comparisons = transfer_eval(ckpt, model, cfg.plant, cfg.geometry,
                                         scenarios, cfg.seed, cfg.eval.metrics);
  std::vector<std::pair<std::string, Metrics>> rows;
  CsvWriter detail(out / "comparison.csv",
                   "Scenario,Backend,Policy,Speed,Overshoot,Error,Tool,"
                   "Terminations");
  for (const auto& cmp : comparisons) {
    rows.push_back({cmp.scenario + "/model", cmp.model_sim});
    rows.push_back({cmp.scenario + "/plant", cmp.plant});
    for (const auto& [backend, m] :
         {std::pair{std::string("model"), cmp.model_sim},
          std::pair{std::string("plant"), cmp.plant}}) {
      detail.raw_row(cmp.scenario + "," + backend + "," +
                     (ckpt.config.slew_only ? "rl_slew_only" : "rl_full") +
                     "," + fmt_num(m.avg_slew_speed_deg_s) + "," +
                     fmt_num(m.avg_max_overshoot_deg) + "," +
                     fmt_num(m.avg_steady_state_error) + "," +
                     fmt_num(m.avg_tool_rate_deg_s) + "," +
                     std::to_string(m.terminations));
    }
    write_log_csv(out / (cmp.scenario + "_model_log.csv"), cmp.model_log);
    write_log_csv(out / (cmp.scenario + "_plant_log.csv"), cmp.plant_log);
    write_log_plots(out, cmp.scenario + "_plant", cmp.plant_log);
  }

  if (with_pi && !scenarios.empty()) {
    EvalEnvFactory factory;
    factory.build = [&](const Scenario& s) {
      return Environment(
          eval_env_config(cfg.geometry, s, ckpt.config.history,
                          static_cast<int>(s.targets.size() * s.dwell_s /
                                           kTickDt)),
          cfg.plant);
    };
    const PiTuneResult tuned = tune_pi_gains(factory, scenarios[0], cfg.seed);
    PiController pi(tuned.gains);
    const EpisodeLog log =
        run_targets(pi, factory.build(scenarios[0]), scenarios[0], cfg.seed);
    const Metrics m = compute_metrics(log, cfg.eval.metrics);
    rows.push_back({"pi/plant", m});
    detail.raw_row(scenarios[0].name + ",plant,pi," +
                   fmt_num(m.avg_slew_speed_deg_s) + "," +
                   fmt_num(m.avg_max_overshoot_deg) + "," +
                   fmt_num(m.avg_steady_state_error) + "," +
                   fmt_num(m.avg_tool_rate_deg_s) + "," +
                   std::to_string(m.terminations));
  }
  write_metrics_csv(out / "metrics.csv", rows);
  for (const auto& [name, m] : rows)
    std::cout << name << ": speed " << m.avg_slew_speed_deg_s
              << ", overshoot " << m.avg_max_overshoot_deg << ", error "
              << m.avg_steady_state_error << ", tool "
              << m.avg_tool_rate_deg_s << ", terminations "
              << m.terminations << "\n";
  return 0;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& runs) {
  fs::path out;
  (void)resolve(opts, "report", out);
  std::vector<std::string> merged;
  merged.push_back("Policy,Speed,Overshoot,Error,Tool");
  int plots = 0;
  for (const auto& dir : runs) {
    const fs::path metrics = fs::path(dir) / "metrics.csv";
    if (fs::exists(metrics)) {
      const std::string text = read_text_file(metrics);
      std::stringstream ss(text);
      std::string line;
      std::getline(ss, line);  // drop header
      while (std::getline(ss, line))
        if (!line.empty()) merged.push_back(line);
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv" &&
          entry.path().filename().string().find("log") != std::string::npos) {
        // Re-plot each stored log.
        const CsvTable t = read_csv(entry.path());
        std::vector<double> time, slew, tdx, tdy;
        for (const auto& r : t.rows) {
          time.push_back(r[0]);
          slew.push_back(rad2deg(r[2]));
          tdx.push_back(rad2deg(r[10]));
          tdy.push_back(rad2deg(r[11]));
        }
        const std::string stem = entry.path().stem().string();
        write_svg_plot(out / (stem + "_slew.svg"),
                       "slew error to target [deg]", time, {{"slew", slew}});
        write_svg_plot(out / (stem + "_tool.svg"), "tool rates [deg/s]", time,
                       {{"tool_x", tdx}, {"tool_y", tdy}});
        plots += 2;
      }
    }
  }
  std::string table;
  for (const auto& line : merged) table += line + "\n";
  write_text_file(out / "summary_table.csv", table);
  std::cout << "report: " << merged.size() - 1 << " metric rows, " << plots
            << " plots -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"material handler control pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* plant_sim = app.add_subcommand("plant-sim",
                                       "simulate the synthetic slew plant");
  add_common(plant_sim, opts);

  auto* collect_cmd =
      app.add_subcommand("collect", "record an identification dataset");
  add_common(collect_cmd, opts);
  std::string closed_loop_policy;
  collect_cmd->add_option("--closed-loop-policy", closed_loop_policy,
                          "slew-only policy checkpoint for the closed-loop "
                          "slice (default: tuned PI)");

  auto* train_act = app.add_subcommand("train-actuator",
                                       "train the dual-MLP slew model");
  add_common(train_act, opts);
  std::string dataset_dir;
  std::string feature_config;
  train_act->add_option("--dataset", dataset_dir, "dataset directory")
      ->required();
  train_act->add_option("--feature-config", feature_config,
                        "proposed|no_pressure|no_inertia");

  auto* eval_act = app.add_subcommand("eval-actuator",
                                      "open-loop MAE and test trajectories");
  add_common(eval_act, opts);
  std::vector<std::string> model_dirs;
  std::string eval_dataset_dir;
  eval_act->add_option("--model", model_dirs, "model directories")->required();
  eval_act->add_option("--dataset", eval_dataset_dir, "dataset directory")
      ->required();

  auto* train_pol = app.add_subcommand("train-policy",
                                       "PPO training against the model");
  add_common(train_pol, opts);
  std::string actuator_model_dir;
  std::string mode = "full";
  double w_osc_override = -1;
  int load_blind_override = -1;
  train_pol->add_option("--actuator-model", actuator_model_dir,
                        "trained slew model directory")
      ->required();
  train_pol->add_option("--mode", mode, "full|slew-only")
      ->check(CLI::IsMember({"full", "slew-only"}))
      ->capture_default_str();
  train_pol->add_option("--w-oscillation", w_osc_override,
                        "override the oscillation reward weight");
  train_pol->add_option("--load-blind", load_blind_override,
                        "override load-blind observations (0 or 1)");

  auto* eval_pol = app.add_subcommand("eval-policy",
                                      "evaluate on the model-based sim");
  add_common(eval_pol, opts);
  std::string policy_dir, baseline, scenario_path, eval_model_dir;
  eval_pol->add_option("--policy", policy_dir, "policy checkpoint directory");
  eval_pol->add_option("--baseline", baseline, "pi");
  eval_pol->add_option("--actuator-model", eval_model_dir,
                       "trained slew model directory")
      ->required();
  eval_pol->add_option("--scenario", scenario_path, "scenario json file");

  auto* transfer = app.add_subcommand("transfer-eval",
                                      "evaluate on the synthetic plant");
  add_common(transfer, opts);
  std::string tr_policy_dir, tr_model_dir;
  std::vector<std::string> tr_scenarios;
  bool with_pi = false;
  transfer->add_option("--policy", tr_policy_dir, "policy checkpoint")
      ->required();
  transfer->add_option("--actuator-model", tr_model_dir, "slew model")
      ->required();
  transfer->add_option("--scenario", tr_scenarios, "scenario json files");
  transfer->add_flag("--with-pi-baseline", with_pi,
                     "add a grid-tuned PI row on the plant");

  auto* report = app.add_subcommand("report", "collect metrics and plots");
  add_common(report, opts);
  std::vector<std::string> report_runs;
  report->add_option("--run", report_runs, "run directories to merge")
      ->required();

  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (plant_sim->parsed()) return cmd_plant_sim(opts);
    if (collect_cmd->parsed()) return cmd_collect(opts, closed_loop_policy);
    if (train_act->parsed())
      return cmd_train_actuator(opts, dataset_dir, feature_config);
    if (eval_act->parsed())
      return cmd_eval_actuator(opts, model_dirs, eval_dataset_dir);
    if (train_pol->parsed())
      return cmd_train_policy(opts, actuator_model_dir, mode, w_osc_override,
                              load_blind_override);
    if (eval_pol->parsed())
      return cmd_eval_policy(opts, policy_dir, baseline, eval_model_dir,
                             scenario_path);
    if (transfer->parsed())
      return cmd_transfer_eval(opts, tr_policy_dir, tr_model_dir, tr_scenarios,
                               with_pi);
    if (report->parsed()) return cmd_report(opts, report_runs);
  } catch (const IoError& e) {
    std::cerr << "mhc-error: " << sub << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mhc-error: " << sub << ": " << e.what() << "\n";
    return 1;
  }
  return 1;
}
