// Evaluation harness: multi-target steady-state tracking runs with 15 s
// dwell segments, the four benchmark metrics (speed, overshoot, steady-state
// error, tool rate), a grid-tuned PI slew baseline, and transfer runs
// against the synthetic plant.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <memory>

#include "mhc/common.hpp"
#include "mhc/mixed_sim.hpp"
#include "mhc/rl.hpp"

namespace mhc {

// ---------------------------------------------------------------------------
// Scenarios

struct ScenarioTarget {
  double x = 0, y = 0, z = 0;  // m, base frame (full mode)
  double slew_deg = 0;         // slew-only target angle
};

struct Scenario {
  std::string name = "scenario";
  bool slew_only = false;
  std::vector<ScenarioTarget> targets;
  double dwell_s = 15.0;
  double load_kg = 0.0;
  bool load_blind = false;        // withhold the load from observations
  double start_slew_deg = 0.0;    // machine heading before the first target
  std::array<double, 2> arm_init = {0.85, -1.4};
  // Optional pinned simulation parameters (e.g. outside training ranges).
  std::optional<EpisodeDraw> draw;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.slew_only = j.value("slew_only", false);
  s.dwell_s = j.value("dwell_s", 15.0);
  s.load_kg = j.value("load_kg", 0.0);
  s.load_blind = j.value("load_blind", false);
  s.start_slew_deg = j.value("start_slew_deg", 0.0);
  if (j.contains("arm_init")) {
    s.arm_init[0] = j.at("arm_init").at(0).get<double>();
    s.arm_init[1] = j.at("arm_init").at(1).get<double>();
  }
  if (!j.contains("targets") || j.at("targets").empty())
    throw ConfigError("scenario: needs at least one target");
  for (const auto& t : j.at("targets")) {
    ScenarioTarget st;
    st.x = t.value("x", 0.0);
    st.y = t.value("y", 0.0);
    st.z = t.value("z", 0.0);
    st.slew_deg = t.value("slew_deg", 0.0);
    s.targets.push_back(st);
  }
  if (j.contains("draw")) {
    EpisodeDraw d;
    const auto& dj = j.at("draw");
    d.arm.gain = dj.value("arm_gain", 0.1);
    d.arm.delay_steps = dj.value("arm_delay_steps", 10);
    d.tool.length_x = dj.value("tool_length_x", 2.0);
    d.tool.length_y = dj.value("tool_length_y", 2.0);
    d.tool.damping_x = dj.value("tool_damping_x", 0.3);
    d.tool.damping_y = dj.value("tool_damping_y", 0.3);
    d.load_kg = s.load_kg;
    s.draw = d;
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(nlohmann::json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Episode logs

struct LogRow {
  double t = 0;  // s
  int segment = 0;
  std::array<double, 5> q{};     // canonical slew for the current segment
  std::array<double, 5> qdot{};
  CartesianPose grab;            // canonical frame
  std::array<double, 3> action{};
  double target_slew_abs = 0;    // rad, absolute heading of the target
};

struct SegmentLog {
  int index = 0;
  double start_t = 0;
  double initial_slew = 0;       // canonical, rad
  CartesianPose target;          // canonical (r, 0, z)
  int terminations = 0;
};

struct EpisodeLog {
  bool slew_only = false;
  double dwell_s = 15.0;
  std::vector<LogRow> rows;         // 50 Hz
  std::vector<SegmentLog> segments; // 10 Hz bookkeeping
  int terminations = 0;
};

// ---------------------------------------------------------------------------
// Controllers

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::array<double, 3> act(const Environment& env) = 0;
  virtual void on_segment_start(const Environment& env) { (void)env; }
  virtual std::string name() const = 0;
};

class PolicyController : public Controller {
 public:
  explicit PolicyController(PolicyCheckpoint ckpt) : ckpt_(std::move(ckpt)) {}

  std::array<double, 3> act(const Environment& env) override {
    Environment& mutable_env = const_cast<Environment&>(env);
    const VectorXd obs =
        build_observation(env, ckpt_.config, &mutable_env.obs_rng());
    return act_deterministic(ckpt_.policy, obs, ckpt_.config.slew_only);
  }
  std::string name() const override {
    return ckpt_.config.slew_only ? "rl_slew_only" : "rl_full";
  }
  const PolicyCheckpoint& checkpoint() const { return ckpt_; }

 private:
  PolicyCheckpoint ckpt_;
};

struct PiGains {
  double kp = 2.0;
  double ki = 0.3;
};

// PI on the canonical slew error with an anti-windup clamp; arm refs zero.
class PiController : public Controller {
 public:
  explicit PiController(PiGains gains) : gains_(gains) {
    if (gains.kp <= 0 || gains.ki < 0)
      throw ConfigError("pi controller: gains must be positive");
  }

  std::array<double, 3> act(const Environment& env) override {
    const double error = -env.joints().q[0];  // target sits at zero
    integral_ += error * kTickDt;
    if (gains_.ki > 0) {
      const double bound = 1.0 / gains_.ki;
      integral_ = std::clamp(integral_, -bound, bound);
    }
    const double u =
        std::clamp(gains_.kp * error + gains_.ki * integral_, -1.0, 1.0);
    return {u, 0.0, 0.0};
  }

  void on_segment_start(const Environment&) override { integral_ = 0; }
  std::string name() const override { return "pi"; }

 private:
  PiGains gains_;
  double integral_ = 0;
};

// ---------------------------------------------------------------------------
// Multi-target runs

struct EvalEnvFactory {
  // Builds a fresh environment for a scenario run; model or plant backed.
  std::function<Environment(const Scenario&)> build;
};

inline Environment::Config eval_env_config(const MachineGeometry& geom,
                                           const Scenario& s, int history,
                                           int total_ticks) {
  Environment::Config cfg;
  cfg.geometry = geom;
  cfg.slew_only = s.slew_only;
  cfg.load_blind_obs = s.load_blind;
  cfg.history = history;
  cfg.max_ticks = total_ticks + 10;
  return cfg;
}

inline double target_heading(const ScenarioTarget& t, bool slew_only) {
  return slew_only ? deg2rad(t.slew_deg) : std::atan2(t.y, t.x);
}

inline CartesianPose planar_target(const ScenarioTarget& t, bool slew_only,
                                   const CartesianPose& grab_now) {
  if (slew_only) return {grab_now.x, 0.0, grab_now.z};  // arm stays put
  return {std::hypot(t.x, t.y), 0.0, t.z};
}

// Run the controller continuously over the scenario's target sequence with
// transitions every dwell_s; tool state carries across switches. Safety
// terminations are logged and the run continues from a safe reset.
inline EpisodeLog run_targets(Controller& controller, Environment env,
                              const Scenario& scenario, uint64_t seed) {
  if (scenario.targets.size() < 1)
    throw ConfigError("run_targets: scenario has no targets");
  const int dwell_ticks =
      static_cast<int>(std::lround(scenario.dwell_s / kTickDt));

  EpisodeLog log;
  log.slew_only = scenario.slew_only;
  log.dwell_s = scenario.dwell_s;

  EpisodeDraw draw;
  if (scenario.draw) {
    draw = *scenario.draw;
  } else {
    draw.arm = ArmModelParams{0.1, 10};
    draw.tool = ToolParams{};
  }
  draw.load_kg = scenario.load_kg;

  double heading = deg2rad(scenario.start_slew_deg);
  double target_head = target_heading(scenario.targets[0], scenario.slew_only);

  env.set_trace_enabled(true);
  env.reset_with(seed, draw, CartesianPose{10.0, 0.0, 5.0},
                 heading - target_head, scenario.arm_init);
  env.set_target(planar_target(scenario.targets[0], scenario.slew_only,
                               forward_kinematics(env.joints(),
                                                  env.config().geometry)));

  size_t trace_cursor = 0;
  auto drain_trace = [&](int segment, const std::array<double, 3>& action) {
    const auto& trace = env.inner_trace();
    for (; trace_cursor < trace.size(); ++trace_cursor) {
      const InnerSample& s = trace[trace_cursor];
      LogRow row;
      row.t = log.rows.empty() ? kInnerDt : log.rows.back().t + kInnerDt;
      (void)s.t;  // env-local time restarts on safe resets
      row.segment = segment;
      row.q = s.q;
      row.qdot = s.qdot;
      row.grab = s.grab;
      row.action = action;
      row.target_slew_abs = target_head;
      log.rows.push_back(row);
    }
  };

  for (size_t seg = 0; seg < scenario.targets.size(); ++seg) {
    if (seg > 0) {
      const double new_head =
          target_heading(scenario.targets[seg], scenario.slew_only);
      env.retarget_slew(target_head - new_head);
      target_head = new_head;
      env.set_target(planar_target(scenario.targets[seg], scenario.slew_only,
                                   forward_kinematics(env.joints(),
                                                      env.config().geometry)));
    }
    controller.on_segment_start(env);

    SegmentLog seg_log;
    seg_log.index = static_cast<int>(seg);
    seg_log.start_t = log.rows.empty() ? 0.0 : log.rows.back().t;
    seg_log.initial_slew = env.joints().q[0];
    seg_log.target = env.target();

    for (int tick = 0; tick < dwell_ticks; ++tick) {
      const std::array<double, 3> action = controller.act(env);
      const StepInfo info = env.step(action);
      drain_trace(static_cast<int>(seg), info.applied_action);
      if (info.status == Termination::too_low ||
          info.status == Termination::too_close) {
        ++log.terminations;
        ++seg_log.terminations;
        // Safe reset: same draw and target, fresh arm pose, rotation offset
        // preserved so the segment's task is unchanged.
        const CartesianPose target = env.target();
        const double slew_now = env.joints().q[0];
        env.reset_with(derive_seed(seed, 0xDEAD + log.terminations), draw,
                       target, slew_now == 0.0 ? 0.3 : slew_now,
                       scenario.arm_init);
        env.set_trace_enabled(true);
        trace_cursor = 0;
        controller.on_segment_start(env);
      }
    }
    log.segments.push_back(seg_log);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double avg_slew_speed_deg_s = 0;
  double avg_max_overshoot_deg = 0;
  double avg_steady_state_error = 0;  // m (task space) or deg (slew-only)
  double avg_tool_rate_deg_s = 0;
  int segments = 0;
  int unsettled_segments = 0;  // speed fell back to the full dwell
  int terminations = 0;
};

struct MetricParams {
  double steady_rate_threshold = 0.02;  // rad/s, reused one-shot threshold
  double steady_hold_s = 1.0;
  double error_window_s = 2.0;          // final window for steady-state error
};

namespace detail {

// First row index of a sustained-still window after motion starts; -1 when
// the segment never settles (or never moves).
inline int settle_row(const std::vector<const LogRow*>& rows,
                      const MetricParams& p) {
  const int n = static_cast<int>(rows.size());
  const int hold_rows =
      static_cast<int>(std::lround(p.steady_hold_s / kInnerDt));
  int first_move = -1;
  for (int i = 0; i < n; ++i)
    if (std::abs(rows[i]->qdot[0]) >= p.steady_rate_threshold) {
      first_move = i;
      break;
    }
  if (first_move < 0) return -1;
  for (int i = first_move; i + hold_rows <= n; ++i) {
    bool still = true;
    for (int j = i; j < i + hold_rows; ++j)
      if (std::abs(rows[j]->qdot[0]) >= p.steady_rate_threshold) {
        still = false;
        break;
      }
    if (still) return i;
  }
  return -1;
}

inline std::vector<const LogRow*> segment_rows(const EpisodeLog& log,
                                               int segment) {
  std::vector<const LogRow*> rows;
  for (const auto& r : log.rows)
    if (r.segment == segment) rows.push_back(&r);
  return rows;
}

}  // namespace detail

inline Metrics compute_metrics(const EpisodeLog& log,
                               const MetricParams& p = {}) {
  if (log.segments.empty() || log.rows.empty())
    throw ConfigError("compute_metrics: log needs at least one full segment");
  Metrics m;
  m.terminations = log.terminations;
  const int err_rows = static_cast<int>(std::lround(p.error_window_s / kInnerDt));

  for (const auto& seg : log.segments) {
    const auto rows = detail::segment_rows(log, seg.index);
    if (rows.empty()) continue;
    const int n = static_cast<int>(rows.size());

    const int settle = detail::settle_row(rows, p);
    double speed_deg_s;
    if (settle > 0) {
      const double dt = settle * kInnerDt;
      speed_deg_s =
          rad2deg(std::abs(rows[settle]->q[0] - seg.initial_slew)) / dt;
    } else {
      // Never settled: speed over the full dwell, flagged.
      speed_deg_s = rad2deg(std::abs(rows[n - 1]->q[0] - seg.initial_slew)) /
                    (n * kInnerDt);
      ++m.unsettled_segments;
    }
    m.avg_slew_speed_deg_s += speed_deg_s;

    // Largest excursion past the zero target in the approach direction.
    double ovs = 0;
    for (int i = 0; i < n; ++i)
      ovs = std::max(
          ovs, std::abs(overshoot_angle(seg.initial_slew, rows[i]->q[0])));
    m.avg_max_overshoot_deg += rad2deg(ovs);

    // Steady-state error over the final window.
    double err = 0;
    const int e0 = std::max(0, n - err_rows);
    for (int i = e0; i < n; ++i) {
      if (log.slew_only) {
        err += rad2deg(std::abs(rows[i]->q[0]));
      } else {
        const double dx = rows[i]->grab.x - seg.target.x;
        const double dy = rows[i]->grab.y - seg.target.y;
        const double dz = rows[i]->grab.z - seg.target.z;
        err += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    }
    m.avg_steady_state_error += err / (n - e0);

    // Tool oscillation: mean L1 of the two tool rates.
    double tool = 0;
    for (int i = 0; i < n; ++i)
      tool += std::abs(rows[i]->qdot[3]) + std::abs(rows[i]->qdot[4]);
    m.avg_tool_rate_deg_s += rad2deg(tool / n);

    ++m.segments;
  }
  if (m.segments > 0) {
    m.avg_slew_speed_deg_s /= m.segments;
    m.avg_max_overshoot_deg /= m.segments;
    m.avg_steady_state_error /= m.segments;
    m.avg_tool_rate_deg_s /= m.segments;
  }
  return m;
}

// ---------------------------------------------------------------------------
// PI baseline tuning

struct PiTuneResult {
  PiGains gains;
  double mean_settle_s = 0;
};

// Grid search minimizing the mean time-to-steady-state on the given
// environment (normally the synthetic plant).
inline PiTuneResult tune_pi_gains(const EvalEnvFactory& factory,
                                  const Scenario& scenario, uint64_t seed) {
  const std::vector<double> kp_grid{0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
  const std::vector<double> ki_grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.8};
  PiTuneResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  MetricParams mp;
  for (double kp : kp_grid) {
    for (double ki : ki_grid) {
      PiController pi({kp, ki});
      const EpisodeLog log =
          run_targets(pi, factory.build(scenario), scenario, seed);
      // Mean settle time; unsettled segments pay the full dwell.
      double cost = 0;
      for (const auto& seg : log.segments) {
        const auto rows = detail::segment_rows(log, seg.index);
        const int settle = detail::settle_row(rows, mp);
        cost += settle > 0 ? settle * kInnerDt : scenario.dwell_s;
      }
      cost += 10.0 * log.terminations;
      if (cost < best_cost) {
        best_cost = cost;
        best.gains = {kp, ki};
        best.mean_settle_s = cost / std::max<size_t>(1, log.segments.size());
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Transfer evaluation

struct TransferComparison {
  std::string scenario;
  Metrics model_sim;
  Metrics plant;
  EpisodeLog model_log;
  EpisodeLog plant_log;
};

// Identical controller stepped against the learned-model environment and
// against the synthetic plant standing in for the machine.
inline std::vector<TransferComparison> transfer_eval(
    const PolicyCheckpoint& ckpt, const SlewModel& model,
    const PlantParams& plant, const MachineGeometry& geom,
    const std::vector<Scenario>& scenarios, uint64_t seed,
    const MetricParams& mp = {}) {
  std::vector<TransferComparison> out;
  for (size_t i = 0; i < scenarios.size(); ++i) {
    const Scenario& s = scenarios[i];
    const int total_ticks = static_cast<int>(s.targets.size()) *
                            static_cast<int>(std::lround(s.dwell_s / kTickDt));
    const Environment::Config cfg =
        eval_env_config(geom, s, ckpt.config.history, total_ticks);

    TransferComparison cmp;
    cmp.scenario = s.name;
    {
      PolicyController ctrl(ckpt);
      cmp.model_log =
          run_targets(ctrl, Environment(cfg, &model), s, derive_seed(seed, i));
      cmp.model_sim = compute_metrics(cmp.model_log, mp);
    }
    {
      PolicyController ctrl(ckpt);
      cmp.plant_log =
          run_targets(ctrl, Environment(cfg, plant), s, derive_seed(seed, i));
      cmp.plant = compute_metrics(cmp.plant_log, mp);
    }
    out.push_back(std::move(cmp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, Metrics>>&
                                  rows) {
  CsvWriter w(path, "Policy,Speed,Overshoot,Error,Tool");
  for (const auto& [name, m] : rows)
    w.raw_row(name + "," + fmt_num(m.avg_slew_speed_deg_s) + "," +
              fmt_num(m.avg_max_overshoot_deg) + "," +
              fmt_num(m.avg_steady_state_error) + "," +
              fmt_num(m.avg_tool_rate_deg_s));
}

inline void write_log_csv(const std::filesystem::path& path,
                          const EpisodeLog& log) {
  CsvWriter w(path,
              "t,segment,q_slew,q_boom,q_stick,q_tool_x,q_tool_y,qd_slew,"
              "qd_boom,qd_stick,qd_tool_x,qd_tool_y,grab_x,grab_y,grab_z,"
              "u_slew,ref_boom,ref_stick,target_slew_abs");
  for (const auto& r : log.rows)
    w.row({r.t, static_cast<double>(r.segment), r.q[0], r.q[1], r.q[2], r.q[3],
           r.q[4], r.qdot[0], r.qdot[1], r.qdot[2], r.qdot[3], r.qdot[4],
           r.grab.x, r.grab.y, r.grab.z, r.action[0], r.action[1], r.action[2],
           r.target_slew_abs});
}

// Minimal deterministic SVG line plot of named series over time.
inline void write_svg_plot(const std::filesystem::path& path,
                           const std::string& title,
                           const std::vector<double>& t,
                           const std::vector<std::pair<std::string,
                                                       std::vector<double>>>&
                               series) {
  const int width = 860, height = 360, margin = 46;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [name, ys] : series)
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double t0 = t.empty() ? 0.0 : t.front();
  const double t1 = t.empty() ? 1.0 : t.back();
  auto sx = [&](double x) {
    return margin + (x - t0) / std::max(1e-12, t1 - t0) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin -
           (y - lo) / (hi - lo) * (height - 2 * margin);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title +
         "</text>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" +
         std::to_string(height - margin) + "\" x2=\"" +
         std::to_string(width - margin) + "\" y2=\"" +
         std::to_string(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" +
         std::to_string(margin) + "\" x2=\"" + std::to_string(margin) +
         "\" y2=\"" + std::to_string(height - margin) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"6\" y=\"" + std::to_string(margin) +
         "\" font-size=\"11\">" + fmt_num(hi) + "</text>\n";
  svg += "<text x=\"6\" y=\"" + std::to_string(height - margin) +
         "\" font-size=\"11\">" + fmt_num(lo) + "</text>\n";
  int ci = 0;
  for (const auto& [name, ys] : series) {
    const char* color = kColors[ci % 6];
    std::string pts;
    const size_t stride = std::max<size_t>(1, ys.size() / 2000);
    for (size_t i = 0; i < ys.size() && i < t.size(); i += stride) {
      pts += fmt_num(sx(t[i])) + "," + fmt_num(sy(ys[i])) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + std::to_string(width - margin - 120) + "\" y=\"" +
           std::to_string(margin + 16 * ci) + "\" font-size=\"12\" fill=\"" +
           color + "\">" + name + "</text>\n";
    ++ci;
  }
  svg += "</svg>\n";
  write_text_file(path, svg);
}

// Trajectory plots for one run: slew angle, grab position, tool rates.
inline void write_log_plots(const std::filesystem::path& dir,
                            const std::string& stem, const EpisodeLog& log) {
  std::vector<double> t, slew, gx, gy, gz, tdx, tdy;
  for (const auto& r : log.rows) {
    t.push_back(r.t);
    slew.push_back(rad2deg(r.q[0]));
    gx.push_back(r.grab.x);
    gy.push_back(r.grab.y);
    gz.push_back(r.grab.z);
    tdx.push_back(rad2deg(r.qdot[3]));
    tdy.push_back(rad2deg(r.qdot[4]));
  }
  write_svg_plot(dir / (stem + "_slew.svg"), "slew error to target [deg]", t,
                 {{"slew", slew}});
  write_svg_plot(dir / (stem + "_grab.svg"), "grab position [m]", t,
                 {{"x", gx}, {"y", gy}, {"z", gz}});
  write_svg_plot(dir / (stem + "_tool.svg"), "tool rates [deg/s]", t,
                 {{"tool_x", tdx}, {"tool_y", tdy}});
}

}  // namespace mhc
