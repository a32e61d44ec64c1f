// Mixed training environment. The slew joint runs on the learned actuator
// model (or, for transfer evaluation, the synthetic plant); boom and stick
// are first-order velocity trackers with delay; the tool is a damped
// decoupled double pendulum driven by the attachment-point motion and the
// slew fictitious forces. 50 Hz physics, 10 Hz control with zero-order-hold
// actions.
#pragma once

#include <deque>
#include <optional>

#include "mhc/actuator_model.hpp"
#include "mhc/common.hpp"
#include "mhc/geometry.hpp"
#include "mhc/slew_plant.hpp"

namespace mhc {

// ---------------------------------------------------------------------------
// Arm velocity tracking: qdot[k] = qdot[k-1] + P * (ref[k-d] - qdot[k-1])

struct ArmModelParams {
  double gain = 0.1;    // P in (0, 1]
  int delay_steps = 10; // d, in 50 Hz steps

  void validate() const {
    if (gain <= 0 || gain > 1) throw ConfigError("arm model: P must be in (0,1]");
    if (delay_steps < 1) throw ConfigError("arm model: delay must be >= 1 step");
  }
};

inline double arm_step(double qdot_prev, double ref_delayed,
                       const ArmModelParams& p) {
  return qdot_prev + p.gain * (ref_delayed - qdot_prev);
}

// ---------------------------------------------------------------------------
// Tool pendulum

struct ToolParams {
  double length_x = 2.0;   // m
  double length_y = 2.0;   // m
  double damping_x = 0.3;  // 1/s
  double damping_y = 0.3;  // 1/s
  double gravity = kGravity;
  // Default keeps the printed centrifugal term -slew_rate^2 * r_y; the
  // projected variant multiplies it by cos(theta_y).
  bool centrifugal_projected = false;
};

struct ToolState {
  double theta_x = 0;     // rad, +y deflection
  double theta_y = 0;     // rad, -x (inward) deflection
  double thetadot_x = 0;  // rad/s
  double thetadot_y = 0;
};

// One 0.02 s tool update. Velocities advance with the printed dynamics,
// positions with the updated velocities (semi-implicit Euler).
inline ToolState tool_step(const ToolState& tool, double v_x_next,
                           double v_x_prev, double v_y_next, double v_y_prev,
                           double slew_rate, double r_y, const ToolParams& p,
                           double dt = kInnerDt) {
  const double cy = std::cos(tool.theta_y), sy = std::sin(tool.theta_y);
  const double cx = std::cos(tool.theta_x), sx = std::sin(tool.theta_x);

  const double centrifugal =
      slew_rate * slew_rate * r_y * (p.centrifugal_projected ? cy : 1.0);
  const double acc_y = ((v_x_next - v_x_prev) / dt * cy - p.gravity * sy -
                        centrifugal) / p.length_y -
                       p.damping_y * tool.thetadot_y;
  const double f_roty = tool.thetadot_y * tool.thetadot_y * p.length_y;
  const double acc_x = (-(v_y_next - v_y_prev) / dt * cx -
                        (p.gravity * cy + f_roty) * sx) / p.length_x -
                       p.damping_x * tool.thetadot_x;

  ToolState next;
  next.thetadot_y = tool.thetadot_y + acc_y * dt;
  next.thetadot_x = tool.thetadot_x + acc_x * dt;
  next.theta_y = tool.theta_y + next.thetadot_y * dt;
  next.theta_x = tool.theta_x + next.thetadot_x * dt;
  return next;
}

// Mechanical energy of one tool axis with a static support (test aid and
// invariant hook): unit mass pendulum of length l.
inline double pendulum_energy(double theta, double thetadot, double length,
                              double gravity = kGravity) {
  const double s = std::sin(0.5 * theta);  // 1 - cos(t) = 2 sin^2(t/2)
  return 0.5 * length * length * thetadot * thetadot +
         gravity * length * 2.0 * s * s;
}

// ---------------------------------------------------------------------------
// Episode randomization

struct RandomizationRanges {
  double slew_abs_min = 0.2, slew_abs_max = 1.5;  // rad, initial |slew error|
  double load_min = 0.0, load_max = 2000.0;       // kg
  double arm_gain_min = 0.05, arm_gain_max = 0.2;
  int arm_delay_min = 5, arm_delay_max = 15;      // 50 Hz steps (0.1-0.3 s)
  double tool_damping_min = 0.1, tool_damping_max = 0.5;
  double tool_length_min = 1.7, tool_length_max = 2.3;
  double init_margin = 0.05;   // rad, keeps initial arm off the hard stops
  double safety_margin = 0.5;  // m, over the termination thresholds
  double obs_noise = 0.01;     // uniform, fraction of channel range

  void validate() const {
    if (slew_abs_min <= 0 || slew_abs_max <= slew_abs_min)
      throw ConfigError("randomization: bad initial slew range");
    if (load_min < 0 || load_max < load_min)
      throw ConfigError("randomization: bad load range");
    if (arm_gain_min <= 0 || arm_gain_max > 1 || arm_gain_max < arm_gain_min)
      throw ConfigError("randomization: bad arm gain range");
    if (arm_delay_min < 1 || arm_delay_max < arm_delay_min)
      throw ConfigError("randomization: bad arm delay range");
    if (tool_length_min <= 0 || tool_length_max < tool_length_min)
      throw ConfigError("randomization: bad tool length range");
  }
};

struct EpisodeDraw {
  ArmModelParams arm;
  ToolParams tool;
  double load_kg = 0.0;
};

struct TerminationParams {
  double z_min = 0.5;  // m above ground
  double r_min = 3.0;  // m from the slew axis
};

enum class Termination { running, too_low, too_close, timeout };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::running: return "running";
    case Termination::too_low: return "too_low";
    case Termination::too_close: return "too_close";
    case Termination::timeout: return "timeout";
  }
  return "?";
}

inline Termination classify_termination(const CartesianPose& grab, int tick,
                                        const TerminationParams& term,
                                        int max_ticks = kTicksPerEpisode) {
  if (tick >= max_ticks) return Termination::timeout;
  if (grab.z < term.z_min) return Termination::too_low;
  if (std::hypot(grab.x, grab.y) < term.r_min) return Termination::too_close;
  return Termination::running;
}

// ---------------------------------------------------------------------------
// Environment

// Per-tick record appended to the observation history (oldest first).
struct TickRecord {
  std::array<double, 3> action{};  // applied (clipped) action
  std::array<double, 5> q{};       // canonical slew, boom, stick, tool_x/y
  std::array<double, 5> qdot{};    // measured rates
};

struct StepInfo {
  Termination status = Termination::running;
  std::array<double, 3> applied_action{};
  std::array<double, 3> target_error{};  // target - grab, canonical frame
  double slew_angle = 0;                 // canonical, rad
  double slew_rate = 0;                  // measured, rad/s
  double boom_rate = 0, stick_rate = 0;
  double tool_rate_x = 0, tool_rate_y = 0;
  CartesianPose grab;
};

// 50 Hz sub-sample for episode logging.
struct InnerSample {
  double t = 0;
  std::array<double, 5> q{};
  std::array<double, 5> qdot{};
  CartesianPose grab;
};

class Environment {
 public:
  struct Config {
    MachineGeometry geometry;
    RandomizationRanges ranges;
    TerminationParams termination;
    bool slew_only = false;
    bool load_blind_obs = false;  // observation I_z computed with zero load
    bool zoh_slew_interp = false; // default: linear between model ticks
    int history = 5;              // H, control ticks
    int max_ticks = kTicksPerEpisode;
  };

  // Training environment: slew joint simulated by the learned model.
  Environment(const Config& cfg, const SlewModel* model)
      : cfg_(cfg), model_(model) {
    if (model == nullptr) throw ConfigError("environment: null slew model");
    cfg_.ranges.validate();
  }

  // Transfer environment: slew joint is the synthetic plant.
  Environment(const Config& cfg, const PlantParams& plant)
      : cfg_(cfg), plant_params_(plant) {
    cfg_.ranges.validate();
    plant_params_->validate();
  }

  bool plant_backed() const { return plant_params_.has_value(); }
  // Raw plant state for data recording; null for model-backed environments.
  const PlantState* plant_state() const {
    return plant_backed() ? &plant_ : nullptr;
  }
  double true_inertia() const { return inertia_true_; }
  const Config& config() const { return cfg_; }
  const EpisodeDraw& draw() const { return draw_; }
  int tick() const { return tick_; }
  double load() const { return draw_.load_kg; }
  double initial_slew() const { return initial_slew_; }
  const CartesianPose& target() const { return target_; }
  double inertia_obs() const { return inertia_obs_; }
  const std::deque<TickRecord>& history() const { return history_; }
  Rng& obs_rng() { return obs_rng_; }
  const std::vector<InnerSample>& inner_trace() const { return inner_trace_; }
  void set_trace_enabled(bool on) { trace_enabled_ = on; }

  JointState joints() const {
    JointState js = arm_;
    js.q[0] = slew_angle_;
    js.qdot[0] = slew_rate_;
    js.q[3] = tool_.theta_x;
    js.q[4] = tool_.theta_y;
    js.qdot[3] = tool_.thetadot_x;
    js.qdot[4] = tool_.thetadot_y;
    return js;
  }

  // Retarget between dwell segments of an evaluation run; state carries
  // over. The canonical slew frame shifts so the new target sits at zero;
  // history entries are re-expressed in the new frame.
  void set_target(const CartesianPose& t) { target_ = t; }
  void retarget_slew(double delta) {
    slew_angle_ += delta;
    initial_slew_ = slew_angle_;
    for (auto& rec : history_) rec.q[0] += delta;
  }
  void reset_tick_clock() { tick_ = 0; }

  void reset(uint64_t seed) { reset_with(seed, {}, {}, {}, {}); }

  // Evaluation entry point: any of the randomized quantities can be pinned.
  void reset_with(uint64_t seed, std::optional<EpisodeDraw> draw,
                  std::optional<CartesianPose> target,
                  std::optional<double> initial_slew,
                  std::optional<std::array<double, 2>> arm_init) {
    Rng rng(derive_seed(seed, 0xE9));
    obs_rng_ = Rng(derive_seed(seed, 0x0B5));
    plant_noise_ = Rng(derive_seed(seed, 0xFA));

    draw_ = draw ? *draw : sample_draw(rng);
    draw_.arm.validate();

    const auto& R = cfg_.ranges;
    // Rejection-sample initial configuration and target against the
    // termination thresholds plus a safety margin.
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      arm_ = JointState{};
      if (arm_init) {
        arm_.q[1] = (*arm_init)[0];
        arm_.q[2] = (*arm_init)[1];
      } else {
        arm_.q[1] = rng.uniform(cfg_.geometry.boom_min + R.init_margin,
                                cfg_.geometry.boom_max - R.init_margin);
        arm_.q[2] = rng.uniform(cfg_.geometry.stick_min + R.init_margin,
                                cfg_.geometry.stick_max - R.init_margin);
      }
      initial_slew_ = initial_slew
                          ? *initial_slew
                          : rng.sign() * rng.uniform(R.slew_abs_min, R.slew_abs_max);
      target_ = target ? *target : sample_target(rng);
      ok = safe_pose(joints_at(arm_.q[1], arm_.q[2], initial_slew_)) &&
           target_safe(target_);
      if (!ok && arm_init && target && initial_slew)
        break;  // fully pinned and unsafe, retrying cannot help
    }
    if (!ok) throw ConfigError("env_reset: could not sample a safe state (ranges too tight)");

    slew_angle_ = initial_slew_;
    slew_rate_ = 0;
    tool_ = ToolState{};  // vertical, zero velocity
    boom_refs_.assign(draw_.arm.delay_steps, 0.0);
    stick_refs_.assign(draw_.arm.delay_steps, 0.0);
    arm_.qdot = {0, 0, 0, 0, 0};

    if (plant_backed()) {
      plant_ = plant_reset(*plant_params_, initial_slew_);
    } else {
      buffers_ = SlewBuffers{};  // all zeros by convention
      buffers_.angle = 0.0;
      model_omega_prev_ = 0.0;
    }

    tick_ = 0;
    history_.clear();
    inner_trace_.clear();
    prev_inner_velocity_ = attachment_velocity_now();
    update_inertia();
  }

  StepInfo step(const std::array<double, 3>& action_in) {
    for (double a : action_in)
      if (!std::isfinite(a))
        throw std::invalid_argument("env_step: non-finite action");

    std::array<double, 3> action{
        std::clamp(action_in[0], -1.0, 1.0),
        cfg_.slew_only ? 0.0 : std::clamp(action_in[1], -0.2, 0.2),
        cfg_.slew_only ? 0.0 : std::clamp(action_in[2], -0.2, 0.2)};

    // Slew advances once per control tick at its native 0.1 s rate; the
    // inner 50 Hz steps see interpolated (model) or true (plant) velocity.
    std::array<double, kInnerPerTick> inner_rate;
    if (plant_backed()) {
      for (int j = 0; j < kInnerPerTick; ++j) {
        plant_step(plant_, *plant_params_, action[0], inertia_true_,
                   plant_params_->dt);
        inner_rate[j] = plant_.velocity;
      }
    } else {
      const SlewPrediction p =
          predict_step(*model_, buffers_, action[0], inertia_true_);
      for (int j = 0; j < kInnerPerTick; ++j) {
        inner_rate[j] = cfg_.zoh_slew_interp
                            ? p.omega
                            : model_omega_prev_ + (j + 1) *
                                  (p.omega - model_omega_prev_) / kInnerPerTick;
      }
      model_omega_prev_ = p.omega;
    }

    for (int j = 0; j < kInnerPerTick; ++j) {
      const double rate_prev = slew_rate_;
      const AttachmentVelocity v_prev = prev_inner_velocity_;

      // Arm: delayed first-order tracking, references held over the tick.
      boom_refs_.push_back(action[1]);
      stick_refs_.push_back(action[2]);
      const double boom_ref = boom_refs_.front();
      const double stick_ref = stick_refs_.front();
      boom_refs_.pop_front();
      stick_refs_.pop_front();
      arm_.qdot[1] = arm_step(arm_.qdot[1], boom_ref, draw_.arm);
      arm_.qdot[2] = arm_step(arm_.qdot[2], stick_ref, draw_.arm);
      integrate_arm_joint(1, cfg_.geometry.boom_min, cfg_.geometry.boom_max);
      integrate_arm_joint(2, cfg_.geometry.stick_min, cfg_.geometry.stick_max);

      slew_rate_ = inner_rate[j];
      slew_angle_ += kInnerDt * 0.5 * (rate_prev + slew_rate_);

      const AttachmentVelocity v_now = attachment_velocity_now();
      const double r_y = grab_radial_distance(joints(), cfg_.geometry);
      tool_ = tool_step(tool_, v_now.v_x, v_prev.v_x, v_now.v_y, v_prev.v_y,
                        rate_prev, r_y, draw_.tool);
      prev_inner_velocity_ = v_now;

      if (trace_enabled_) {
        const JointState js = joints();
        inner_trace_.push_back({tick_ * kTickDt + (j + 1) * kInnerDt, js.q,
                                js.qdot,
                                forward_kinematics(js, cfg_.geometry)});
      }
    }
    ++tick_;
    update_inertia();

    StepInfo info;
    info.applied_action = action;
    const JointState js = joints();
    info.grab = forward_kinematics(js, cfg_.geometry);
    info.target_error = {target_.x - info.grab.x, target_.y - info.grab.y,
                         target_.z - info.grab.z};
    info.slew_angle = slew_angle_;
    // Plant read-out noise stands in for the encoder-derived velocity.
    info.slew_rate = plant_backed()
                         ? slew_rate_ + plant_noise_.normal(
                                            0.0, plant_params_->noise_std_omega)
                         : slew_rate_;
    info.boom_rate = arm_.qdot[1];
    info.stick_rate = arm_.qdot[2];
    info.tool_rate_x = tool_.thetadot_x;
    info.tool_rate_y = tool_.thetadot_y;
    info.status = check_termination();

    TickRecord rec;
    rec.action = action;
    rec.q = js.q;
    rec.qdot = js.qdot;
    rec.qdot[0] = info.slew_rate;
    history_.push_back(rec);
    while (static_cast<int>(history_.size()) > cfg_.history) history_.pop_front();
    return info;
  }

  Termination check_termination() const {
    return classify_termination(forward_kinematics(joints(), cfg_.geometry),
                                tick_, cfg_.termination, cfg_.max_ticks);
  }

 private:
  EpisodeDraw sample_draw(Rng& rng) {
    const auto& R = cfg_.ranges;
    EpisodeDraw d;
    d.arm.gain = rng.uniform(R.arm_gain_min, R.arm_gain_max);
    d.arm.delay_steps = rng.uniform_int(R.arm_delay_min, R.arm_delay_max);
    d.tool.length_x = rng.uniform(R.tool_length_min, R.tool_length_max);
    d.tool.length_y = rng.uniform(R.tool_length_min, R.tool_length_max);
    d.tool.damping_x = rng.uniform(R.tool_damping_min, R.tool_damping_max);
    d.tool.damping_y = rng.uniform(R.tool_damping_min, R.tool_damping_max);
    d.load_kg = rng.uniform(R.load_min, R.load_max);
    return d;
  }

  JointState joints_at(double boom, double stick, double slew) const {
    JointState js;
    js.q[0] = slew;
    js.q[1] = boom;
    js.q[2] = stick;
    return js;
  }

  bool safe_pose(const JointState& js) const {
    const CartesianPose grab = forward_kinematics(js, cfg_.geometry);
    const double m = cfg_.ranges.safety_margin;
    return grab.z >= cfg_.termination.z_min + m &&
           std::hypot(grab.x, grab.y) >= cfg_.termination.r_min + m;
  }

  bool target_safe(const CartesianPose& t) const {
    const double m = cfg_.ranges.safety_margin;
    return t.z >= cfg_.termination.z_min + m &&
           std::hypot(t.x, t.y) >= cfg_.termination.r_min + m;
  }

  // Targets are grab positions of reachable arm configurations in the x-z
  // plane (y = 0, slew target = 0).
  CartesianPose sample_target(Rng& rng) {
    for (int i = 0; i < 100; ++i) {
      JointState js;
      js.q[1] = rng.uniform(cfg_.geometry.boom_min, cfg_.geometry.boom_max);
      js.q[2] = rng.uniform(cfg_.geometry.stick_min, cfg_.geometry.stick_max);
      const CartesianPose grab = forward_kinematics(js, cfg_.geometry);
      const CartesianPose t{grab.x, 0.0, grab.z};
      if (target_safe(t)) return t;
    }
    throw ConfigError("env_reset: could not sample a safe target");
  }

  void integrate_arm_joint(int idx, double lo, double hi) {
    arm_.q[idx] += kInnerDt * arm_.qdot[idx];
    if (arm_.q[idx] <= lo) {
      arm_.q[idx] = lo;
      if (arm_.qdot[idx] < 0) arm_.qdot[idx] = 0;
    } else if (arm_.q[idx] >= hi) {
      arm_.q[idx] = hi;
      if (arm_.qdot[idx] > 0) arm_.qdot[idx] = 0;
    }
  }

  AttachmentVelocity attachment_velocity_now() const {
    return tool_attachment_velocity(joints(), cfg_.geometry);
  }

  void update_inertia() {
    inertia_true_ = inertia_about_z(joints(), cfg_.geometry, draw_.load_kg);
    inertia_obs_ = cfg_.load_blind_obs
                       ? inertia_about_z(joints(), cfg_.geometry, 0.0)
                       : inertia_true_;
  }

  Config cfg_;
  const SlewModel* model_ = nullptr;
  std::optional<PlantParams> plant_params_;

  EpisodeDraw draw_;
  JointState arm_;        // boom/stick joint state (50 Hz)
  ToolState tool_;
  double slew_angle_ = 0; // canonical frame (target slew at 0)
  double slew_rate_ = 0;
  double initial_slew_ = 0;
  CartesianPose target_;
  double inertia_true_ = 1;
  double inertia_obs_ = 1;
  int tick_ = 0;

  SlewBuffers buffers_;        // model backend
  double model_omega_prev_ = 0;
  PlantState plant_;           // plant backend

  std::deque<double> boom_refs_, stick_refs_;
  AttachmentVelocity prev_inner_velocity_;
  std::deque<TickRecord> history_;
  std::vector<InnerSample> inner_trace_;
  bool trace_enabled_ = false;

  Rng obs_rng_{0};
  Rng plant_noise_{0};
};

}  // namespace mhc
