// PPO training of the end-effector policy: observation assembly with fixed
// per-channel scaling, the seven-term reward with curriculum, Gaussian
// policy with state-independent log-std, vectorized on-policy rollouts,
// GAE, and the clipped-surrogate update. A slew-only variant drives just
// the rotation joint with the reward adapted to joint space.
#pragma once

#include <json.hpp>

#include <deque>
#include <filesystem>

#include "mhc/common.hpp"
#include "mhc/mixed_sim.hpp"
#include "mhc/nn.hpp"

namespace mhc {

// ---------------------------------------------------------------------------
// Observations

inline constexpr const char* kObsLayoutVersion = "obs-v1";

// Fixed affine scaling per channel; observation channels land near [-1, 1].
struct ObsScaling {
  double slew_angle = 1.5;   // rad
  double arm_angle_span = 1.0;
  double slew_rate = 0.3;    // rad/s
  double arm_rate = 0.25;
  double tool_angle = 0.5;
  double tool_rate = 1.0;
  double inertia = 7.0e5;    // kg m^2
  double target_xy = 15.0;   // m
  double target_z = 10.0;
};

struct PolicyConfig {
  bool slew_only = false;
  int history = 5;  // H control ticks
  std::vector<int> hidden = {256, 128, 128};
  double init_log_std = std::log(0.5);
  ObsScaling scaling;

  int action_dim() const { return slew_only ? 1 : 3; }
  int obs_dim() const {
    return slew_only ? 3 * history + 2 : 13 * history + 4;
  }
};

// Flattened histories over [k-H, k-1], oldest tick first, zero-padded right
// after reset. Layout (full mode): actions (3H), joint rates (5H), joint
// positions (5H, slew fed as error to target), I_z, target xyz.
inline VectorXd build_observation(const Environment& env,
                                  const PolicyConfig& cfg, Rng* noise_rng) {
  const auto& geom = env.config().geometry;
  const auto& sc = cfg.scaling;
  const int H = cfg.history;
  VectorXd obs = VectorXd::Zero(cfg.obs_dim());

  const auto& hist = env.history();
  const int have = static_cast<int>(hist.size());
  const double boom_mid = 0.5 * (geom.boom_min + geom.boom_max);
  const double stick_mid = 0.5 * (geom.stick_min + geom.stick_max);

  for (int h = 0; h < H; ++h) {
    const int src = have - H + h;  // negative slots stay zero
    if (src < 0) continue;
    const TickRecord& r = hist[src];
    if (cfg.slew_only) {
      obs(h) = r.action[0];
      obs(H + h) = r.qdot[0] / sc.slew_rate;
      obs(2 * H + h) = r.q[0] / sc.slew_angle;
    } else {
      for (int a = 0; a < 3; ++a) obs(3 * h + a) = r.action[a];
      const int vd = 3 * H;
      obs(vd + 5 * h + 0) = r.qdot[0] / sc.slew_rate;
      obs(vd + 5 * h + 1) = r.qdot[1] / sc.arm_rate;
      obs(vd + 5 * h + 2) = r.qdot[2] / sc.arm_rate;
      obs(vd + 5 * h + 3) = r.qdot[3] / sc.tool_rate;
      obs(vd + 5 * h + 4) = r.qdot[4] / sc.tool_rate;
      const int qd = 8 * H;
      obs(qd + 5 * h + 0) = r.q[0] / sc.slew_angle;
      obs(qd + 5 * h + 1) = (r.q[1] - boom_mid) / sc.arm_angle_span;
      obs(qd + 5 * h + 2) = (r.q[2] - stick_mid) / sc.arm_angle_span;
      obs(qd + 5 * h + 3) = r.q[3] / sc.tool_angle;
      obs(qd + 5 * h + 4) = r.q[4] / sc.tool_angle;
    }
  }
  if (cfg.slew_only) {
    obs(3 * H) = env.inertia_obs() / sc.inertia;
    obs(3 * H + 1) = 0.0;  // target slew angle in the canonical frame
  } else {
    obs(13 * H) = env.inertia_obs() / sc.inertia;
    obs(13 * H + 1) = env.target().x / sc.target_xy;
    obs(13 * H + 2) = env.target().y / sc.target_xy;
    obs(13 * H + 3) = env.target().z / sc.target_z;
  }
  if (noise_rng != nullptr && env.config().ranges.obs_noise > 0) {
    const double amp = env.config().ranges.obs_noise;
    for (Eigen::Index i = 0; i < obs.size(); ++i)
      obs(i) += noise_rng->uniform(-amp, amp);
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Reward

struct RewardConfig {
  double w_balance = 0.5;
  double w_target = 2.0;
  double w_action = 0.05;
  double w_overshoot = 1.0;
  double w_oscillation = 0.3;
  double w_decouple = 0.1;
  double w_one_shot = 0.5;
  std::array<double, 3> sigma_u = {1.0, 0.2, 0.2};  // half-range per channel
  // Ending an episode on a safety violation costs this much (not in the
  // per-step reward; applied by the rollout collector).
  double termination_penalty = 20.0;
};

// One-shot indicator thresholds as printed in the reward definition.
inline constexpr double kOneShotErrorNorm = 0.5;   // m (task) / rad (joint)
inline constexpr double kOneShotSlewRate = 0.02;   // rad/s

struct CurriculumSchedule {
  double core_start = 0.3;       // initial balance/target multiplier
  double core_ramp_end = 0.4;    // fraction of training
  double sharpness_start = 0.25; // scales the error inside the exponentials
  double sharpness_ramp_end = 0.5;
  double one_shot_warmup = 0.3;  // multiplier is zero before this fraction
  double one_shot_ramp_end = 0.7;
};

struct CurriculumScales {
  double balance = 1.0;
  double target = 1.0;
  double one_shot = 1.0;
  double sharpness = 1.0;
};

inline CurriculumScales curriculum_scale(double progress,
                                         const CurriculumSchedule& s) {
  const double t = std::clamp(progress, 0.0, 1.0);
  auto ramp = [&](double from, double start_t, double end_t) {
    if (t >= end_t) return 1.0;
    if (t <= start_t) return from;
    return from + (1.0 - from) * (t - start_t) / (end_t - start_t);
  };
  CurriculumScales c;
  c.balance = ramp(s.core_start, 0.0, s.core_ramp_end);
  c.target = c.balance;
  c.sharpness = ramp(s.sharpness_start, 0.0, s.sharpness_ramp_end);
  c.one_shot = t <= s.one_shot_warmup
                   ? 0.0
                   : ramp(0.0, s.one_shot_warmup, s.one_shot_ramp_end);
  return c;
}

struct RewardInputs {
  bool slew_only = false;
  std::array<double, 3> target_error{};  // m, canonical frame (full mode)
  double slew_angle = 0;                 // rad, canonical (error to target 0)
  double initial_slew = 0;
  double slew_rate = 0;
  double boom_rate = 0, stick_rate = 0;
  double tool_rate_x = 0, tool_rate_y = 0;
};

inline RewardInputs reward_inputs(const StepInfo& info, bool slew_only,
                                  double initial_slew) {
  RewardInputs in;
  in.slew_only = slew_only;
  in.target_error = info.target_error;
  in.slew_angle = info.slew_angle;
  in.initial_slew = initial_slew;
  in.slew_rate = info.slew_rate;
  in.boom_rate = info.boom_rate;
  in.stick_rate = info.stick_rate;
  in.tool_rate_x = info.tool_rate_x;
  in.tool_rate_y = info.tool_rate_y;
  return in;
}

// Overshoot past the zero target, signed by the approach direction.
inline double overshoot_angle(double initial_slew, double slew_angle) {
  if (initial_slew < 0) return std::max(0.0, slew_angle);
  if (initial_slew > 0) return std::min(0.0, slew_angle);
  return 0.0;
}

struct RewardBreakdown {
  double balance = 0, target = 0, action = 0, overshoot = 0;
  double oscillation = 0, decouple = 0, one_shot = 0;
  double total() const {
    return balance + target + action + overshoot + oscillation + decouple +
           one_shot;
  }
};

inline RewardBreakdown compute_reward(const RewardInputs& in,
                                      const std::array<double, 3>& action,
                                      const std::array<double, 3>& prev_action,
                                      const RewardConfig& cfg,
                                      const CurriculumScales& cur) {
  const int dims = in.slew_only ? 1 : 3;

  // Task-space error (m) or joint-space slew error (rad).
  double err_l1 = 0, err_l2sq = 0, raw_l2sq = 0;
  if (in.slew_only) {
    const double e = -in.slew_angle;
    err_l1 = std::abs(e) * cur.sharpness;
    err_l2sq = err_l1 * err_l1;
    raw_l2sq = e * e;
  } else {
    for (double e : in.target_error) {
      err_l1 += std::abs(e) * cur.sharpness;
      err_l2sq += (e * cur.sharpness) * (e * cur.sharpness);
      raw_l2sq += e * e;
    }
  }

  RewardBreakdown r;
  r.balance = cfg.w_balance * cur.balance * (std::exp(-err_l1) - 1.0);
  r.target = cfg.w_target * cur.target * std::exp(-err_l2sq);

  double du = 0, u_sq = 0;
  for (int i = 0; i < dims; ++i) {
    const double d = (action[i] - prev_action[i]) / cfg.sigma_u[i];
    du += d * d;
    u_sq += (action[i] / cfg.sigma_u[i]) * (action[i] / cfg.sigma_u[i]);
  }
  r.action = -cfg.w_action * du;

  const double ovs = overshoot_angle(in.initial_slew, in.slew_angle);
  r.overshoot = cfg.w_overshoot * (std::exp(-std::abs(ovs)) - 1.0);

  if (!in.slew_only) {
    r.oscillation = -cfg.w_oscillation *
                    (std::abs(in.tool_rate_x) + std::abs(in.tool_rate_y));
    r.decouple = -cfg.w_decouple * std::abs(in.slew_rate) *
                 (std::abs(in.boom_rate) + std::abs(in.stick_rate));
  }

  const bool near = std::sqrt(raw_l2sq) < kOneShotErrorNorm &&
                    std::abs(in.slew_rate) < kOneShotSlewRate;
  r.one_shot = near ? -cfg.w_one_shot * cur.one_shot * u_sq : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Policy

struct GaussianPolicy {
  Mlp mean_net;        // tanh hidden layers; mean = tanh(raw output)
  VectorXd log_std;    // state-independent, learned

  int action_dim() const { return mean_net.output_dim(); }
};

inline GaussianPolicy make_policy(const PolicyConfig& cfg, uint64_t seed) {
  std::vector<int> dims;
  dims.push_back(cfg.obs_dim());
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(cfg.action_dim());
  GaussianPolicy p;
  p.mean_net = make_mlp(dims, Activation::tanh, seed);
  p.mean_net.weights.back() *= 0.01;  // near-zero initial actions
  p.log_std = VectorXd::Constant(cfg.action_dim(), cfg.init_log_std);
  return p;
}

inline Mlp make_value_net(const PolicyConfig& cfg, uint64_t seed) {
  std::vector<int> dims;
  dims.push_back(cfg.obs_dim());
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(1);
  return make_mlp(dims, Activation::tanh, seed);
}

// Squashed mean for a batch of observations (A x N).
inline MatrixXd policy_mean(const GaussianPolicy& p, const MatrixXd& obs,
                            ForwardCache* cache = nullptr) {
  return forward_batch(p.mean_net, obs, cache).array().tanh().matrix();
}

inline double gaussian_logprob(const VectorXd& action, const VectorXd& mean,
                               const VectorXd& log_std) {
  double lp = -0.5 * action.size() * std::log(2.0 * kPi);
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    const double s = std::exp(log_std(i));
    const double z = (action(i) - mean(i)) / s;
    lp += -0.5 * z * z - log_std(i);
  }
  return lp;
}

// Map the normalized policy action to physical units; the environment clips.
inline std::array<double, 3> to_env_action(const VectorXd& a, bool slew_only) {
  if (slew_only) return {a(0), 0.0, 0.0};
  return {a(0), 0.2 * a(1), 0.2 * a(2)};
}

// ---------------------------------------------------------------------------
// Rollouts

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch = 512;
  int rollout_steps = 128;  // per environment per iteration
  int workers = 16;         // parallel environments (lockstep)
  long total_ticks = 400000;
  double lr_policy = 3e-4;
  double lr_value = 3e-4;
  double entropy_coef = 3e-4;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  uint64_t seed = 0;

  void validate() const {
    if (gamma <= 0 || gamma > 1 || gae_lambda < 0 || gae_lambda > 1)
      throw ConfigError("ppo: gamma/lambda out of range");
    if (clip_ratio <= 0) throw ConfigError("ppo: clip ratio must be positive");
    if (workers < 1 || rollout_steps < 1)
      throw ConfigError("ppo: workers and rollout steps must be positive");
  }
};

// Flat batch, env-major: index = env * rollout_steps + t.
struct RolloutBatch {
  MatrixXd obs;        // obs_dim x N
  MatrixXd actions;    // A x N (pre-clip samples)
  VectorXd logprob;    // N
  VectorXd reward;
  VectorXd value;
  VectorXd terminal;   // 1 where the episode truly ended (safety stop)
  VectorXd truncated;  // 1 where cut by timeout or batch boundary
  VectorXd bootstrap;  // value of the next state where truncated
  int steps_per_env = 0;
  int n_envs = 0;
  // episode statistics accumulated during collection
  std::vector<double> episode_returns;
  std::vector<int> episode_lengths;
  int terminations = 0;
};

// Per-environment stream state used across collect calls.
struct EnvStream {
  Environment env;
  std::array<double, 3> prev_action{};
  double episode_return = 0;
  int episode_ticks = 0;
  uint64_t next_episode = 0;
  uint64_t seed_stream = 0;

  explicit EnvStream(Environment e) : env(std::move(e)) {}

  void start_episode() {
    env.reset(derive_seed(seed_stream, next_episode++));
    prev_action = {0, 0, 0};
    episode_return = 0;
    episode_ticks = 0;
  }
};

inline RolloutBatch collect_rollouts(const GaussianPolicy& policy,
                                     const Mlp& value_net,
                                     std::vector<EnvStream>& streams,
                                     const PolicyConfig& pcfg,
                                     const RewardConfig& rcfg,
                                     const CurriculumScales& cur, int steps,
                                     Rng& rng) {
  const int n_envs = static_cast<int>(streams.size());
  const int N = n_envs * steps;
  RolloutBatch b;
  b.steps_per_env = steps;
  b.n_envs = n_envs;
  b.obs.resize(pcfg.obs_dim(), N);
  b.actions.resize(pcfg.action_dim(), N);
  b.logprob.resize(N);
  b.reward.resize(N);
  b.value.resize(N);
  b.terminal = VectorXd::Zero(N);
  b.truncated = VectorXd::Zero(N);
  b.bootstrap = VectorXd::Zero(N);

  MatrixXd obs_now(pcfg.obs_dim(), n_envs);
  for (int e = 0; e < n_envs; ++e)
    obs_now.col(e) = build_observation(streams[e].env, pcfg,
                                       &streams[e].env.obs_rng());

  for (int t = 0; t < steps; ++t) {
    const MatrixXd mean = policy_mean(policy, obs_now);
    const MatrixXd value = forward_batch(value_net, obs_now);

    for (int e = 0; e < n_envs; ++e) {
      EnvStream& s = streams[e];
      const int idx = e * steps + t;
      b.obs.col(idx) = obs_now.col(e);

      VectorXd action(pcfg.action_dim());
      for (int i = 0; i < pcfg.action_dim(); ++i)
        action(i) = mean(i, e) + std::exp(policy.log_std(i)) * rng.normal(0, 1);
      b.actions.col(idx) = action;
      b.logprob(idx) = gaussian_logprob(action, mean.col(e), policy.log_std);
      b.value(idx) = value(0, e);

      const std::array<double, 3> env_action =
          to_env_action(action, pcfg.slew_only);
      const StepInfo info = s.env.step(env_action);
      const RewardInputs in =
          reward_inputs(info, pcfg.slew_only, s.env.initial_slew());
      double reward =
          compute_reward(in, info.applied_action, s.prev_action, rcfg, cur)
              .total();
      s.prev_action = info.applied_action;
      s.episode_return += reward;
      s.episode_ticks += 1;

      if (info.status == Termination::too_low ||
          info.status == Termination::too_close) {
        reward -= rcfg.termination_penalty;
        s.episode_return -= rcfg.termination_penalty;
        b.terminal(idx) = 1;
        b.episode_returns.push_back(s.episode_return);
        b.episode_lengths.push_back(s.episode_ticks);
        b.terminations += 1;
        s.start_episode();
      } else if (info.status == Termination::timeout) {
        b.truncated(idx) = 1;
        const VectorXd final_obs =
            build_observation(s.env, pcfg, &s.env.obs_rng());
        b.bootstrap(idx) = forward_batch(value_net, final_obs)(0, 0);
        b.episode_returns.push_back(s.episode_return);
        b.episode_lengths.push_back(s.episode_ticks);
        s.start_episode();
      }
      b.reward(idx) = reward;
      obs_now.col(e) = build_observation(s.env, pcfg, &s.env.obs_rng());
    }
  }

  // Episodes cut by the batch boundary bootstrap from the current value.
  const MatrixXd tail_value = forward_batch(value_net, obs_now);
  for (int e = 0; e < n_envs; ++e) {
    const int idx = e * steps + (steps - 1);
    if (b.terminal(idx) == 0 && b.truncated(idx) == 0) {
      b.truncated(idx) = 1;
      b.bootstrap(idx) = tail_value(0, e);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Advantage estimation

struct GaeResult {
  VectorXd advantages;  // normalized over the batch
  VectorXd returns;
  VectorXd raw_advantages;
};

inline GaeResult gae_returns(const RolloutBatch& b, double gamma,
                             double lambda) {
  const int N = static_cast<int>(b.reward.size());
  GaeResult g;
  g.raw_advantages.resize(N);
  g.returns.resize(N);
  for (int e = 0; e < b.n_envs; ++e) {
    double adv_next = 0;
    double value_next = 0;
    bool boundary = true;  // beyond the last step of this env
    for (int t = b.steps_per_env - 1; t >= 0; --t) {
      const int idx = e * b.steps_per_env + t;
      if (b.terminal(idx) > 0) {
        value_next = 0;
        adv_next = 0;
      } else if (b.truncated(idx) > 0) {
        value_next = b.bootstrap(idx);
        adv_next = 0;
      } else if (boundary) {
        value_next = 0;  // defensive; the collector marks the tail truncated
        adv_next = 0;
      }
      const double delta =
          b.reward(idx) + gamma * value_next - b.value(idx);
      const double adv = delta + gamma * lambda * adv_next;
      g.raw_advantages(idx) = adv;
      g.returns(idx) = adv + b.value(idx);
      adv_next = adv;
      value_next = b.value(idx);
      boundary = false;
    }
  }
  const double mean = g.raw_advantages.mean();
  const double std = std::sqrt(
      (g.raw_advantages.array() - mean).square().sum() /
      std::max(1, N - 1));
  g.advantages = (g.raw_advantages.array() - mean) / (std + 1e-8);
  return g;
}

// ---------------------------------------------------------------------------
// PPO update

struct PpoDiagnostics {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
};

struct PpoOptimizers {
  AdamState policy;
  AdamState value;
  VectorXd log_std_m, log_std_v;
  long log_std_step = 0;
};

inline PpoOptimizers make_ppo_optimizers(const GaussianPolicy& p,
                                         const Mlp& value_net,
                                         const PpoConfig& cfg) {
  PpoOptimizers o;
  o.policy = make_adam(p.mean_net, cfg.lr_policy);
  o.value = make_adam(value_net, cfg.lr_value);
  o.log_std_m = VectorXd::Zero(p.log_std.size());
  o.log_std_v = VectorXd::Zero(p.log_std.size());
  return o;
}

inline PpoDiagnostics ppo_update(GaussianPolicy& policy, Mlp& value_net,
                                 const RolloutBatch& batch, const GaeResult& gae,
                                 const PpoConfig& cfg, PpoOptimizers& opt,
                                 Rng& rng) {
  cfg.validate();
  const int N = static_cast<int>(batch.reward.size());
  if (N == 0) throw std::invalid_argument("ppo_update: empty batch");
  const int A = policy.action_dim();

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);

  PpoDiagnostics diag;
  int stat_batches = 0;

  const int mb = std::min(cfg.minibatch, N);
  MatrixXd mb_obs(batch.obs.rows(), mb);
  MatrixXd mb_act(A, mb);
  VectorXd mb_oldlp(mb), mb_adv(mb), mb_ret(mb);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int start = 0; start + mb <= N; start += mb) {
      for (int j = 0; j < mb; ++j) {
        const int idx = order[start + j];
        mb_obs.col(j) = batch.obs.col(idx);
        mb_act.col(j) = batch.actions.col(idx);
        mb_oldlp(j) = batch.logprob(idx);
        mb_adv(j) = gae.advantages(idx);
        mb_ret(j) = gae.returns(idx);
      }

      // --- policy ---
      ForwardCache cache;
      const MatrixXd raw = forward_batch(policy.mean_net, mb_obs, &cache);
      const MatrixXd mean = raw.array().tanh().matrix();
      const VectorXd sigma = policy.log_std.array().exp().matrix();

      VectorXd newlp(mb);
      for (int j = 0; j < mb; ++j)
        newlp(j) = gaussian_logprob(mb_act.col(j), mean.col(j), policy.log_std);
      const VectorXd logratio = newlp - mb_oldlp;
      const VectorXd ratio = logratio.array().exp().matrix();

      double pg_loss = 0, kl = 0;
      int clipped = 0;
      MatrixXd dmean = MatrixXd::Zero(A, mb);
      VectorXd dlogstd = VectorXd::Zero(A);
      for (int j = 0; j < mb; ++j) {
        const double adv = mb_adv(j);
        const double r = ratio(j);
        const double unclipped = r * adv;
        const double rc = std::clamp(r, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        const double clipped_obj = rc * adv;
        pg_loss += -std::min(unclipped, clipped_obj);
        kl += (r - 1.0) - logratio(j);
        if (clipped_obj < unclipped) ++clipped;
        // Gradient flows only through the active unclipped branch.
        if (unclipped <= clipped_obj) {
          const double w = -adv * r / mb;  // d(-min)/dlogp
          for (int i = 0; i < A; ++i) {
            const double z = (mb_act(i, j) - mean(i, j)) / (sigma(i) * sigma(i));
            dmean(i, j) += w * z;  // dlogp/dmean
            const double zz = (mb_act(i, j) - mean(i, j)) / sigma(i);
            dlogstd(i) += w * (zz * zz - 1.0);
          }
        }
      }
      pg_loss /= mb;
      kl /= mb;

      // Entropy bonus touches only log_std.
      double entropy = 0.5 * A * std::log(2.0 * kPi * std::exp(1.0));
      entropy += policy.log_std.sum();
      dlogstd.array() -= cfg.entropy_coef;  // d(-coef * entropy)/dlogstd

      // Backprop to the raw (pre-tanh) mean output.
      const MatrixXd draw_out =
          (dmean.array() * (1.0 - mean.array().square())).matrix();
      Gradients pg = backward(policy.mean_net, cache, draw_out);
      clip_gradients(pg, cfg.max_grad_norm);
      adam_step(policy.mean_net, pg, opt.policy);

      // Adam on log_std.
      opt.log_std_step += 1;
      const double c1 = 1.0 - std::pow(0.9, (double)opt.log_std_step);
      const double c2 = 1.0 - std::pow(0.999, (double)opt.log_std_step);
      opt.log_std_m = 0.9 * opt.log_std_m + 0.1 * dlogstd;
      opt.log_std_v =
          0.999 * opt.log_std_v + 0.001 * dlogstd.cwiseProduct(dlogstd);
      policy.log_std.array() -=
          cfg.lr_policy * (opt.log_std_m.array() / c1) /
          ((opt.log_std_v.array() / c2).sqrt() + 1e-8);
      policy.log_std = policy.log_std.cwiseMax(std::log(0.02))
                           .cwiseMin(std::log(1.5));

      // --- value ---
      auto [v_loss, vg] =
          gradient_mse(value_net, mb_obs, mb_ret.transpose());
      if (cfg.value_coef != 1.0) {
        for (auto& w : vg.weights) w *= cfg.value_coef;
        for (auto& bb : vg.biases) bb *= cfg.value_coef;
      }
      clip_gradients(vg, cfg.max_grad_norm);
      adam_step(value_net, vg, opt.value);

      if (!std::isfinite(pg_loss) || !std::isfinite(v_loss))
        throw std::runtime_error("ppo_update: non-finite loss");

      diag.policy_loss += pg_loss;
      diag.value_loss += v_loss;
      diag.entropy = entropy;
      diag.approx_kl += kl;
      diag.clip_fraction += static_cast<double>(clipped) / mb;
      ++stat_batches;
    }
  }
  if (stat_batches > 0) {
    diag.policy_loss /= stat_batches;
    diag.value_loss /= stat_batches;
    diag.approx_kl /= stat_batches;
    diag.clip_fraction /= stat_batches;
  }
  return diag;
}

// ---------------------------------------------------------------------------
// Policy checkpoints

struct PolicyCheckpoint {
  GaussianPolicy policy;
  Mlp value_net;
  PolicyConfig config;
  long trained_ticks = 0;
};

inline void save_policy(const PolicyCheckpoint& ckpt,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["format"] = "mhc-policy-v1";
  meta["obs_layout"] = kObsLayoutVersion;
  meta["slew_only"] = ckpt.config.slew_only;
  meta["history"] = ckpt.config.history;
  meta["hidden"] = ckpt.config.hidden;
  meta["trained_ticks"] = ckpt.trained_ticks;
  meta["log_std"] = std::vector<double>(
      ckpt.policy.log_std.data(),
      ckpt.policy.log_std.data() + ckpt.policy.log_std.size());
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  save_checkpoint(ckpt.policy.mean_net, dir / "policy.nn");
  save_checkpoint(ckpt.value_net, dir / "value.nn");
}

inline PolicyCheckpoint load_policy(const std::filesystem::path& dir) {
  const auto meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
  if (meta.at("format") != "mhc-policy-v1")
    throw IoError("unexpected policy format in " + dir.string());
  if (meta.at("obs_layout") != kObsLayoutVersion)
    throw IoError("observation layout version mismatch in " + dir.string());
  PolicyCheckpoint ckpt;
  ckpt.config.slew_only = meta.at("slew_only").get<bool>();
  ckpt.config.history = meta.at("history").get<int>();
  ckpt.config.hidden = meta.at("hidden").get<std::vector<int>>();
  ckpt.trained_ticks = meta.at("trained_ticks").get<long>();
  ckpt.policy.mean_net = load_checkpoint(dir / "policy.nn");
  ckpt.value_net = load_checkpoint(dir / "value.nn");
  const auto ls = meta.at("log_std").get<std::vector<double>>();
  ckpt.policy.log_std =
      Eigen::Map<const VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  if (ckpt.policy.mean_net.input_dim() != ckpt.config.obs_dim())
    throw IoError("policy checkpoint dims inconsistent with its config");
  return ckpt;
}

// Deterministic action for evaluation (std collapsed to zero).
inline std::array<double, 3> act_deterministic(const GaussianPolicy& policy,
                                               const VectorXd& obs,
                                               bool slew_only) {
  const VectorXd mean = policy_mean(policy, obs);
  return to_env_action(mean, slew_only);
}

// ---------------------------------------------------------------------------
// Training driver

struct TrainPolicyConfig {
  PolicyConfig policy;
  RewardConfig reward;
  CurriculumSchedule curriculum;
  PpoConfig ppo;
  Environment::Config env;
  int snapshot_every = 25;   // iterations between evaluation snapshots
  int snapshot_episodes = 4;
};

struct TrainCurvePoint {
  int iteration = 0;
  long ticks = 0;
  double mean_return = 0;
  double mean_length = 0;
  double policy_loss = 0, value_loss = 0, approx_kl = 0, clip_fraction = 0;
  double entropy = 0;
  double cur_balance = 0, cur_one_shot = 0, cur_sharpness = 0;
  int terminations = 0;
};

struct EvalSnapshot {
  int iteration = 0;
  long ticks = 0;
  double mean_abs_slew_error_deg = 0;  // at episode end
  double mean_task_error_m = 0;        // full mode, at episode end
  double mean_tool_rate_deg_s = 0;
  double mean_return = 0;
};

struct TrainPolicyResult {
  PolicyCheckpoint checkpoint;
  std::vector<TrainCurvePoint> curve;
  std::vector<EvalSnapshot> snapshots;
  bool diverged = false;
};

// Deterministic evaluation episodes on fresh environments.
inline EvalSnapshot evaluate_policy_snapshot(const GaussianPolicy& policy,
                                             const PolicyConfig& pcfg,
                                             const RewardConfig& rcfg,
                                             Environment env, int episodes,
                                             uint64_t seed) {
  EvalSnapshot snap;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(seed, ep));
    std::array<double, 3> prev{};
    double tool_rate_sum = 0;
    StepInfo info;
    for (int k = 0; k < kTicksPerEpisode; ++k) {
      const VectorXd obs = build_observation(env, pcfg, nullptr);
      info = env.step(act_deterministic(policy, obs, pcfg.slew_only));
      const RewardInputs in =
          reward_inputs(info, pcfg.slew_only, env.initial_slew());
      snap.mean_return +=
          compute_reward(in, info.applied_action, prev, rcfg, {}).total();
      prev = info.applied_action;
      tool_rate_sum +=
          std::abs(info.tool_rate_x) + std::abs(info.tool_rate_y);
      if (info.status != Termination::running &&
          info.status != Termination::timeout)
        break;
    }
    snap.mean_abs_slew_error_deg += rad2deg(std::abs(info.slew_angle));
    const double task_err = std::sqrt(
        info.target_error[0] * info.target_error[0] +
        info.target_error[1] * info.target_error[1] +
        info.target_error[2] * info.target_error[2]);
    snap.mean_task_error_m += task_err;
    snap.mean_tool_rate_deg_s += rad2deg(tool_rate_sum / kTicksPerEpisode);
  }
  snap.mean_abs_slew_error_deg /= episodes;
  snap.mean_task_error_m /= episodes;
  snap.mean_tool_rate_deg_s /= episodes;
  snap.mean_return /= episodes;
  return snap;
}

// Full PPO training run against the learned actuator model.
inline TrainPolicyResult train_policy(const TrainPolicyConfig& cfg,
                                      const SlewModel& model, uint64_t seed) {
  cfg.ppo.validate();
  PolicyConfig pcfg = cfg.policy;
  Environment::Config env_cfg = cfg.env;
  env_cfg.slew_only = pcfg.slew_only;
  env_cfg.history = pcfg.history;

  TrainPolicyResult result;
  GaussianPolicy policy = make_policy(pcfg, derive_seed(seed, 1));
  Mlp value_net = make_value_net(pcfg, derive_seed(seed, 2));
  PpoOptimizers opt = make_ppo_optimizers(policy, value_net, cfg.ppo);
  Rng rng(derive_seed(seed, 3));

  std::vector<EnvStream> streams;
  streams.reserve(cfg.ppo.workers);
  for (int e = 0; e < cfg.ppo.workers; ++e) {
    streams.emplace_back(Environment(env_cfg, &model));
    streams.back().seed_stream = derive_seed(seed, 1000 + e);
    streams.back().start_episode();
  }

  const long batch_ticks =
      static_cast<long>(cfg.ppo.workers) * cfg.ppo.rollout_steps;
  const int iterations = static_cast<int>(
      (cfg.ppo.total_ticks + batch_ticks - 1) / batch_ticks);

  GaussianPolicy last_good_policy = policy;
  Mlp last_good_value = value_net;
  long ticks = 0;

  for (int iter = 0; iter < iterations; ++iter) {
    const double progress =
        static_cast<double>(ticks) / std::max<long>(1, cfg.ppo.total_ticks);
    const CurriculumScales cur = curriculum_scale(progress, cfg.curriculum);

    const RolloutBatch batch =
        collect_rollouts(policy, value_net, streams, pcfg, cfg.reward, cur,
                         cfg.ppo.rollout_steps, rng);
    const GaeResult gae =
        gae_returns(batch, cfg.ppo.gamma, cfg.ppo.gae_lambda);

    PpoDiagnostics diag;
    try {
      diag = ppo_update(policy, value_net, batch, gae, cfg.ppo, opt, rng);
    } catch (const std::runtime_error&) {
      policy = last_good_policy;
      value_net = last_good_value;
      result.diverged = true;
      break;
    }
    last_good_policy = policy;
    last_good_value = value_net;
    ticks += batch_ticks;

    TrainCurvePoint pt;
    pt.iteration = iter;
    pt.ticks = ticks;
    if (!batch.episode_returns.empty()) {
      pt.mean_return =
          std::accumulate(batch.episode_returns.begin(),
                          batch.episode_returns.end(), 0.0) /
          batch.episode_returns.size();
      pt.mean_length = std::accumulate(batch.episode_lengths.begin(),
                                       batch.episode_lengths.end(), 0.0) /
                       batch.episode_lengths.size();
    }
    pt.policy_loss = diag.policy_loss;
    pt.value_loss = diag.value_loss;
    pt.approx_kl = diag.approx_kl;
    pt.clip_fraction = diag.clip_fraction;
    pt.entropy = diag.entropy;
    pt.cur_balance = cur.balance;
    pt.cur_one_shot = cur.one_shot;
    pt.cur_sharpness = cur.sharpness;
    pt.terminations = batch.terminations;
    result.curve.push_back(pt);

    if (cfg.snapshot_every > 0 &&
        (iter % cfg.snapshot_every == cfg.snapshot_every - 1 ||
         iter == iterations - 1)) {
      EvalSnapshot snap = evaluate_policy_snapshot(
          policy, pcfg, cfg.reward, Environment(env_cfg, &model),
          cfg.snapshot_episodes, derive_seed(seed, 777000 + iter));
      snap.iteration = iter;
      snap.ticks = ticks;
      result.snapshots.push_back(snap);
    }
  }

  result.checkpoint.policy = policy;
  result.checkpoint.value_net = value_net;
  result.checkpoint.config = pcfg;
  result.checkpoint.trained_ticks = ticks;
  return result;
}

inline void write_curve_csv(const std::filesystem::path& path,
                            const std::vector<TrainCurvePoint>& curve) {
  CsvWriter w(path,
              "iteration,ticks,mean_return,mean_length,policy_loss,value_loss,"
              "approx_kl,clip_fraction,entropy,cur_balance,cur_one_shot,"
              "cur_sharpness,terminations");
  for (const auto& p : curve)
    w.row({static_cast<double>(p.iteration), static_cast<double>(p.ticks),
           p.mean_return, p.mean_length, p.policy_loss, p.value_loss,
           p.approx_kl, p.clip_fraction, p.entropy, p.cur_balance,
           p.cur_one_shot, p.cur_sharpness,
           static_cast<double>(p.terminations)});
}

inline void write_snapshot_csv(const std::filesystem::path& path,
                               const std::vector<EvalSnapshot>& snaps) {
  CsvWriter w(path,
              "iteration,ticks,mean_abs_slew_error_deg,mean_task_error_m,"
              "mean_tool_rate_deg_s,mean_return");
  for (const auto& s : snaps)
    w.row({static_cast<double>(s.iteration), static_cast<double>(s.ticks),
           s.mean_abs_slew_error_deg, s.mean_task_error_m,
           s.mean_tool_rate_deg_s, s.mean_return});
}

}  // namespace mhc
