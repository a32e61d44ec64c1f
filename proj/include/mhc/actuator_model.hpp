// Dual-MLP slew actuator model: one network predicts next-step chamber
// pressures, a second predicts the next-step angular velocity consuming the
// pressure prediction. Covers training (teacher-forced single-step loss),
// open-loop rollout, the feature-ablation variants, and checkpointing.
#pragma once

#include <array>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "mhc/common.hpp"
#include "mhc/dataset.hpp"
#include "mhc/nn.hpp"

namespace mhc {

enum class FeatureConfig { proposed, no_pressure, no_inertia };

inline const char* to_string(FeatureConfig c) {
  switch (c) {
    case FeatureConfig::proposed: return "proposed";
    case FeatureConfig::no_pressure: return "no_pressure";
    case FeatureConfig::no_inertia: return "no_inertia";
  }
  return "?";
}

inline FeatureConfig feature_config_from_string(const std::string& s) {
  if (s == "proposed") return FeatureConfig::proposed;
  if (s == "no_pressure") return FeatureConfig::no_pressure;
  if (s == "no_inertia") return FeatureConfig::no_inertia;
  throw ConfigError("unknown feature config: " + s);
}

// Hidden layer widths are fixed; the input width depends on the ablation.
inline std::vector<int> pressure_net_dims(FeatureConfig c) {
  const int in = c == FeatureConfig::no_inertia ? 40 : 41;
  return {in, 128, 128, 128, 128, 32, 2};
}
inline std::vector<int> velocity_net_dims(FeatureConfig c) {
  switch (c) {
    case FeatureConfig::proposed: return {41, 128, 128, 128, 32, 1};
    case FeatureConfig::no_pressure: return {21, 128, 128, 128, 32, 1};
    case FeatureConfig::no_inertia: return {40, 128, 128, 128, 32, 1};
  }
  return {};
}

struct SlewModel {
  FeatureConfig feature_config = FeatureConfig::proposed;
  std::optional<Mlp> pressure_net;  // absent for no_pressure
  Mlp velocity_net;

  bool uses_pressure() const {
    return feature_config != FeatureConfig::no_pressure;
  }
};

inline void validate_model_dims(const SlewModel& m) {
  if (m.uses_pressure()) {
    if (!m.pressure_net ||
        m.pressure_net->dims != pressure_net_dims(m.feature_config))
      throw ConfigError("slew model: pressure net dims do not match config");
  } else if (m.pressure_net) {
    throw ConfigError("slew model: no_pressure config cannot carry a pressure net");
  }
  if (m.velocity_net.dims != velocity_net_dims(m.feature_config))
    throw ConfigError("slew model: velocity net dims do not match config");
}

inline SlewModel make_slew_model(FeatureConfig c, uint64_t seed) {
  SlewModel m;
  m.feature_config = c;
  if (c != FeatureConfig::no_pressure)
    m.pressure_net =
        make_mlp(pressure_net_dims(c), Activation::relu, derive_seed(seed, 1));
  m.velocity_net =
      make_mlp(velocity_net_dims(c), Activation::relu, derive_seed(seed, 2));
  return m;
}

// Rolling feature histories. All buffers start at zero; newest entry last.
struct SlewBuffers {
  std::array<double, 10> u{};      // u(k-9..k) after the current push
  std::array<double, 11> p_l{};    // p_l(k-10..k)
  std::array<double, 11> p_r{};
  std::array<double, 10> omega{};  // w(k-10..k-1)
  double inertia = 0;              // I_z(k-1)
  double angle = 0;                // rad, trapezoidal integral of omega
};

namespace detail {
template <size_t N>
inline void push(std::array<double, N>& buf, double v) {
  for (size_t i = 0; i + 1 < N; ++i) buf[i] = buf[i + 1];
  buf[N - 1] = v;
}
}  // namespace detail

struct SlewPrediction {
  double p_l = 0;
  double p_r = 0;
  double omega = 0;
};

// Feature assembly. Offsets mirror the windowing layout in dataset.hpp; the
// ablated configs drop the corresponding blocks.
inline VectorXd assemble_pressure_features(const SlewBuffers& b,
                                           FeatureConfig c) {
  const bool inertia = c != FeatureConfig::no_inertia;
  VectorXd x(inertia ? 41 : 40);
  for (int i = 0; i < 10; ++i) {
    x(i) = b.u[i];
    x(10 + i) = b.p_l[i + 1];  // p(k-10..k-1): newest 10 of the 11 slots
    x(20 + i) = b.p_r[i + 1];
    x(30 + i) = b.omega[i];
  }
  if (inertia) x(40) = b.inertia;
  return x;
}

inline VectorXd assemble_velocity_features(const SlewBuffers& b,
                                           FeatureConfig c) {
  if (c == FeatureConfig::no_pressure) {
    VectorXd x(21);
    for (int i = 0; i < 10; ++i) {
      x(i) = b.u[i];
      x(10 + i) = b.omega[i];
    }
    x(20) = b.inertia;
    return x;
  }
  const bool inertia = c != FeatureConfig::no_inertia;
  VectorXd x(inertia ? 41 : 40);
  for (int i = 0; i < 10; ++i) {
    x(i) = b.u[i];
    x(10 + i) = b.p_l[i + 1];  // p(k-9..k), pressure prediction included
    x(20 + i) = b.p_r[i + 1];
    x(30 + i) = b.omega[i];
  }
  if (inertia) x(40) = b.inertia;
  return x;
}

// One 0.1 s prediction step. The pressure net runs first; its outputs enter
// the pressure histories the velocity net reads. The integrated angle
// advances by the trapezoid of the old and new velocity.
inline SlewPrediction predict_step(const SlewModel& model, SlewBuffers& b,
                                   double u_k, double inertia_z) {
  if (!std::isfinite(u_k) || !std::isfinite(inertia_z))
    throw std::invalid_argument("predict_step: non-finite input");
  detail::push(b.u, u_k);
  b.inertia = inertia_z;

  SlewPrediction out;
  if (model.uses_pressure()) {
    const VectorXd xp = assemble_pressure_features(b, model.feature_config);
    const VectorXd p = forward(*model.pressure_net, xp);
    out.p_l = p(0);
    out.p_r = p(1);
  }
  detail::push(b.p_l, out.p_l);
  detail::push(b.p_r, out.p_r);

  const VectorXd xv = assemble_velocity_features(b, model.feature_config);
  out.omega = forward(model.velocity_net, xv)(0);

  const double prev_omega = b.omega.back();
  detail::push(b.omega, out.omega);
  b.angle += kTickDt * 0.5 * (prev_omega + out.omega);
  return out;
}

struct RolloutSeries {
  std::vector<double> omega, p_l, p_r, angle;
};

// Iterated prediction with the model's own outputs fed back.
inline RolloutSeries rollout_open_loop(const SlewModel& model,
                                       const std::vector<double>& commands,
                                       const std::vector<double>& inertia,
                                       int horizon, SlewBuffers buffers = {}) {
  if (horizon > static_cast<int>(commands.size()) ||
      horizon > static_cast<int>(inertia.size()))
    throw std::invalid_argument("rollout: horizon exceeds input length");
  RolloutSeries s;
  for (int k = 0; k < horizon; ++k) {
    const SlewPrediction p = predict_step(model, buffers, commands[k], inertia[k]);
    s.omega.push_back(p.omega);
    s.p_l.push_back(p.p_l);
    s.p_r.push_back(p.p_r);
    s.angle.push_back(buffers.angle);
  }
  return s;
}

// Warm-start buffers from measured history so an open-loop window starts
// from the true state. anchor indexes the first predicted sample; requires
// anchor >= 11.
inline SlewBuffers warm_start_buffers(const Run& run, int anchor) {
  if (anchor < 11) throw std::invalid_argument("warm start needs 11 samples");
  SlewBuffers b;
  const auto& s = run.samples;
  for (int i = 0; i < 10; ++i) {
    b.u[i] = s[anchor - 10 + i].u;
    b.omega[i] = s[anchor - 10 + i].omega;
  }
  for (int i = 0; i < 11; ++i) {
    b.p_l[i] = s[anchor - 11 + i].p_l;
    b.p_r[i] = s[anchor - 11 + i].p_r;
  }
  b.inertia = s[anchor - 1].inertia_z;
  b.angle = 0.0;  // position error is tracked relative to the window start
  return b;
}

// ---------------------------------------------------------------------------
// Training

struct ActuatorTrainConfig {
  double lr = 1e-3;
  int batch_size = 256;
  int max_epochs = 30;
  int patience = 5;  // early stopping on validation loss
};

struct TrainingCurve {
  // epoch, train loss, val loss per row (losses in standardized units)
  std::vector<std::array<double, 3>> rows;
};

namespace detail {

struct SupervisedSet {
  MatrixXd x, t;
};

// Stack windowed features for one net; mirroring augmentation already
// applied by the caller at run level.
inline void fill_supervised(const std::vector<WindowedPair>& pairs,
                            FeatureConfig c, bool pressure_net,
                            SupervisedSet& set) {
  const int n = static_cast<int>(pairs.size());
  int in_dim;
  if (pressure_net)
    in_dim = c == FeatureConfig::no_inertia ? 40 : 41;
  else
    in_dim = c == FeatureConfig::no_pressure ? 21
             : c == FeatureConfig::no_inertia ? 40
                                              : 41;
  set.x.resize(in_dim, n);
  set.t.resize(pressure_net ? 2 : 1, n);
  for (int k = 0; k < n; ++k) {
    const auto& w = pairs[k];
    if (pressure_net) {
      for (int i = 0; i < 40; ++i) set.x(i, k) = w.pressure_features[i];
      if (c != FeatureConfig::no_inertia) set.x(40, k) = w.pressure_features[40];
      set.t(0, k) = w.pressure_target[0];
      set.t(1, k) = w.pressure_target[1];
    } else {
      if (c == FeatureConfig::no_pressure) {
        for (int i = 0; i < 10; ++i) {
          set.x(i, k) = w.velocity_features[i];
          set.x(10 + i, k) = w.velocity_features[30 + i];
        }
        set.x(20, k) = w.velocity_features[40];
      } else {
        for (int i = 0; i < 40; ++i) set.x(i, k) = w.velocity_features[i];
        if (c != FeatureConfig::no_inertia)
          set.x(40, k) = w.velocity_features[40];
      }
      set.t(0, k) = w.velocity_target;
    }
  }
}

inline void fit_standardization(Mlp& net, const MatrixXd& x, const MatrixXd& t) {
  auto stats = [](const MatrixXd& m, VectorXd& mean, VectorXd& std) {
    mean = m.rowwise().mean();
    std = ((m.colwise() - mean).array().square().rowwise().sum() /
           std::max<double>(1.0, static_cast<double>(m.cols() - 1)))
              .sqrt();
    for (Eigen::Index i = 0; i < std.size(); ++i)
      if (std(i) < 1e-12) std(i) = 1.0;  // constant channels pass through
  };
  stats(x, net.in_mean, net.in_std);
  stats(t, net.out_mean, net.out_std);
}

// Minibatch Adam with early stopping; returns per-epoch train/val losses.
inline TrainingCurve fit_supervised(Mlp& net, const SupervisedSet& train,
                                    const SupervisedSet& val,
                                    const ActuatorTrainConfig& cfg,
                                    uint64_t seed) {
  fit_standardization(net, train.x, train.t);
  AdamState opt = make_adam(net, cfg.lr);
  Rng rng(seed);
  const int n = static_cast<int>(train.x.cols());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainingCurve curve;
  Mlp best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0;
    int batches = 0;
    MatrixXd bx(train.x.rows(), cfg.batch_size);
    MatrixXd bt(train.t.rows(), cfg.batch_size);
    for (int start = 0; start + cfg.batch_size <= n; start += cfg.batch_size) {
      for (int j = 0; j < cfg.batch_size; ++j) {
        bx.col(j) = train.x.col(order[start + j]);
        bt.col(j) = train.t.col(order[start + j]);
      }
      auto [loss, g] = gradient_mse(net, bx, bt);
      adam_step(net, g, opt);
      loss_sum += loss;
      ++batches;
    }
    const double train_loss = batches ? loss_sum / batches : 0.0;
    const double val_loss =
        val.x.cols() > 0 ? mse_loss(net, val.x, val.t) : train_loss;
    curve.rows.push_back({static_cast<double>(epoch), train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  net = best;
  return curve;
}

}  // namespace detail

struct ActuatorTrainResult {
  SlewModel model;
  TrainingCurve pressure_curve;
  TrainingCurve velocity_curve;
};

// Train both nets on windowed, mirrored runs. Teacher forcing: the velocity
// net sees measured pressures during training; predicted pressures appear
// only at rollout time.
inline ActuatorTrainResult train_actuator(const std::vector<Run>& train_runs,
                                          const std::vector<Run>& val_runs,
                                          FeatureConfig config,
                                          const ActuatorTrainConfig& cfg,
                                          uint64_t seed) {
  auto windows_of = [](const std::vector<Run>& runs) {
    std::vector<WindowedPair> all;
    for (const auto& r : runs) {
      for (auto& w : window(r)) all.push_back(w);
      for (auto& w : window(mirror(r))) all.push_back(w);
    }
    return all;
  };
  const auto train_pairs = windows_of(train_runs);
  const auto val_pairs = windows_of(val_runs);
  if (train_pairs.empty()) throw ConfigError("train_actuator: empty dataset");

  ActuatorTrainResult result;
  result.model = make_slew_model(config, seed);

  detail::SupervisedSet vx_train, vx_val;
  detail::fill_supervised(train_pairs, config, false, vx_train);
  detail::fill_supervised(val_pairs, config, false, vx_val);
  if (result.model.uses_pressure()) {
    detail::SupervisedSet px_train, px_val;
    detail::fill_supervised(train_pairs, config, true, px_train);
    detail::fill_supervised(val_pairs, config, true, px_val);
    result.pressure_curve =
        detail::fit_supervised(*result.model.pressure_net, px_train, px_val,
                               cfg, derive_seed(seed, 11));
  }
  result.velocity_curve = detail::fit_supervised(
      result.model.velocity_net, vx_train, vx_val, cfg, derive_seed(seed, 12));
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct ActuatorMae {
  double velocity = 0;  // rad/s
  double position = 0;  // rad
  int windows = 0;
  int skipped_runs = 0;
};

// Mean absolute error over non-overlapping open-loop windows, buffers
// warm-started from measured history.
inline ActuatorMae evaluate_mae(const SlewModel& model,
                                const std::vector<Run>& test_runs,
                                double window_s = 10.0) {
  const int steps = static_cast<int>(std::lround(window_s / kTickDt));
  ActuatorMae mae;
  double vel_sum = 0, pos_sum = 0;
  long count = 0;
  for (const auto& run : test_runs) {
    const int n = static_cast<int>(run.samples.size());
    if (n < kFirstWindowAnchor + steps) {
      ++mae.skipped_runs;
      continue;
    }
    for (int anchor = kFirstWindowAnchor; anchor + steps <= n;
         anchor += steps) {
      SlewBuffers buffers = warm_start_buffers(run, anchor);
      double true_angle = 0;
      double prev_true_omega = run.samples[anchor - 1].omega;
      for (int j = 0; j < steps; ++j) {
        const auto& s = run.samples[anchor + j];
        const SlewPrediction p = predict_step(
            model, buffers, s.u, run.samples[anchor + j - 1].inertia_z);
        true_angle += kTickDt * 0.5 * (prev_true_omega + s.omega);
        prev_true_omega = s.omega;
        vel_sum += std::abs(p.omega - s.omega);
        pos_sum += std::abs(buffers.angle - true_angle);
        ++count;
      }
      ++mae.windows;
    }
  }
  if (count > 0) {
    mae.velocity = vel_sum / count;
    mae.position = pos_sum / count;
  }
  return mae;
}

// ---------------------------------------------------------------------------
// Checkpoint directory: two nn checkpoints plus a manifest.

inline void save_slew_model(const SlewModel& model,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["format"] = "mhc-slew-model-v1";
  meta["feature_config"] = to_string(model.feature_config);
  meta["has_pressure_net"] = model.uses_pressure();
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  if (model.uses_pressure())
    save_checkpoint(*model.pressure_net, dir / "pressure.nn");
  save_checkpoint(model.velocity_net, dir / "velocity.nn");
}

inline SlewModel load_slew_model(const std::filesystem::path& dir) {
  const auto meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
  if (meta.at("format") != "mhc-slew-model-v1")
    throw IoError("unexpected slew model format in " + dir.string());
  SlewModel model;
  model.feature_config =
      feature_config_from_string(meta.at("feature_config").get<std::string>());
  if (model.uses_pressure())
    model.pressure_net = load_checkpoint(dir / "pressure.nn");
  model.velocity_net = load_checkpoint(dir / "velocity.nn");
  validate_model_dims(model);
  return model;
}

}  // namespace mhc
