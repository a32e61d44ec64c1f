#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "mhc/actuator_model.hpp"
#include "mhc/common.hpp"
#include "mhc/dataset.hpp"

using namespace mhc;
namespace fs = std::filesystem;

namespace {

// Small plant dataset shared across the training-dependent sections.
std::vector<Run> plant_runs(int count, double seconds, uint64_t seed) {
  PlantParams plant;
  MachineGeometry geom;
  std::vector<Run> runs;
  for (int i = 0; i < count; ++i) {
    ExcitationParams ep;
    ep.amplitude = 0.4 + 0.15 * (i % 4);
    ep.period_s = 6.0 + 2.0 * (i % 3);
    const ExcitationKind kind = static_cast<ExcitationKind>(i % 4);
    const auto commands =
        generate_excitation(kind, ep, seconds, derive_seed(seed, i));
    ArmScript arm;
    Rng rng(derive_seed(seed, 100 + i));
    arm.base.q[1] = rng.uniform(geom.boom_min, geom.boom_max);
    arm.base.q[2] = rng.uniform(geom.stick_min, geom.stick_max);
    arm.load_kg = rng.uniform(0, 2000);
    runs.push_back(collect(plant, commands, arm, geom, SourceTag::periodic,
                           derive_seed(seed, 200 + i)));
  }
  return runs;
}

// A one-layer velocity net that copies out a chosen feature.
Mlp picker_net(int in_dim, int index) {
  Mlp net = make_mlp({in_dim, 1}, Activation::relu, 0);
  net.weights[0].setZero();
  net.weights[0](0, index) = 1.0;
  net.biases[0].setZero();
  return net;
}

}  // namespace

TEST_CASE("model dims follow the design table") {
  CHECK(pressure_net_dims(FeatureConfig::proposed) ==
        std::vector<int>{41, 128, 128, 128, 128, 32, 2});
  CHECK(velocity_net_dims(FeatureConfig::proposed) ==
        std::vector<int>{41, 128, 128, 128, 32, 1});
  CHECK(velocity_net_dims(FeatureConfig::no_pressure).front() == 21);
  CHECK(pressure_net_dims(FeatureConfig::no_inertia).front() == 40);

  const SlewModel m = make_slew_model(FeatureConfig::proposed, 3);
  CHECK_NOTHROW(validate_model_dims(m));
  SlewModel bad = m;
  bad.velocity_net = make_mlp({41, 8, 1}, Activation::relu, 1);
  CHECK_THROWS_AS(validate_model_dims(bad), ConfigError);
}

TEST_CASE("buffers start at zero and shift correctly") {
  SlewBuffers b;
  for (double v : b.u) CHECK(v == 0.0);
  for (double v : b.p_l) CHECK(v == 0.0);
  for (double v : b.omega) CHECK(v == 0.0);
  CHECK(b.inertia == 0.0);
  detail::push(b.u, 1.0);
  detail::push(b.u, 2.0);
  CHECK(b.u[9] == 2.0);
  CHECK(b.u[8] == 1.0);
  CHECK(b.u[7] == 0.0);
}

TEST_CASE("predict_step wiring") {
  // Hand-built model: pressure net emits constants, velocity net picks a
  // single feature, so the data path is observable.
  SlewModel model;
  model.feature_config = FeatureConfig::proposed;
  Mlp pnet = make_mlp({41, 2}, Activation::relu, 0);
  pnet.weights[0].setZero();
  pnet.biases[0] << 3.0, 4.0;
  model.pressure_net = pnet;

  SECTION("velocity net consumes the current-step pressure prediction") {
    model.velocity_net = picker_net(41, 19);  // p_l(k)
    SlewBuffers b;
    const SlewPrediction out = predict_step(model, b, 0.5, 1e5);
    CHECK(out.p_l == 3.0);
    CHECK(out.p_r == 4.0);
    CHECK(out.omega == 3.0);

    model.velocity_net = picker_net(41, 29);  // p_r(k)
    SlewBuffers b2;
    CHECK(predict_step(model, b2, 0.5, 1e5).omega == 4.0);
  }

  SECTION("pressure net sees pressures only up to k-1") {
    // Pressure picker at the newest pressure slot (index 19 = p_l(k-1)).
    Mlp probe = make_mlp({41, 2}, Activation::relu, 0);
    probe.weights[0].setZero();
    probe.weights[0](0, 19) = 1.0;
    model.pressure_net = probe;
    model.velocity_net = picker_net(41, 40);
    SlewBuffers b;
    b.p_l.back() = 7.5;  // p_l(k-1)
    const SlewPrediction out = predict_step(model, b, 0.0, 1e5);
    CHECK(out.p_l == 7.5);
  }

  SECTION("current command and inertia reach their slots") {
    model.velocity_net = picker_net(41, 9);  // u(k)
    SlewBuffers b;
    CHECK(predict_step(model, b, -0.25, 1e5).omega == -0.25);
    model.velocity_net = picker_net(41, 40);  // I_z(k-1)
    SlewBuffers b2;
    CHECK(predict_step(model, b2, 0.0, 12345.0).omega == 12345.0);
  }

  SECTION("prediction is a pure function of buffers and inputs") {
    model.velocity_net = picker_net(41, 19);
    SlewBuffers a, b;
    const SlewPrediction pa = predict_step(model, a, 0.3, 2e5);
    const SlewPrediction pb = predict_step(model, b, 0.3, 2e5);
    CHECK(pa.omega == pb.omega);
    CHECK(pa.p_l == pb.p_l);
  }

  SECTION("non-finite inputs are rejected") {
    model.velocity_net = picker_net(41, 0);
    SlewBuffers b;
    CHECK_THROWS_AS(predict_step(model, b, std::nan(""), 1e5),
                    std::invalid_argument);
    CHECK_THROWS_AS(predict_step(model, b, 0.0, std::nan("")),
                    std::invalid_argument);
  }
}

TEST_CASE("angle integrates the velocity trapezoidally") {
  SlewModel model;
  model.feature_config = FeatureConfig::no_pressure;
  model.velocity_net = picker_net(21, 9);  // omega := u(k)
  SlewBuffers b;
  (void)predict_step(model, b, 0.1, 1e5);  // omega 0 -> 0.1
  CHECK(b.angle == Catch::Approx(kTickDt * 0.05));
  (void)predict_step(model, b, 0.3, 1e5);  // omega 0.1 -> 0.3
  CHECK(b.angle == Catch::Approx(kTickDt * (0.05 + 0.2)));
}

TEST_CASE("rollout") {
  SlewModel model;
  model.feature_config = FeatureConfig::no_pressure;
  model.velocity_net = picker_net(21, 9);

  SECTION("horizon zero gives empty series") {
    const RolloutSeries s = rollout_open_loop(model, {}, {}, 0);
    CHECK(s.omega.empty());
  }
  SECTION("horizon beyond inputs is rejected") {
    CHECK_THROWS_AS(rollout_open_loop(model, {0.1}, {1e5}, 2),
                    std::invalid_argument);
  }
  SECTION("series lengths match the horizon") {
    const std::vector<double> u(25, 0.2), iz(25, 1e5);
    const RolloutSeries s = rollout_open_loop(model, u, iz, 25);
    CHECK(s.omega.size() == 25);
    CHECK(s.angle.size() == 25);
  }
}

TEST_CASE("training on plant data", "[training]") {
  const auto runs = plant_runs(6, 60.0, 9001);
  const std::vector<Run> train(runs.begin(), runs.end() - 1);
  const std::vector<Run> val(runs.end() - 1, runs.end());

  ActuatorTrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.patience = 3;

  const ActuatorTrainResult r1 =
      train_actuator(train, val, FeatureConfig::proposed, cfg, 7);
  CHECK_NOTHROW(validate_model_dims(r1.model));
  CHECK(r1.velocity_curve.rows.size() >= 1);

  SECTION("same seed reproduces identical checkpoints") {
    const ActuatorTrainResult r2 =
        train_actuator(train, val, FeatureConfig::proposed, cfg, 7);
    for (int l = 0; l < r1.model.velocity_net.layer_count(); ++l)
      CHECK((r1.model.velocity_net.weights[l] -
             r2.model.velocity_net.weights[l]).norm() == 0.0);
    for (int l = 0; l < r1.model.pressure_net->layer_count(); ++l)
      CHECK((r1.model.pressure_net->weights[l] -
             r2.model.pressure_net->weights[l]).norm() == 0.0);
  }

  SECTION("mirrored commands give a mirrored rollout") {
    // In-distribution excitation: piecewise-constant holds.
    std::vector<double> u(100), iz(100, 2.5e5);
    Rng rng(55);
    for (size_t i = 0; i < u.size();) {
      const double level = rng.uniform(-0.8, 0.8);
      const int hold = rng.uniform_int(8, 20);
      for (int j = 0; j < hold && i < u.size(); ++j, ++i) u[i] = level;
    }
    std::vector<double> nu = u;
    for (auto& v : nu) v = -v;
    const RolloutSeries a = rollout_open_loop(r1.model, u, iz, 100);
    const RolloutSeries b = rollout_open_loop(r1.model, nu, iz, 100);
    double scale = 0, err = 0;
    for (int k = 0; k < 100; ++k) {
      scale = std::max(scale, std::abs(a.omega[k]));
      err += std::abs(a.omega[k] + b.omega[k]) / 100.0;
    }
    // Loose bound for this small training budget; the acceptance suite
    // checks the fully trained model at 5%.
    CHECK(err < 0.20 * std::max(scale, 0.05));
  }

  SECTION("model checkpoint directory round trip") {
    const fs::path dir = fs::temp_directory_path() / "mhc_slew_model";
    save_slew_model(r1.model, dir);
    const SlewModel back = load_slew_model(dir);
    CHECK(back.feature_config == FeatureConfig::proposed);
    for (int l = 0; l < back.velocity_net.layer_count(); ++l)
      CHECK((back.velocity_net.weights[l] -
             r1.model.velocity_net.weights[l]).norm() == 0.0);
    // Outputs agree exactly after reload.
    std::vector<double> u(30, 0.5), iz(30, 2e5);
    const RolloutSeries s1 = rollout_open_loop(r1.model, u, iz, 30);
    const RolloutSeries s2 = rollout_open_loop(back, u, iz, 30);
    for (int k = 0; k < 30; ++k) CHECK(s1.omega[k] == s2.omega[k]);
  }
}

TEST_CASE("evaluate_mae") {
  SECTION("a perfect oracle model has zero error") {
    // Build a run whose omega equals its command and a picker model that
    // reproduces exactly that.
    Run run;
    Rng rng(31);
    double u_prev = 0;
    for (int k = 0; k < 150; ++k) {
      const double u = rng.uniform(-1, 1);
      run.samples.push_back({k * kTickDt, u, 0.0, 0.0, u, 1e5});
      u_prev = u;
    }
    (void)u_prev;
    SlewModel model;
    model.feature_config = FeatureConfig::no_pressure;
    model.velocity_net = picker_net(21, 9);  // omega := u(k)
    const ActuatorMae mae = evaluate_mae(model, {run}, 10.0);
    CHECK(mae.windows == 1);
    CHECK(mae.velocity == 0.0);
    CHECK(mae.position == 0.0);
  }

  SECTION("short runs are skipped and counted") {
    SlewModel model;
    model.feature_config = FeatureConfig::no_pressure;
    model.velocity_net = picker_net(21, 9);
    Run tiny;
    for (int k = 0; k < 30; ++k)
      tiny.samples.push_back({k * kTickDt, 0, 0, 0, 0, 1e5});
    const ActuatorMae mae = evaluate_mae(model, {tiny}, 10.0);
    CHECK(mae.windows == 0);
    CHECK(mae.skipped_runs == 1);
  }
}
