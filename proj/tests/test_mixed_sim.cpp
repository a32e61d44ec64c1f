#include <catch2/catch_amalgamated.hpp>

#include "mhc/common.hpp"
#include "mhc/mixed_sim.hpp"

using namespace mhc;

namespace {

// Toy slew model: omega = 0.2 * u(k), instant response. Handy whenever a
// deterministic model backend is needed without training.
SlewModel toy_model() {
  SlewModel m;
  m.feature_config = FeatureConfig::no_pressure;
  Mlp net = make_mlp({21, 1}, Activation::relu, 0);
  net.weights[0].setZero();
  net.weights[0](0, 9) = 0.2;  // u(k) slot
  net.biases[0].setZero();
  m.velocity_net = net;
  return m;
}

ToolState free_swing(ToolState t, const ToolParams& p, int steps) {
  for (int k = 0; k < steps; ++k)
    t = tool_step(t, 0, 0, 0, 0, 0, 0, p);
  return t;
}

}  // namespace

TEST_CASE("arm velocity tracking") {
  ArmModelParams p;
  p.gain = 0.12;
  p.delay_steps = 7;

  SECTION("reference equal to current velocity is a fixed point") {
    CHECK(arm_step(0.15, 0.15, p) == 0.15);
  }

  SECTION("step reference follows the geometric-series closed form") {
    // qdot[k] = r * (1 - (1-P)^(k-d)) for k >= d, zero before.
    // Reference switches to r at step 1; Eq. 3 first responds at step d+1,
    // i.e. exactly d steps later, then follows r * (1 - (1-P)^(k-d)).
    const double r = 0.2;
    double qdot = 0;
    for (int k = 1; k <= 150; ++k) {
      const double delayed = k - p.delay_steps >= 1 ? r : 0.0;
      qdot = arm_step(qdot, delayed, p);
      if (k <= p.delay_steps) {
        CHECK(qdot == 0.0);
      } else {
        const double expected =
            r * (1.0 - std::pow(1.0 - p.gain, k - p.delay_steps));
        CHECK(qdot == Catch::Approx(expected).margin(1e-12));
      }
    }
  }

  SECTION("P = 1, d = 1 tracks with one step of delay") {
    ArmModelParams fast{1.0, 1};
    double qdot = 0;
    qdot = arm_step(qdot, 0.0, fast);   // ref[k-1] still zero
    CHECK(qdot == 0.0);
    qdot = arm_step(qdot, 0.17, fast);  // delayed ref arrives
    CHECK(qdot == 0.17);
  }

  SECTION("first-order response never overshoots the reference") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      ArmModelParams q{rng.uniform(0.01, 1.0), 1};
      const double r = rng.uniform(-0.2, 0.2);
      double qdot = 0;
      for (int k = 0; k < 300; ++k) {
        const double prev = qdot;
        qdot = arm_step(qdot, r, q);
        CHECK(std::abs(qdot) <= std::abs(r) + 1e-15);
        CHECK(std::abs(r - qdot) <= std::abs(r - prev) + 1e-15);
      }
    }
  }

  SECTION("parameter validation") {
    CHECK_THROWS_AS((ArmModelParams{0.0, 5}.validate()), ConfigError);
    CHECK_THROWS_AS((ArmModelParams{1.5, 5}.validate()), ConfigError);
    CHECK_THROWS_AS((ArmModelParams{0.1, 0}.validate()), ConfigError);
  }
}

TEST_CASE("tool pendulum") {
  ToolParams p;

  SECTION("vertical tool with static support stays put") {
    ToolState t;
    t = free_swing(t, p, 2000);
    CHECK(t.theta_x == 0.0);
    CHECK(t.theta_y == 0.0);
    CHECK(t.thetadot_x == 0.0);
    CHECK(t.thetadot_y == 0.0);
  }

  SECTION("small-angle free oscillation matches 2*pi*sqrt(l/g) within 2%") {
    ToolParams undamped = p;
    undamped.damping_x = undamped.damping_y = 0;
    ToolState t;
    t.theta_y = 0.05;
    int crossings = 0;
    double prev = t.theta_y;
    double t_first = -1, t_last = -1;
    for (int k = 1; k < 20000 && crossings < 21; ++k) {
      t = tool_step(t, 0, 0, 0, 0, 0, 0, undamped);
      if (prev > 0 && t.theta_y <= 0.0) {
        // Downward zero crossing once per period.
        const double tc = k * kInnerDt;
        if (t_first < 0) t_first = tc;
        t_last = tc;
        ++crossings;
      }
      prev = t.theta_y;
    }
    REQUIRE(crossings == 21);
    const double period = (t_last - t_first) / 20.0;
    const double expected = 2.0 * kPi * std::sqrt(p.length_y / kGravity);
    CHECK(std::abs(period - expected) / expected < 0.02);
  }

  SECTION("undamped energy has no secular drift") {
    ToolParams undamped = p;
    undamped.damping_x = undamped.damping_y = 0;
    ToolState t;
    t.theta_y = 0.3;
    const double e0 = pendulum_energy(t.theta_y, t.thetadot_y, p.length_y);
    const int steps = 4500;  // ~10 periods
    for (int k = 0; k < steps; ++k) t = tool_step(t, 0, 0, 0, 0, 0, 0, undamped);
    const double e1 = pendulum_energy(t.theta_y, t.thetadot_y, p.length_y);
    CHECK(std::abs(e1 - e0) / e0 / steps < 1e-4);
  }

  SECTION("damped energy is strictly non-increasing every step") {
    for (double damping : {0.1, 0.3, 0.5}) {
      ToolParams d = p;
      d.damping_x = d.damping_y = damping;
      ToolState t;
      t.theta_y = 0.3;
      t.theta_x = 0.2;
      double ey = pendulum_energy(t.theta_y, t.thetadot_y, d.length_y);
      for (int k = 0; k < 5000; ++k) {
        t = tool_step(t, 0, 0, 0, 0, 0, 0, d);
        const double ey2 = pendulum_energy(t.theta_y, t.thetadot_y, d.length_y);
        CHECK(ey2 <= ey + 1e-15);
        ey = ey2;
      }
    }
  }

  SECTION("axis decoupling: pure x-plane motion never excites theta_x") {
    ToolState t;
    t.theta_y = 0.25;
    Rng rng(9);
    double vx_prev = 0;
    for (int k = 0; k < 3000; ++k) {
      const double vx = rng.uniform(-1.0, 1.0);
      t = tool_step(t, vx, vx_prev, 0.0, 0.0, 0.0, 5.0, p);
      vx_prev = vx;
      CHECK(t.theta_x == 0.0);
      CHECK(t.thetadot_x == 0.0);
    }
    CHECK(t.theta_y != 0.25);  // the y axis did move
  }

  SECTION("constant slew rotation settles at the bracket root") {
    const double rate = 0.15, r_y = 8.0;
    auto bisect = [](auto f, double lo, double hi) {
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0 ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    };
    SECTION("verbatim centrifugal term") {
      ToolState t;
      for (int k = 0; k < 60000; ++k)
        t = tool_step(t, 0, 0, 0, 0, rate, r_y, p);
      const double root = bisect(
          [&](double th) { return -kGravity * std::sin(th) - rate * rate * r_y; },
          -0.5, 0.0);
      CHECK(t.theta_y == Catch::Approx(root).margin(1e-4));
      CHECK(std::abs(t.thetadot_y) < 1e-6);
    }
    SECTION("projected centrifugal variant") {
      ToolParams proj = p;
      proj.centrifugal_projected = true;
      ToolState t;
      for (int k = 0; k < 60000; ++k)
        t = tool_step(t, 0, 0, 0, 0, rate, r_y, proj);
      const double root = bisect(
          [&](double th) {
            return -kGravity * std::sin(th) -
                   rate * rate * r_y * std::cos(th);
          },
          -0.5, 0.0);
      CHECK(t.theta_y == Catch::Approx(root).margin(1e-4));
    }
  }
}

TEST_CASE("termination classification") {
  TerminationParams term;
  CHECK(classify_termination({8, 0, 3}, 0, term) == Termination::running);
  CHECK(classify_termination({8, 0, term.z_min - 0.01}, 0, term) ==
        Termination::too_low);
  CHECK(classify_termination({term.r_min - 0.01, 0, 3}, 0, term) ==
        Termination::too_close);
  CHECK(classify_termination({8, 0, 3}, kTicksPerEpisode, term) ==
        Termination::timeout);
}

TEST_CASE("environment with the plant backend") {
  Environment::Config cfg;
  PlantParams plant;
  plant.noise_std_omega = 0;
  plant.noise_std_pressure = 0;
  Environment env(cfg, plant);

  SECTION("zero action from rest keeps the grab static and the tool vertical") {
    env.reset(3);
    const CartesianPose start = forward_kinematics(env.joints(), cfg.geometry);
    for (int k = 0; k < 50; ++k) {
      const StepInfo info = env.step({0, 0, 0});
      CHECK(info.grab.x == Catch::Approx(start.x).margin(1e-12));
      CHECK(info.grab.z == Catch::Approx(start.z).margin(1e-12));
      CHECK(info.tool_rate_x == 0.0);
      CHECK(info.tool_rate_y == 0.0);
    }
  }

  SECTION("episode clock: 100 ticks of 5 inner steps reach timeout at 10 s") {
    env.reset(4);
    env.set_trace_enabled(true);
    StepInfo info;
    int steps = 0;
    do {
      info = env.step({0.3, 0.05, -0.05});
      ++steps;
    } while (info.status == Termination::running && steps < 1000);
    CHECK(steps == kTicksPerEpisode);
    CHECK(info.status == Termination::timeout);
    CHECK(env.inner_trace().size() == 500);
  }
}

TEST_CASE("environment with a model backend") {
  const SlewModel model = toy_model();
  Environment::Config cfg;
  Environment env(cfg, &model);

  SECTION("identical seeds and actions give identical trajectories") {
    auto rollout = [&](uint64_t seed) {
      env.reset(seed);
      std::vector<double> angles;
      Rng rng(77);
      for (int k = 0; k < 60; ++k) {
        const StepInfo info = env.step(
            {rng.uniform(-1, 1), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)});
        angles.push_back(info.slew_angle);
        angles.push_back(info.grab.z);
      }
      return angles;
    };
    CHECK(rollout(12) == rollout(12));
    CHECK(rollout(12) != rollout(13));
  }

  SECTION("slew-only mode freezes the arm") {
    Environment::Config so = cfg;
    so.slew_only = true;
    Environment env2(so, &model);
    env2.reset(5);
    const JointState before = env2.joints();
    for (int k = 0; k < 30; ++k) (void)env2.step({0.5, 0.2, -0.2});
    const JointState after = env2.joints();
    CHECK(after.q[1] == before.q[1]);
    CHECK(after.q[2] == before.q[2]);
    CHECK(after.q[0] != before.q[0]);  // slew did rotate
  }

  SECTION("actions are clipped before use") {
    env.reset(6);
    const StepInfo info = env.step({5.0, -5.0, 5.0});
    CHECK(info.applied_action[0] == 1.0);
    CHECK(info.applied_action[1] == -0.2);
    CHECK(info.applied_action[2] == 0.2);
    CHECK_THROWS_AS(env.step({std::nan(""), 0, 0}), std::invalid_argument);
  }

  SECTION("arm joints clamp at their limits with zeroed velocity") {
    env.reset(8);
    StepInfo info;
    for (int k = 0; k < 400; ++k) info = env.step({0, 0.2, 0.2});
    CHECK(env.joints().q[1] == cfg.geometry.boom_max);
    CHECK(env.joints().q[2] == cfg.geometry.stick_max);
    CHECK(info.boom_rate == 0.0);
    CHECK(info.stick_rate == 0.0);
  }

  SECTION("history buffer holds the last H ticks") {
    env.reset(9);
    for (int k = 0; k < 12; ++k) (void)env.step({0.1 * (k % 3), 0, 0});
    CHECK(env.history().size() == 5);
    CHECK(env.history().back().action[0] ==
          Catch::Approx(0.1 * (11 % 3)).margin(1e-15));
  }
}

TEST_CASE("environment reset sampling") {
  const SlewModel model = toy_model();
  Environment::Config cfg;
  Environment env(cfg, &model);

  SECTION("10^4 resets never start in a terminated state") {
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
      env.reset(derive_seed(1000, i));
      if (env.check_termination() != Termination::running) ++bad;
      const auto& t = env.target();
      if (t.y != 0.0) ++bad;                       // targets in the x-z plane
      const JointState js = env.joints();
      if (js.q[3] != 0.0 || js.q[4] != 0.0) ++bad; // tool vertical
      if (js.qdot[3] != 0.0 || js.qdot[4] != 0.0) ++bad;
      if (js.q[0] == 0.0) ++bad;                   // rotation required
    }
    CHECK(bad == 0);
  }

  SECTION("per-episode draws stay inside the configured ranges") {
    for (int i = 0; i < 200; ++i) {
      env.reset(derive_seed(2000, i));
      const EpisodeDraw& d = env.draw();
      CHECK(d.arm.gain >= cfg.ranges.arm_gain_min);
      CHECK(d.arm.gain <= cfg.ranges.arm_gain_max);
      CHECK(d.arm.delay_steps >= cfg.ranges.arm_delay_min);
      CHECK(d.arm.delay_steps <= cfg.ranges.arm_delay_max);
      CHECK(d.load_kg >= 0);
      CHECK(d.load_kg <= cfg.ranges.load_max);
      CHECK(d.tool.damping_x >= cfg.ranges.tool_damping_min);
    }
  }

  SECTION("impossible ranges raise a config error") {
    Environment::Config tight = cfg;
    tight.termination.z_min = 100.0;  // unreachable safety region
    Environment env2(tight, &model);
    CHECK_THROWS_AS(env2.reset(1), ConfigError);
  }

  SECTION("pinned draws and targets are honored") {
    EpisodeDraw d;
    d.arm = {0.15, 8};
    d.tool = ToolParams{};
    d.load_kg = 1234.0;
    env.reset_with(3, d, CartesianPose{9.0, 0.0, 4.0}, 0.9,
                   std::array<double, 2>{0.8, -1.2});
    CHECK(env.draw().load_kg == 1234.0);
    CHECK(env.target().x == 9.0);
    CHECK(env.initial_slew() == 0.9);
    CHECK(env.joints().q[1] == 0.8);
  }
}

TEST_CASE("load-blind observation inertia") {
  const SlewModel model = toy_model();
  Environment::Config cfg;
  cfg.load_blind_obs = true;
  Environment env(cfg, &model);
  EpisodeDraw d;
  d.load_kg = 2000.0;
  env.reset_with(4, d, {}, {}, {});
  const double blind = env.inertia_obs();
  const double truth =
      inertia_about_z(env.joints(), cfg.geometry, 2000.0);
  CHECK(blind < truth);
  CHECK(blind == inertia_about_z(env.joints(), cfg.geometry, 0.0));
}
