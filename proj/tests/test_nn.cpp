#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "mhc/common.hpp"
#include "mhc/nn.hpp"

using namespace mhc;
namespace fs = std::filesystem;

namespace {

// Independent naive forward pass: plain loops, no Eigen.
std::vector<double> naive_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> a(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    a[i] = (x[i] - net.in_mean(i)) / net.in_std(i);
  for (int l = 0; l < net.layer_count(); ++l) {
    const int rows = static_cast<int>(net.weights[l].rows());
    const int cols = static_cast<int>(net.weights[l].cols());
    std::vector<double> z(rows);
    for (int i = 0; i < rows; ++i) {
      double s = net.biases[l](i);
      for (int j = 0; j < cols; ++j) s += net.weights[l](i, j) * a[j];
      z[i] = s;
    }
    if (l + 1 < net.layer_count()) {
      for (auto& v : z)
        v = net.activation == Activation::relu ? std::max(v, 0.0) : std::tanh(v);
    }
    a = std::move(z);
  }
  for (size_t i = 0; i < a.size(); ++i)
    a[i] = a[i] * net.out_std(i) + net.out_mean(i);
  return a;
}

MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

TEST_CASE("forward pass basics") {
  SECTION("zero weights and biases give zero output") {
    Mlp net = make_mlp({4, 8, 3}, Activation::relu, 1);
    for (auto& w : net.weights) w.setZero();
    Rng rng(2);
    const VectorXd y = forward(net, random_matrix(4, 1, rng));
    CHECK(y.norm() == 0.0);
  }

  SECTION("identity single layer with relu passes non-negative input through") {
    Mlp net = make_mlp({5, 5}, Activation::relu, 1);
    net.weights[0].setIdentity();
    net.biases[0].setZero();
    VectorXd x(5);
    x << 0.0, 1.0, 2.5, 0.3, 7.0;
    CHECK((forward(net, x) - x).norm() == 0.0);
  }

  SECTION("matches the naive loop oracle") {
    for (Activation act : {Activation::relu, Activation::tanh}) {
      Mlp net = make_mlp({7, 11, 9, 2}, act, 5);
      Rng rng(6);
      net.in_mean = random_matrix(7, 1, rng, 0.5);
      net.in_std = random_matrix(7, 1, rng, 0.3).array().abs() + 0.5;
      net.out_mean = random_matrix(2, 1, rng, 1.0);
      net.out_std = random_matrix(2, 1, rng, 0.5).array().abs() + 0.5;
      for (int probe = 0; probe < 20; ++probe) {
        const MatrixXd x = random_matrix(7, 1, rng, 2.0);
        std::vector<double> xv(x.data(), x.data() + 7);
        const auto expect = naive_forward(net, xv);
        const VectorXd got = forward(net, x);
        for (int i = 0; i < 2; ++i)
          CHECK(std::abs(got(i) - expect[i]) < 1e-12);
      }
    }
  }

  SECTION("dimension mismatch is rejected") {
    Mlp net = make_mlp({4, 3}, Activation::relu, 1);
    Rng rng(1);
    CHECK_THROWS_AS(forward(net, random_matrix(5, 1, rng)),
                    std::invalid_argument);
  }
}

TEST_CASE("mse gradients") {
  SECTION("zero-error batch gives zero gradient") {
    Mlp net = make_mlp({3, 4, 2}, Activation::tanh, 9);
    Rng rng(4);
    const MatrixXd x = random_matrix(3, 6, rng);
    const MatrixXd t = forward_batch(net, x);
    const auto [loss, g] = gradient_mse(net, x, t);
    CHECK(loss == 0.0);
    for (const auto& w : g.weights) CHECK(w.norm() == 0.0);
    for (const auto& b : g.biases) CHECK(b.norm() == 0.0);
  }

  SECTION("finite differences confirm the reverse-mode gradient") {
    for (Activation act : {Activation::relu, Activation::tanh}) {
      Mlp net = make_mlp({41, 8, 2}, act, 11);
      Rng rng(12);
      const MatrixXd x = random_matrix(41, 10, rng);
      const MatrixXd t = random_matrix(2, 10, rng);
      const auto [loss, g] = gradient_mse(net, x, t);
      (void)loss;
      const double h = 1e-5;
      for (int probe = 0; probe < 10; ++probe) {
        const int l = rng.uniform_int(0, net.layer_count() - 1);
        const int i = rng.uniform_int(0, static_cast<int>(net.weights[l].rows()) - 1);
        const int j = rng.uniform_int(0, static_cast<int>(net.weights[l].cols()) - 1);
        Mlp p = net;
        p.weights[l](i, j) += h;
        Mlp m = net;
        m.weights[l](i, j) -= h;
        const double fd = (mse_loss(p, x, t) - mse_loss(m, x, t)) / (2 * h);
        const double an = g.weights[l](i, j);
        const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd));
        CHECK(rel < 1e-4);
      }
    }
  }

  SECTION("duplicating every sample leaves the mean gradient unchanged") {
    Mlp net = make_mlp({5, 6, 1}, Activation::relu, 3);
    Rng rng(8);
    const MatrixXd x = random_matrix(5, 7, rng);
    const MatrixXd t = random_matrix(1, 7, rng);
    MatrixXd x2(5, 14), t2(1, 14);
    x2 << x, x;
    t2 << t, t;
    const auto [l1, g1] = gradient_mse(net, x, t);
    const auto [l2, g2] = gradient_mse(net, x2, t2);
    CHECK(l1 == Catch::Approx(l2).epsilon(1e-12));
    for (int l = 0; l < net.layer_count(); ++l)
      CHECK((g1.weights[l] - g2.weights[l]).norm() < 1e-12);
  }

  SECTION("shape mismatch is rejected") {
    Mlp net = make_mlp({3, 2}, Activation::relu, 1);
    Rng rng(2);
    CHECK_THROWS_AS(gradient_mse(net, random_matrix(3, 4, rng),
                                 random_matrix(3, 4, rng)),
                    std::invalid_argument);
    CHECK_THROWS_AS(gradient_mse(net, MatrixXd(3, 0), MatrixXd(2, 0)),
                    std::invalid_argument);
  }
}

TEST_CASE("adam") {
  SECTION("zero gradient leaves weights unchanged") {
    Mlp net = make_mlp({3, 3}, Activation::relu, 7);
    const MatrixXd before = net.weights[0];
    AdamState opt = make_adam(net, 1e-3);
    adam_step(net, zero_gradients(net), opt);
    CHECK((net.weights[0] - before).norm() == 0.0);
  }

  SECTION("constant gradient drives the step magnitude to lr * sign(g)") {
    Mlp net = make_mlp({1, 1}, Activation::relu, 7);
    net.weights[0](0, 0) = 0.0;
    AdamState opt = make_adam(net, 1e-3);
    Gradients g = zero_gradients(net);
    g.weights[0](0, 0) = 0.37;  // constant positive gradient
    double prev = net.weights[0](0, 0);
    double step = 0;
    for (int k = 0; k < 5000; ++k) {
      adam_step(net, g, opt);
      step = net.weights[0](0, 0) - prev;
      prev = net.weights[0](0, 0);
    }
    CHECK(step == Catch::Approx(-1e-3).epsilon(1e-3));
  }

  SECTION("training is deterministic given the seed") {
    auto train_once = [] {
      Mlp net = make_mlp({4, 8, 1}, Activation::tanh, 50);
      AdamState opt = make_adam(net, 1e-3);
      Rng rng(51);
      const MatrixXd x = random_matrix(4, 32, rng);
      const MatrixXd t = random_matrix(1, 32, rng);
      for (int e = 0; e < 20; ++e) {
        auto [loss, g] = gradient_mse(net, x, t);
        (void)loss;
        adam_step(net, g, opt);
      }
      return net;
    };
    const Mlp a = train_once();
    const Mlp b = train_once();
    for (int l = 0; l < a.layer_count(); ++l)
      CHECK((a.weights[l] - b.weights[l]).norm() == 0.0);
  }
}

TEST_CASE("training capacity: linear targets reach mse below 1e-6") {
  Rng rng(21);
  const MatrixXd a_true = random_matrix(2, 6, rng);
  const MatrixXd x = random_matrix(6, 256, rng);
  const MatrixXd t = a_true * x;
  Mlp net = make_mlp({6, 32, 2}, Activation::tanh, 22);
  net.out_mean = t.rowwise().mean();
  net.out_std = ((t.colwise() - net.out_mean).array().square().rowwise().sum() /
                 (t.cols() - 1.0)).sqrt();
  AdamState opt = make_adam(net, 3e-3);
  double loss = 1;
  for (int e = 0; e < 20000 && loss >= 1e-6; ++e) {
    auto [l, g] = gradient_mse(net, x, t);
    loss = l;
    adam_step(net, g, opt);
    if (e % 4000 == 3999) opt.lr *= 0.5;
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("checkpoints") {
  const fs::path dir = fs::temp_directory_path() / "mhc_nn_test";
  fs::create_directories(dir);

  SECTION("round trip is bit-exact") {
    Mlp net = make_mlp({5, 9, 3}, Activation::tanh, 77);
    Rng rng(78);
    net.in_mean = random_matrix(5, 1, rng);
    net.in_std = random_matrix(5, 1, rng).array().abs() + 0.1;
    net.out_mean = random_matrix(3, 1, rng);
    net.out_std = random_matrix(3, 1, rng).array().abs() + 0.1;
    save_checkpoint(net, dir / "net.nn");
    const Mlp back = load_checkpoint(dir / "net.nn");
    CHECK(back.dims == net.dims);
    CHECK(back.activation == net.activation);
    for (int l = 0; l < net.layer_count(); ++l) {
      CHECK(std::memcmp(back.weights[l].data(), net.weights[l].data(),
                        sizeof(double) * net.weights[l].size()) == 0);
      CHECK(std::memcmp(back.biases[l].data(), net.biases[l].data(),
                        sizeof(double) * net.biases[l].size()) == 0);
    }
    CHECK(std::memcmp(back.in_mean.data(), net.in_mean.data(),
                      sizeof(double) * 5) == 0);
    // Saving the loaded net reproduces the file byte for byte.
    save_checkpoint(back, dir / "net2.nn");
    CHECK(read_text_file(dir / "net.nn") == read_text_file(dir / "net2.nn"));
  }

  SECTION("truncated and corrupt files are rejected") {
    Mlp net = make_mlp({4, 4, 2}, Activation::relu, 1);
    save_checkpoint(net, dir / "whole.nn");
    const std::string bytes = read_text_file(dir / "whole.nn");
    write_text_file(dir / "trunc.nn", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "trunc.nn"), IoError);
    write_text_file(dir / "junk.nn", "definitely not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.nn"), IoError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.nn"), IoError);
  }
}
