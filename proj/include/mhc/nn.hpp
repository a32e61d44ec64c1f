// Minimal dense network engine: batched forward pass, reverse-mode
// gradients, Adam, and self-describing binary checkpoints. Per-channel
// input/output standardization is part of the network so checkpoints are
// complete on their own.
#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mhc/common.hpp"

namespace mhc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { relu = 0, tanh = 1 };

struct Mlp {
  std::vector<int> dims;  // [input, hidden..., output]
  Activation activation = Activation::relu;
  std::vector<MatrixXd> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<VectorXd> biases;

  // y = out_std .* net((x - in_mean)./in_std) + out_mean
  VectorXd in_mean, in_std, out_mean, out_std;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
};

inline Mlp make_mlp(const std::vector<int>& dims, Activation act,
                    uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least two dims");
  for (int d : dims)
    if (d <= 0) throw ConfigError("mlp dims must be positive");
  Mlp net;
  net.dims = dims;
  net.activation = act;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    // He-uniform for relu, Xavier-uniform for tanh.
    const double limit = act == Activation::relu
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(VectorXd::Zero(fan_out));
  }
  net.in_mean = VectorXd::Zero(dims.front());
  net.in_std = VectorXd::Ones(dims.front());
  net.out_mean = VectorXd::Zero(dims.back());
  net.out_std = VectorXd::Ones(dims.back());
  return net;
}

struct ForwardCache {
  // acts[0] is the standardized input; acts[l] the post-activation output
  // of hidden layer l. The raw (pre-destandardization) output is kept for
  // the backward pass.
  std::vector<MatrixXd> acts;
  MatrixXd raw_out;
};

namespace detail {
inline void apply_activation(MatrixXd& z, Activation act) {
  if (act == Activation::relu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}
}  // namespace detail

// Batched forward pass; columns are samples.
inline MatrixXd forward_batch(const Mlp& net, const MatrixXd& input,
                              ForwardCache* cache = nullptr) {
  if (input.rows() != net.input_dim())
    throw std::invalid_argument("forward: input dim mismatch");
  MatrixXd a = (input.colwise() - net.in_mean).array().colwise() /
               net.in_std.array();
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(a);
  }
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    if (l + 1 < L) detail::apply_activation(z, net.activation);
    a = std::move(z);
    if (cache && l + 1 < L) cache->acts.push_back(a);
  }
  if (cache) cache->raw_out = a;
  MatrixXd y = (a.array().colwise() * net.out_std.array()).matrix();
  y.colwise() += net.out_mean;
  return y;
}

inline VectorXd forward(const Mlp& net, const VectorXd& input) {
  return forward_batch(net, input).col(0);
}

struct Gradients {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
};

inline Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.layer_count(); ++l) {
    g.weights.push_back(MatrixXd::Zero(net.weights[l].rows(),
                                       net.weights[l].cols()));
    g.biases.push_back(VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

// Backprop from dL/dy (post-destandardization) to weight gradients.
inline Gradients backward(const Mlp& net, const ForwardCache& cache,
                          const MatrixXd& grad_output) {
  const int L = net.layer_count();
  Gradients g = zero_gradients(net);
  MatrixXd delta =
      grad_output.array().colwise() * net.out_std.array();  // through y scaling
  for (int l = L - 1; l >= 0; --l) {
    g.weights[l].noalias() = delta * cache.acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixXd back = net.weights[l].transpose() * delta;
      const MatrixXd& a = cache.acts[l];
      if (net.activation == Activation::relu)
        delta = (a.array() > 0.0).cast<double>() * back.array();
      else
        delta = (1.0 - a.array().square()) * back.array();
    }
  }
  return g;
}

// Mean-squared error over batch and output dims; returns loss and gradient.
inline std::pair<double, Gradients> gradient_mse(const Mlp& net,
                                                 const MatrixXd& inputs,
                                                 const MatrixXd& targets) {
  if (inputs.cols() == 0) throw std::invalid_argument("gradient: empty batch");
  if (targets.rows() != net.output_dim() || targets.cols() != inputs.cols())
    throw std::invalid_argument("gradient: target shape mismatch");
  ForwardCache cache;
  const MatrixXd y = forward_batch(net, inputs, &cache);
  const MatrixXd err = y - targets;
  const double denom = static_cast<double>(err.size());
  const double loss = err.squaredNorm() / denom;
  const Gradients g = backward(net, cache, (2.0 / denom) * err);
  return {loss, g};
}

inline double mse_loss(const Mlp& net, const MatrixXd& inputs,
                       const MatrixXd& targets) {
  const MatrixXd y = forward_batch(net, inputs);
  return (y - targets).squaredNorm() / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<MatrixXd> m_w, v_w;
  std::vector<VectorXd> m_b, v_b;
};

inline AdamState make_adam(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (int l = 0; l < net.layer_count(); ++l) {
    s.m_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.v_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.m_b.push_back(VectorXd::Zero(net.biases[l].size()));
    s.v_b.push_back(VectorXd::Zero(net.biases[l].size()));
  }
  return s;
}

inline void adam_step(Mlp& net, const Gradients& grads, AdamState& opt) {
  opt.step += 1;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (int l = 0; l < net.layer_count(); ++l) {
    opt.m_w[l] = opt.beta1 * opt.m_w[l] + (1.0 - opt.beta1) * grads.weights[l];
    opt.v_w[l] = opt.beta2 * opt.v_w[l] +
                 (1.0 - opt.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
    net.weights[l].array() -=
        opt.lr * (opt.m_w[l].array() / c1) /
        ((opt.v_w[l].array() / c2).sqrt() + opt.eps);

    opt.m_b[l] = opt.beta1 * opt.m_b[l] + (1.0 - opt.beta1) * grads.biases[l];
    opt.v_b[l] = opt.beta2 * opt.v_b[l] +
                 (1.0 - opt.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
    net.biases[l].array() -=
        opt.lr * (opt.m_b[l].array() / c1) /
        ((opt.v_b[l].array() / c2).sqrt() + opt.eps);
  }
}

// Global L2 gradient clipping; returns the pre-clip norm.
inline double clip_gradients(Gradients& g, double max_norm) {
  double sq = 0;
  for (const auto& w : g.weights) sq += w.squaredNorm();
  for (const auto& b : g.biases) sq += b.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& w : g.weights) w *= scale;
    for (auto& b : g.biases) b *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian): magic "MHCNET01", u32 activation, u32 dim count,
// u32 dims[], f64 in_mean/in_std/out_mean/out_std, then per layer the
// row-major f64 weight matrix followed by the bias vector.

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}
inline void put_f64(std::string& buf, double v) {
  buf.append(reinterpret_cast<const char*>(&v), 8);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("corrupt checkpoint: truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
};

}  // namespace detail

inline void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::string buf;
  buf.append("MHCNET01");
  detail::put_u32(buf, static_cast<uint32_t>(net.activation));
  detail::put_u32(buf, static_cast<uint32_t>(net.dims.size()));
  for (int d : net.dims) detail::put_u32(buf, static_cast<uint32_t>(d));
  auto put_vec = [&](const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) detail::put_f64(buf, v(i));
  };
  put_vec(net.in_mean);
  put_vec(net.in_std);
  put_vec(net.out_mean);
  put_vec(net.out_std);
  for (int l = 0; l < net.layer_count(); ++l) {
    const MatrixXd& w = net.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) detail::put_f64(buf, w(i, j));
    put_vec(net.biases[l]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 8 || buf.compare(0, 8, "MHCNET01") != 0)
    throw IoError("corrupt checkpoint: bad magic in " + path.string());
  detail::Reader r(buf);
  r.pos = 8;
  const uint32_t act = r.u32();
  if (act > 1) throw IoError("corrupt checkpoint: unknown activation");
  const uint32_t ndims = r.u32();
  if (ndims < 2 || ndims > 64)
    throw IoError("corrupt checkpoint: implausible dim count");
  std::vector<int> dims(ndims);
  for (auto& d : dims) {
    d = static_cast<int>(r.u32());
    if (d <= 0 || d > 1 << 20)
      throw IoError("corrupt checkpoint: implausible layer dim");
  }
  Mlp net;
  net.dims = dims;
  net.activation = static_cast<Activation>(act);
  auto get_vec = [&](Eigen::Index n) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = r.f64();
    return v;
  };
  net.in_mean = get_vec(dims.front());
  net.in_std = get_vec(dims.front());
  net.out_mean = get_vec(dims.back());
  net.out_std = get_vec(dims.back());
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = r.f64();
    net.weights.push_back(std::move(w));
    net.biases.push_back(get_vec(dims[l + 1]));
  }
  if (r.pos != buf.size())
    throw IoError("corrupt checkpoint: trailing bytes in " + path.string());
  return net;
}

}  // namespace mhc
