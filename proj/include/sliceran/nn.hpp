#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "random.hpp"

namespace sliceran::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint32_t { Identity = 0, Tanh = 1, Relu = 2 };

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Activations of every layer for one batch; column j is sample j.
struct ForwardCache {
  std::vector<Matrix> activations;  // [0] is the input, back() the output
};

/// Dense feed-forward network over a single flat parameter vector. Layer l
/// stores its weights row-major (fan_out x fan_in) followed by its biases.
/// Hidden layers share one activation; the output layer is affine.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<std::size_t> sizes, Activation hidden = Activation::Tanh)
      : sizes_(std::move(sizes)), hidden_(hidden) {
    if (sizes_.size() < 2) throw ShapeError("an MLP needs at least input and output sizes");
    for (auto s : sizes_) {
      if (s == 0) throw ShapeError("layer sizes must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += (sizes_[l] + 1) * sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
  }

  static std::size_t count_parameters(const std::vector<std::size_t>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += (sizes[l] + 1) * sizes[l + 1];
    return n;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  std::size_t layers() const { return sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  bool operator==(const Mlp& o) const { return sizes_ == o.sizes_ && hidden_ == o.hidden_ && params_ == o.params_; }

  /// Gaussian weights with variance gain^2 / fan_in, zero biases; the output
  /// layer is additionally scaled by `output_scale`.
  void initialize(RandomSource& rng, double output_scale = 1.0) {
    const double gain = hidden_ == Activation::Relu ? std::sqrt(2.0) : 1.0;
    for (std::size_t l = 0; l < layers(); ++l) {
      const auto in = sizes_[l];
      const auto out = sizes_[l + 1];
      double sd = gain / std::sqrt(static_cast<double>(in));
      if (l + 1 == layers()) sd = output_scale / std::sqrt(static_cast<double>(in));
      double* w = params_.data() + offsets_[l];
      for (std::size_t i = 0; i < in * out; ++i) w[i] = rng.gaussian(0.0, sd);
      for (std::size_t i = 0; i < out; ++i) w[in * out + i] = 0.0;
    }
  }

  Matrix forward_batch(const Matrix& inputs, ForwardCache* cache = nullptr) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_size()) {
      throw ShapeError("input has " + std::to_string(inputs.rows()) + " rows, expected " + std::to_string(input_size()));
    }
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(inputs);
    }
    Matrix a = inputs;
    for (std::size_t l = 0; l < layers(); ++l) {
      Matrix z = weights(l) * a;
      z.colwise() += biases(l);
      if (l + 1 < layers()) activate(z);
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  std::vector<double> forward(std::span<const double> input) const {
    if (input.size() != input_size()) {
      throw ShapeError("input length " + std::to_string(input.size()) + ", expected " + std::to_string(input_size()));
    }
    const Matrix x = Eigen::Map<const Matrix>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
    const Matrix y = forward_batch(x);
    return {y.data(), y.data() + y.size()};
  }

  /// Accumulates into `grad` the gradient of sum_j <upstream_j, output_j>
  /// with respect to every parameter, for the batch recorded in `cache`.
  void backward_batch(const ForwardCache& cache, const Matrix& upstream, std::span<double> grad) const {
    if (grad.size() != parameter_count()) throw ShapeError("gradient buffer has wrong length");
    if (cache.activations.size() != sizes_.size()) throw ShapeError("forward cache does not match network depth");
    if (static_cast<std::size_t>(upstream.rows()) != output_size() || upstream.cols() != cache.activations.back().cols()) {
      throw ShapeError("upstream gradient shape does not match output");
    }
    backpropagate(cache, upstream, layers(), grad);
  }

  /// Output `rows[j]` of sample j only. The output layer costs one dot
  /// product per sample instead of a full matrix product; `cache` receives
  /// every activation except the output.
  std::vector<double> forward_selected(const Matrix& inputs, std::span<const std::size_t> rows, ForwardCache& cache) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_size()) throw ShapeError("input rows do not match network");
    if (rows.size() != static_cast<std::size_t>(inputs.cols())) throw ShapeError("one selected output per sample expected");
    cache.activations.clear();
    cache.activations.push_back(inputs);
    for (std::size_t l = 0; l + 1 < layers(); ++l) {
      Matrix z = weights(l) * cache.activations.back();
      z.colwise() += biases(l);
      activate(z);
      cache.activations.push_back(std::move(z));
    }
    const std::size_t last = layers() - 1;
    const auto w = weights(last);
    const auto b = biases(last);
    const Matrix& h = cache.activations.back();
    std::vector<double> out(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j] >= output_size()) throw ShapeError("selected output out of range");
      const auto r = static_cast<Eigen::Index>(rows[j]);
      const auto c = static_cast<Eigen::Index>(j);
      out[j] = w.row(r).dot(h.col(c)) + b(r);
    }
    return out;
  }

  /// Gradient of sum_j upstream[j] * output(rows[j], j) for the batch
  /// recorded by forward_selected.
  void backward_selected(const ForwardCache& cache, std::span<const std::size_t> rows, std::span<const double> upstream,
                         std::span<double> grad) const {
    if (grad.size() != parameter_count()) throw ShapeError("gradient buffer has wrong length");
    if (cache.activations.size() != sizes_.size() - 1) throw ShapeError("forward cache does not match network depth");
    if (rows.size() != upstream.size() || static_cast<Eigen::Index>(rows.size()) != cache.activations.back().cols()) {
      throw ShapeError("selected upstream does not match the batch");
    }
    const std::size_t last = layers() - 1;
    const auto in = static_cast<Eigen::Index>(sizes_[last]);
    const auto out = static_cast<Eigen::Index>(sizes_[last + 1]);
    Eigen::Map<RowMajorMatrix> gw(grad.data() + offsets_[last], out, in);
    Eigen::Map<Vector> gb(grad.data() + offsets_[last] + static_cast<std::size_t>(in * out), out);
    const auto w = weights(last);
    const Matrix& h = cache.activations.back();
    Matrix delta(in, h.cols());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(rows[j]);
      const auto c = static_cast<Eigen::Index>(j);
      gw.row(r) += upstream[j] * h.col(c).transpose();
      gb(r) += upstream[j];
      delta.col(c) = upstream[j] * w.row(r).transpose();
    }
    if (last == 0) return;
    activate_derivative(h, delta);
    backpropagate(cache, delta, last, grad);
  }

  /// Gradient of <upstream, forward(input)> for a single sample.
  std::vector<double> gradient(std::span<const double> input, std::span<const double> upstream) const {
    if (input.size() != input_size()) throw ShapeError("input length does not match network");
    if (upstream.size() != output_size()) throw ShapeError("upstream length does not match network output");
    ForwardCache cache;
    const Matrix x = Eigen::Map<const Matrix>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
    forward_batch(x, &cache);
    std::vector<double> grad(parameter_count(), 0.0);
    const Matrix up = Eigen::Map<const Matrix>(upstream.data(), static_cast<Eigen::Index>(upstream.size()), 1);
    backward_batch(cache, up, grad);
    return grad;
  }

  Eigen::Map<const RowMajorMatrix> weights(std::size_t l) const {
    return {params_.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]), static_cast<Eigen::Index>(sizes_[l])};
  }
  Eigen::Map<const Vector> biases(std::size_t l) const {
    return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], static_cast<Eigen::Index>(sizes_[l + 1])};
  }

 private:
  // `delta` is the gradient at the output of layer `top - 1`.
  void backpropagate(const ForwardCache& cache, Matrix delta, std::size_t top, std::span<double> grad) const {
    for (std::size_t l = top; l-- > 0;) {
      const Matrix& a_in = cache.activations[l];
      const auto in = static_cast<Eigen::Index>(sizes_[l]);
      const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
      Eigen::Map<RowMajorMatrix> gw(grad.data() + offsets_[l], out, in);
      Eigen::Map<Vector> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(in * out), out);
      gw.noalias() += delta * a_in.transpose();
      gb += delta.rowwise().sum();
      if (l == 0) break;
      Matrix back = weights(l).transpose() * delta;
      activate_derivative(cache.activations[l], back);
      delta = std::move(back);
    }
  }

  void activate(Matrix& z) const {
    switch (hidden_) {
      case Activation::Identity: break;
      case Activation::Tanh: z = z.array().tanh(); break;
      case Activation::Relu: z = z.cwiseMax(0.0); break;
    }
  }

  // `post` holds the activation outputs of the layer `back` flows into.
  void activate_derivative(const Matrix& post, Matrix& back) const {
    switch (hidden_) {
      case Activation::Identity: break;
      case Activation::Tanh: back.array() *= 1.0 - post.array().square(); break;
      case Activation::Relu: back.array() *= (post.array() > 0.0).cast<double>(); break;
    }
  }

  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::Tanh;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  void set_learning_rate(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

/// Numerically stable log-softmax of one column.
inline Vector log_softmax(const Eigen::Ref<const Vector>& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

inline Vector softmax(const Eigen::Ref<const Vector>& logits) { return log_softmax(logits).array().exp(); }

/// Lowest index among maximal entries.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace sliceran::nn
