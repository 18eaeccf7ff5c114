#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "nidsrl/error.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh };

/// Feed-forward network with all parameters in one flat vector. Layer l owns
/// a column-major (out x in) weight block followed by its bias. Batches are
/// column-stacked: inputs are (in x batch), outputs (out x batch).
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<int> sizes, Activation hidden) : sizes_(std::move(sizes)), act_(hidden) {
    require(sizes_.size() >= 2, Errc::invalid_argument, "Mlp needs at least input and output sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]) +
           static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  /// Uniform fan-in scaled init; the last layer is multiplied by `out_gain`.
  void init(Rng& rng, double out_gain = 1.0) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double fan_in = sizes_[l];
      double bound = (act_ == Activation::relu ? std::sqrt(6.0 / fan_in) : std::sqrt(3.0 / fan_in));
      if (l + 1 == layers()) bound = std::sqrt(3.0 / fan_in) * out_gain;
      auto w = weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (2.0 * uniform01(rng) - 1.0);
      }
      bias(l).setZero();
    }
  }

  std::size_t layers() const { return offsets_.size(); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(std::size_t l) { return weight_in(params_, l); }
  Eigen::Map<const Matrix> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vector> bias(std::size_t l) { return bias_in(params_, l); }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1],
            sizes_[l + 1]};
  }

  /// Activations kept for backprop: post-activation values per hidden layer.
  struct Cache {
    std::vector<Matrix> hidden;
    Matrix out;
  };

  template <typename Input>
  Cache forward(const Input& x) const {
    check_dim(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(input_dim()), "Mlp::forward");
    Cache c;
    Matrix h;
    for (std::size_t l = 0; l < layers(); ++l) {
      Matrix z = (l == 0) ? Matrix(weight(0) * x) : Matrix(weight(l) * h);
      z.colwise() += bias(l);
      if (l + 1 == layers()) {
        c.out = std::move(z);
      } else {
        apply_activation(z);
        c.hidden.push_back(z);
        h = std::move(z);
      }
    }
    return c;
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(out).
  /// Returns d(loss)/d(input) when requested.
  template <typename Input>
  Matrix backward(const Input& x, const Cache& c, const Matrix& d_out, Vector& grad,
                  bool want_input_grad = false) const {
    Matrix delta = d_out;
    for (std::size_t li = layers(); li-- > 0;) {
      auto gw = weight_in(grad, li);
      auto gb = bias_in(grad, li);
      if (li == 0) {
        gw.noalias() += delta * x.transpose();
      } else {
        gw.noalias() += delta * c.hidden[li - 1].transpose();
      }
      gb.noalias() += delta.rowwise().sum();
      if (li == 0) {
        if (!want_input_grad) return {};
        return weight(0).transpose() * delta;
      }
      Matrix prev = weight(li).transpose() * delta;
      activation_backward(c.hidden[li - 1], prev);
      delta = std::move(prev);
    }
    return {};
  }

  /// Single-sample inference; skips zero inputs in the first layer so one-hot
  /// encoded vectors cost only their non-zeros.
  Vector predict(std::span<const double> x) const {
    check_dim(x.size(), static_cast<std::size_t>(input_dim()), "Mlp::predict");
    Vector h = bias(0);
    const auto w0 = weight(0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] != 0.0) h.noalias() += w0.col(static_cast<Eigen::Index>(j)) * x[j];
    }
    for (std::size_t l = 1; l < layers(); ++l) {
      apply_activation(h);
      Vector z = bias(l);
      z.noalias() += weight(l) * h;
      h = std::move(z);
    }
    return h;
  }

  /// Gradient of a scalar function of the outputs with respect to a single input.
  Vector input_gradient(std::span<const double> x, const Vector& d_out) const {
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Matrix xm = xv;
    const Cache c = forward(xm);
    Vector scratch = Vector::Zero(params_.size());
    const Matrix dx = backward(xm, c, Matrix(d_out), scratch, true);
    return dx.col(0);
  }

  std::size_t resident_bytes() const {
    return sizeof(*this) + static_cast<std::size_t>(params_.size()) * sizeof(double) +
           sizes_.capacity() * sizeof(int) + offsets_.capacity() * sizeof(std::size_t);
  }

 private:
  Eigen::Map<Matrix> weight_in(Vector& buf, std::size_t l) const {
    return {buf.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vector> bias_in(Vector& buf, std::size_t l) const {
    return {buf.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1],
            sizes_[l + 1]};
  }

  template <typename M>
  void apply_activation(M& z) const {
    if (act_ == Activation::relu) {
      z = z.cwiseMax(0.0);
    } else {
      z = z.array().tanh();
    }
  }

  // `post` holds post-activation values; `g` is overwritten with the gradient
  // wrt the pre-activation.
  void activation_backward(const Matrix& post, Matrix& g) const {
    if (act_ == Activation::relu) {
      g = (post.array() > 0.0).select(g, 0.0);
    } else {
      g.array() *= 1.0 - post.array().square();
    }
  }

  std::vector<int> sizes_;
  Activation act_ = Activation::tanh;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vector m, v;
  std::int64_t t = 0;

  void step(Vector& params, const Vector& grad) {
    if (m.size() != params.size()) {
      m = Vector::Zero(params.size());
      v = Vector::Zero(params.size());
    }
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

struct RmsProp {
  double lr = 7e-4;
  double alpha = 0.99;
  double eps = 1e-5;
  Vector sq;

  void step(Vector& params, const Vector& grad) {
    if (sq.size() != params.size()) sq = Vector::Zero(params.size());
    sq = alpha * sq + (1 - alpha) * grad.cwiseAbs2();
    params.array() -= lr * grad.array() / (sq.array().sqrt() + eps);
  }
};

/// Rescales `g` in place so that its l2 norm is at most `max_norm`; returns the
/// norm before clipping.
inline double clip_grad_norm(Vector& g, double max_norm) {
  const double n = g.norm();
  if (max_norm > 0 && n > max_norm) g *= max_norm / (n + 1e-12);
  return n;
}

}  // namespace nidsrl::nn
