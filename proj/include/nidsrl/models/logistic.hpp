#pragma once

#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "nidsrl/feature_codec.hpp"

namespace nidsrl::models {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean binary cross-entropy from logits, evaluated stably.
inline double logistic_loss(double logit, int y) {
  // log(1 + e^z) - y z
  const double softplus = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return softplus - (y == 1 ? logit : 0.0);
}

struct Logistic {
  Eigen::VectorXd w;
  double b = 0;

  double logit(std::span<const double> x) const {
    double z = b;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] != 0.0) z += w[static_cast<Eigen::Index>(j)] * x[j];
    }
    return z;
  }
};

struct LogisticOptions {
  double learning_rate = 0.05;
  double l2 = 1e-5;
  int iterations = 800;
};

/// Full-batch gradient descent on the L2-regularized logistic loss, with
/// Adam step scaling so sparse one-hot columns converge as fast as numerics.
inline Logistic fit_logistic(const EncodedData& data, const LogisticOptions& opt) {
  const auto n = static_cast<double>(data.rows());
  const Eigen::Index d = data.x.cols();
  Logistic m;
  m.w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd y(data.x.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = data.y[static_cast<std::size_t>(i)];
  // Adam moments; the last slot is the bias
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d + 1), m2 = Eigen::VectorXd::Zero(d + 1), g(d + 1);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int it = 0; it < opt.iterations; ++it) {
    Eigen::VectorXd z = data.x * m.w;
    z.array() += m.b;
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = sigmoid(z[i]) - y[i];
    g.head(d) = (data.x.transpose() * r) / n + opt.l2 * m.w;
    g[d] = r.sum() / n;
    m1 = b1 * m1 + (1 - b1) * g;
    m2 = b2 * m2 + (1 - b2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(b1, it + 1.0), c2 = 1 - std::pow(b2, it + 1.0);
    const Eigen::VectorXd step = opt.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    m.w -= step.head(d);
    m.b -= step[d];
  }
  return m;
}

}  // namespace nidsrl::models
