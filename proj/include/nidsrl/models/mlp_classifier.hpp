#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nidsrl/feature_codec.hpp"
#include "nidsrl/models/logistic.hpp"
#include "nidsrl/nn.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl::models {

struct MlpOptions {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  double l2 = 1e-5;
  int batch_size = 64;
  int epochs = 0;  // 0: scale with data so that about 4e5 samples are visited (3..200 epochs)
};

inline int mlp_epochs_for(const MlpOptions& opt, std::size_t n) {
  if (opt.epochs > 0) return opt.epochs;
  const double e = std::ceil(4e5 / static_cast<double>(std::max<std::size_t>(n, 1)));
  return static_cast<int>(std::clamp(e, 3.0, 200.0));
}

/// Two-hidden-layer ReLU network with a single logit output, trained with
/// mini-batch Adam on binary cross-entropy.
inline nn::Mlp fit_mlp(const EncodedData& d, const MlpOptions& opt, std::uint64_t seed) {
  std::vector<int> sizes = {static_cast<int>(d.cols())};
  sizes.insert(sizes.end(), opt.hidden.begin(), opt.hidden.end());
  sizes.push_back(1);
  nn::Mlp net(sizes, nn::Activation::relu);
  Rng rng(derive_seed(seed, 1));
  net.init(rng);

  nn::Adam adam;
  adam.lr = opt.learning_rate;
  const std::size_t n = d.rows();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const int epochs = mlp_epochs_for(opt, n);
  nn::Vector grad(net.param_count());

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_range(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(opt.batch_size));
      const auto bsz = static_cast<Eigen::Index>(end - start);
      // gather a column-major (in x batch) sparse block
      Eigen::SparseMatrix<double> xb(d.x.cols(), bsz);
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(static_cast<std::size_t>(bsz) * 10);
      for (Eigen::Index k = 0; k < bsz; ++k) {
        for (SparseRows::InnerIterator it(d.x, order[start + static_cast<std::size_t>(k)]); it; ++it) {
          trip.emplace_back(it.col(), k, it.value());
        }
      }
      xb.setFromTriplets(trip.begin(), trip.end());

      const auto cache = net.forward(xb);
      nn::Matrix d_out(1, bsz);
      for (Eigen::Index k = 0; k < bsz; ++k) {
        const int y = d.y[static_cast<std::size_t>(order[start + static_cast<std::size_t>(k)])];
        d_out(0, k) = (sigmoid(cache.out(0, k)) - y) / static_cast<double>(bsz);
      }
      grad.setZero();
      net.backward(xb, cache, d_out, grad);
      grad += opt.l2 * net.params();
      adam.step(net.params(), grad);
    }
  }
  return net;
}

}  // namespace nidsrl::models
