#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nidsrl/error.hpp"
#include "nidsrl/feature_codec.hpp"
#include "nidsrl/models/logistic.hpp"
#include "nidsrl/models/mlp_classifier.hpp"
#include "nidsrl/models/trees.hpp"
#include "nidsrl/nn.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

enum class ModelKind { lr, mlp, rf, gbt };

inline constexpr std::array<ModelKind, 4> kAllModelKinds = {ModelKind::lr, ModelKind::mlp, ModelKind::rf,
                                                            ModelKind::gbt};

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::lr: return "LR";
    case ModelKind::mlp: return "MLP";
    case ModelKind::rf: return "RF";
    case ModelKind::gbt: return "GBT";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "LR") return ModelKind::lr;
  if (u == "MLP") return ModelKind::mlp;
  if (u == "RF") return ModelKind::rf;
  if (u == "GBT" || u == "XGB") return ModelKind::gbt;
  throw Error(Errc::invalid_argument, "unknown model kind: " + std::string(s));
}

inline bool is_differentiable(ModelKind k) { return k == ModelKind::lr || k == ModelKind::mlp; }

struct Forest {
  std::vector<models::Tree> trees;
};

struct Hyperparams {
  models::LogisticOptions lr;
  models::MlpOptions mlp;
  models::ForestOptions rf;
  models::BoostingOptions gbt;
  int cv_folds = 0;  // 0 or 1 disables the grid search
};

class NidsModel {
 public:
  using Params = std::variant<models::Logistic, nn::Mlp, Forest, models::BoostedTrees>;
  static constexpr double kDefaultThreshold = 0.5;
  static constexpr int kFormatVersion = 1;

  NidsModel() = default;
  NidsModel(Params p, std::size_t input_dim, std::string codec_id)
      : params_(std::move(p)), input_dim_(input_dim), codec_id_(std::move(codec_id)) {}

  ModelKind kind() const { return static_cast<ModelKind>(params_.index()); }
  std::size_t input_dim() const { return input_dim_; }
  const std::string& codec_id() const { return codec_id_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  const Params& params() const { return params_; }

  /// Raw score whose sigmoid is the probability (LR, MLP, GBT).
  double logit(std::span<const double> x) const {
    check_dim(x.size(), input_dim_, "NidsModel::logit");
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, models::Logistic>) {
            return p.logit(x);
          } else if constexpr (std::is_same_v<T, nn::Mlp>) {
            return p.predict(x)[0];
          } else if constexpr (std::is_same_v<T, models::BoostedTrees>) {
            double z = p.base_score;
            for (const auto& t : p.trees) z += t.predict(x);
            return z;
          } else {
            const double q = std::clamp(forest_mean(p, x), 1e-12, 1 - 1e-12);
            return std::log(q / (1 - q));
          }
        },
        params_);
  }

  double predict_proba(std::span<const double> x) const {
    check_dim(x.size(), input_dim_, "NidsModel::predict_proba");
    if (const auto* f = std::get_if<Forest>(&params_)) return std::clamp(forest_mean(*f, x), 0.0, 1.0);
    const double z = logit(x);
    if (std::isnan(z)) return 0.5;
    return std::clamp(models::sigmoid(z), 0.0, 1.0);
  }

  int decide(std::span<const double> x) const { return predict_proba(x) >= threshold_ ? 1 : 0; }

  /// d/dx of the logistic loss toward the benign target, -log(1 - p).
  /// Tree ensembles have no gradient.
  std::optional<std::vector<double>> gradient(std::span<const double> x) const {
    check_dim(x.size(), input_dim_, "NidsModel::gradient");
    if (const auto* lr = std::get_if<models::Logistic>(&params_)) {
      const double p = models::sigmoid(lr->logit(x));
      std::vector<double> g(input_dim_);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = p * lr->w[static_cast<Eigen::Index>(j)];
      return g;
    }
    if (const auto* net = std::get_if<nn::Mlp>(&params_)) {
      const double p = models::sigmoid(net->predict(x)[0]);
      nn::Vector d_out(1);
      d_out[0] = p;
      const nn::Vector gx = net->input_gradient(x, d_out);
      return std::vector<double>(gx.data(), gx.data() + gx.size());
    }
    return std::nullopt;
  }

  /// Probabilities for every row of a sparse batch.
  std::vector<double> predict_proba_batch(const SparseRows& x) const {
    check_dim(static_cast<std::size_t>(x.cols()), input_dim_, "NidsModel::predict_proba_batch");
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    if (const auto* lr = std::get_if<models::Logistic>(&params_)) {
      const Eigen::VectorXd z = x * lr->w;
      for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = models::sigmoid(z[i] + lr->b);
      return out;
    }
    if (const auto* net = std::get_if<nn::Mlp>(&params_)) {
      constexpr Eigen::Index kChunk = 4096;
      for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.rows() - s);
        const Eigen::SparseMatrix<double> block = x.middleRows(s, len).transpose();
        const auto c = net->forward(block);
        for (Eigen::Index k = 0; k < len; ++k) out[static_cast<std::size_t>(s + k)] = models::sigmoid(c.out(0, k));
      }
      return out;
    }
    std::vector<double> row(input_dim_, 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (SparseRows::InnerIterator it(x, i); it; ++it) row[static_cast<std::size_t>(it.col())] = it.value();
      out[static_cast<std::size_t>(i)] = predict_proba(row);
      for (SparseRows::InnerIterator it(x, i); it; ++it) row[static_cast<std::size_t>(it.col())] = 0.0;
    }
    return out;
  }

  std::vector<int> decide_batch(const SparseRows& x) const {
    const auto p = predict_proba_batch(x);
    std::vector<int> d(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] >= threshold_ ? 1 : 0;
    return d;
  }

  std::size_t resident_bytes() const {
    std::size_t bytes = sizeof(*this) + codec_id_.capacity();
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, models::Logistic>) {
            bytes += static_cast<std::size_t>(p.w.size()) * sizeof(double);
          } else if constexpr (std::is_same_v<T, nn::Mlp>) {
            bytes += p.resident_bytes();
          } else {
            for (const auto& t : p.trees) bytes += sizeof(t) + t.nodes.capacity() * sizeof(models::TreeNode);
          }
        },
        params_);
    return bytes;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "nidsrl-model";
    j["version"] = kFormatVersion;
    j["kind"] = model_kind_name(kind());
    j["input_dim"] = input_dim_;
    j["codec_id"] = codec_id_;
    j["threshold"] = threshold_;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, models::Logistic>) {
            j["params"] = {{"w", std::vector<double>(p.w.data(), p.w.data() + p.w.size())}, {"b", p.b}};
          } else if constexpr (std::is_same_v<T, nn::Mlp>) {
            j["params"] = {{"sizes", p.sizes()},
                           {"activation", p.activation() == nn::Activation::relu ? "relu" : "tanh"},
                           {"values", std::vector<double>(p.params().data(), p.params().data() + p.params().size())}};
          } else if constexpr (std::is_same_v<T, Forest>) {
            j["params"] = {{"trees", trees_to_json(p.trees)}};
          } else {
            j["params"] = {{"base_score", p.base_score}, {"trees", trees_to_json(p.trees)}};
          }
        },
        params_);
    return j;
  }

  /// Rejects a document whose input_dim differs from `expected_input_dim`
  /// when one is supplied.
  static NidsModel from_json(const nlohmann::json& j, std::optional<std::size_t> expected_input_dim = std::nullopt) {
    require(j.value("format", "") == "nidsrl-model", Errc::format_error, "not a model document");
    require(j.value("version", 0) == kFormatVersion, Errc::format_error, "unsupported model version");
    const auto dim = j.at("input_dim").get<std::size_t>();
    if (expected_input_dim) check_dim(dim, *expected_input_dim, "model input_dim");
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& p = j.at("params");
    Params params;
    switch (kind) {
      case ModelKind::lr: {
        models::Logistic m;
        const auto w = p.at("w").get<std::vector<double>>();
        check_dim(w.size(), dim, "LR weights");
        m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        m.b = p.at("b").get<double>();
        params = std::move(m);
        break;
      }
      case ModelKind::mlp: {
        const auto sizes = p.at("sizes").get<std::vector<int>>();
        require(!sizes.empty() && sizes.back() == 1, Errc::format_error, "MLP output must be a single logit");
        check_dim(static_cast<std::size_t>(sizes.front()), dim, "MLP input layer");
        nn::Mlp net(sizes, p.at("activation").get<std::string>() == "relu" ? nn::Activation::relu : nn::Activation::tanh);
        const auto v = p.at("values").get<std::vector<double>>();
        check_dim(v.size(), net.param_count(), "MLP parameter vector");
        net.params() = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        params = std::move(net);
        break;
      }
      case ModelKind::rf:
        params = Forest{trees_from_json(p.at("trees"), dim)};
        break;
      case ModelKind::gbt: {
        models::BoostedTrees b;
        b.base_score = p.at("base_score").get<double>();
        b.trees = trees_from_json(p.at("trees"), dim);
        params = std::move(b);
        break;
      }
    }
    NidsModel m(std::move(params), dim, j.at("codec_id").get<std::string>());
    m.threshold_ = j.value("threshold", kDefaultThreshold);
    return m;
  }

 private:
  static double forest_mean(const Forest& f, std::span<const double> x) {
    if (f.trees.empty()) return 0.5;
    double s = 0;
    for (const auto& t : f.trees) s += t.predict(x);
    return s / static_cast<double>(f.trees.size());
  }

  // each node: [feature, threshold, left, right, value]
  static nlohmann::json trees_to_json(const std::vector<models::Tree>& trees) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      arr.push_back(std::move(nodes));
    }
    return arr;
  }

  static std::vector<models::Tree> trees_from_json(const nlohmann::json& arr, std::size_t dim) {
    std::vector<models::Tree> trees;
    for (const auto& nodes : arr) {
      models::Tree t;
      for (const auto& n : nodes) {
        models::TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                              n.at(4).get<double>()};
        require(node.feature < static_cast<int>(dim), Errc::dimension_mismatch, "tree feature index out of range");
        t.nodes.push_back(node);
      }
      const int count = static_cast<int>(t.nodes.size());
      for (const auto& node : t.nodes) {
        require(node.feature < 0 || (node.left > 0 && node.left < count && node.right > 0 && node.right < count),
                Errc::format_error, "tree child index out of range");
      }
      require(count > 0, Errc::format_error, "empty tree");
      trees.push_back(std::move(t));
    }
    return trees;
  }

  Params params_ = models::Logistic{};
  std::size_t input_dim_ = 0;
  std::string codec_id_;
  double threshold_ = kDefaultThreshold;
};

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

inline EvalReport confusion_report(std::span<const int> truth, std::span<const int> predicted) {
  require(!truth.empty(), Errc::empty_dataset, "evaluate: no samples");
  check_dim(predicted.size(), truth.size(), "confusion_report");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      (predicted[i] == 1 ? r.tp : r.fn)++;
    } else {
      (predicted[i] == 1 ? r.fp : r.tn)++;
    }
  }
  const auto d = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  r.precision = d(r.tp, r.tp + r.fp);
  r.recall = d(r.tp, r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.accuracy = d(r.tp + r.tn, truth.size());
  return r;
}

inline EvalReport evaluate(const NidsModel& model, const EncodedData& data) {
  require(data.rows() > 0, Errc::empty_dataset, "evaluate: no samples");
  const auto pred = model.decide_batch(data.x);
  return confusion_report(data.y, pred);
}

/// Labels assigned by the victim; surrogates train on these instead of ground truth.
inline std::vector<int> surrogate_labels(const NidsModel& victim, const SparseRows& x) {
  return victim.decide_batch(x);
}

inline EncodedData select_rows(const EncodedData& d, std::span<const std::size_t> rows) {
  EncodedData out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), d.x.cols());
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (SparseRows::InnerIterator it(d.x, static_cast<Eigen::Index>(rows[k])); it; ++it) {
      trip.emplace_back(static_cast<Eigen::Index>(k), it.col(), it.value());
    }
    out.y.push_back(d.y[rows[k]]);
  }
  out.x.setFromTriplets(trip.begin(), trip.end());
  out.x.makeCompressed();
  return out;
}

namespace zoo_detail {

inline NidsModel fit_once(ModelKind kind, const EncodedData& data, const Hyperparams& hp, std::uint64_t seed,
                          const std::string& codec_id) {
  const std::size_t dim = data.cols();
  switch (kind) {
    case ModelKind::lr:
      return {models::fit_logistic(data, hp.lr), dim, codec_id};
    case ModelKind::mlp:
      return {models::fit_mlp(data, hp.mlp, seed), dim, codec_id};
    case ModelKind::rf: {
      const models::BinnedData binned(data.x);
      return {Forest{models::fit_random_forest(binned, data.y, hp.rf, seed)}, dim, codec_id};
    }
    case ModelKind::gbt: {
      const models::BinnedData binned(data.x);
      return {models::fit_boosted_trees(binned, data.y, hp.gbt, seed), dim, codec_id};
    }
  }
  throw Error(Errc::invalid_argument, "unknown model kind");
}

// Candidate hyperparameter sets: a 2x2 grid over regularization and learning rate.
inline std::vector<Hyperparams> grid(ModelKind kind, const Hyperparams& base) {
  std::vector<Hyperparams> out;
  for (int r = 0; r < 2; ++r) {
    for (int l = 0; l < 2; ++l) {
      Hyperparams h = base;
      switch (kind) {
        case ModelKind::lr:
          h.lr.l2 = r == 0 ? base.lr.l2 : base.lr.l2 * 10;
          h.lr.learning_rate = l == 0 ? base.lr.learning_rate : base.lr.learning_rate * 2;
          break;
        case ModelKind::mlp:
          h.mlp.l2 = r == 0 ? base.mlp.l2 : base.mlp.l2 * 10;
          h.mlp.learning_rate = l == 0 ? base.mlp.learning_rate : base.mlp.learning_rate * 3;
          break;
        case ModelKind::rf:
          // forests have no learning rate; the second axis varies depth instead
          h.rf.min_samples_leaf = r == 0 ? base.rf.min_samples_leaf : base.rf.min_samples_leaf * 5;
          h.rf.max_depth = l == 0 ? base.rf.max_depth : std::max(2, base.rf.max_depth / 2);
          break;
        case ModelKind::gbt:
          h.gbt.lambda = r == 0 ? base.gbt.lambda : base.gbt.lambda * 10;
          h.gbt.learning_rate = l == 0 ? base.gbt.learning_rate : base.gbt.learning_rate * 3;
          break;
      }
      out.push_back(h);
    }
  }
  return out;
}

}  // namespace zoo_detail

/// Fits one model. With `hp.cv_folds >= 2` a small grid is scored by
/// stratified k-fold F1 and the winner is refit on all rows.
inline NidsModel train_model(ModelKind kind, const EncodedData& data, const Hyperparams& hp, std::uint64_t seed,
                             const std::string& codec_id = {}) {
  require(data.rows() > 0, Errc::empty_dataset, "train_model: no samples");
  check_dim(data.y.size(), data.rows(), "train_model labels");
  const auto pos = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), 1));
  if (pos == 0 || pos == data.rows()) throw Error(Errc::single_class_data, "training data holds a single class");
  for (Eigen::Index k = 0; k < data.x.nonZeros(); ++k) {
    if (!std::isfinite(data.x.valuePtr()[k])) throw Error(Errc::non_finite_feature, "training data holds a non-finite value");
  }

  Hyperparams chosen = hp;
  const std::size_t folds = static_cast<std::size_t>(std::max(0, hp.cv_folds));
  if (folds >= 2 && std::min(pos, data.rows() - pos) >= folds) {
    std::vector<std::size_t> fold_of(data.rows());
    Rng rng(derive_seed(seed, 0xcf));
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < data.rows(); ++i) {
        if (data.y[i] == cls) idx.push_back(i);
      }
      shuffle_range(idx.begin(), idx.end(), rng);
      for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = k % folds;
    }
    double best = -1;
    for (const auto& cand : zoo_detail::grid(kind, hp)) {
      double score = 0;
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < data.rows(); ++i) (fold_of[i] == f ? va : tr).push_back(i);
        const auto train = select_rows(data, tr);
        const auto valid = select_rows(data, va);
        score += evaluate(zoo_detail::fit_once(kind, train, cand, derive_seed(seed, f), codec_id), valid).f1;
      }
      if (score > best + 1e-12) {
        best = score;
        chosen = cand;
      }
    }
  }
  return zoo_detail::fit_once(kind, data, chosen, seed, codec_id);
}

/// A fitted codec paired with a model: scores raw flow records.
struct Detector {
  FeatureCodec codec;
  NidsModel model;

  double predict_proba(const FlowRecord& flow) const {
    std::vector<double> x(codec.dim());
    codec.encode_into(flow, x);
    return model.predict_proba(x);
  }
  int decide(const FlowRecord& flow) const { return predict_proba(flow) >= model.threshold() ? 1 : 0; }
  double threshold() const { return model.threshold(); }
  std::size_t resident_bytes() const { return codec.resident_bytes() + model.resident_bytes(); }
};

/// Anything that turns a raw flow into a malicious probability and decision.
template <typename S>
concept FlowScorer = requires(const S& s, const FlowRecord& f) {
  { s.predict_proba(f) } -> std::convertible_to<double>;
  { s.decide(f) } -> std::convertible_to<int>;
};

}  // namespace nidsrl
