#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "nidsrl/error.hpp"
#include "nidsrl/nn.hpp"
#include "nidsrl/policy.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

/// Minimal episodic environment interface consumed by the trainers.
template <typename E>
concept RlEnvironment = requires(E& e, std::span<const double> a) {
  { e.reset() } -> std::convertible_to<std::vector<double>>;
  { e.step(a) } -> std::convertible_to<EnvStep>;
  { e.obs_dim() } -> std::convertible_to<std::size_t>;
  { e.action_bound() } -> std::convertible_to<std::vector<double>>;
};

enum class Algorithm { ppo, a2c };

inline std::string algorithm_name(Algorithm a) { return a == Algorithm::ppo ? "PPO" : "A2C"; }

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "PPO" || s == "ppo") return Algorithm::ppo;
  if (s == "A2C" || s == "a2c") return Algorithm::a2c;
  throw Error(Errc::invalid_argument, "unknown algorithm: " + std::string(s));
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::ppo;
  std::int64_t total_steps = 100000;
  int rollout_steps = 2048;
  int epochs = 10;
  int minibatch = 64;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  double ent_coef = 0.0;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
  std::vector<int> hidden = {64, 64};
  double init_log_std = 0.0;
  std::int64_t log_every = 2048;  // environment steps per curve point
  std::uint64_t seed = 0;

  static TrainConfig ppo() { return {}; }

  static TrainConfig a2c() {
    TrainConfig c;
    c.algorithm = Algorithm::a2c;
    c.rollout_steps = 5;
    c.epochs = 1;
    c.minibatch = 5;
    c.gae_lambda = 1.0;
    c.learning_rate = 7e-4;
    c.normalize_advantage = false;
    return c;
  }

  void validate() const {
    require(total_steps > 0 && rollout_steps > 0 && epochs > 0 && minibatch > 0 && log_every > 0,
            Errc::config_invalid, "train config counts must be positive");
    require(clip > 0 && clip < 1, Errc::config_invalid, "clip ratio must lie in (0,1)");
    require(gamma > 0 && gamma <= 1 && gae_lambda > 0 && gae_lambda <= 1, Errc::config_invalid,
            "gamma and gae_lambda must lie in (0,1]");
    require(learning_rate > 0 && vf_coef > 0 && max_grad_norm > 0 && ent_coef >= 0, Errc::config_invalid,
            "train config rates must be positive");
    require(!hidden.empty(), Errc::config_invalid, "policy needs at least one hidden layer");
    for (int h : hidden) require(h > 0, Errc::config_invalid, "hidden sizes must be positive");
  }
};

struct CurvePoint {
  std::int64_t step = 0;
  double mean_episode_reward = std::numeric_limits<double>::quiet_NaN();  // per-step mean within an episode
  std::size_t episodes = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
  double initial_ratio_dev = 0;  // max |ratio - 1| over the rollout before its first update
};

inline void write_curve_csv(std::ostream& o, std::span<const CurvePoint> curve) {
  o << "step,mean_episode_reward,episodes,policy_loss,value_loss,entropy,approx_kl,clip_fraction,initial_ratio_dev\n";
  o.precision(17);
  for (const auto& c : curve) {
    o << c.step << ',' << c.mean_episode_reward << ',' << c.episodes << ',' << c.policy_loss << ',' << c.value_loss
      << ',' << c.entropy << ',' << c.approx_kl << ',' << c.clip_fraction << ',' << c.initial_ratio_dev << '\n';
  }
}

inline std::vector<CurvePoint> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,", 0) != 0) throw Error(Errc::format_error, "not a curve file");
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != 9) throw Error(Errc::format_error, "curve row has " + std::to_string(v.size()) + " cells");
    CurvePoint c;
    c.step = static_cast<std::int64_t>(v[0]);
    c.mean_episode_reward = v[1];
    c.episodes = static_cast<std::size_t>(v[2]);
    c.policy_loss = v[3];
    c.value_loss = v[4];
    c.entropy = v[5];
    c.approx_kl = v[6];
    c.clip_fraction = v[7];
    c.initial_ratio_dev = v[8];
    out.push_back(c);
  }
  return out;
}

/// Raised when a loss or parameter turns non-finite; carries the curve so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<CurvePoint> partial)
      : Error(Errc::divergence_detected, what), curve(std::move(partial)) {}
  std::vector<CurvePoint> curve;
};

using SparseObs = std::vector<std::pair<int, double>>;

inline SparseObs sparsify(std::span<const double> obs) {
  SparseObs s;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (obs[j] != 0.0) s.emplace_back(static_cast<int>(j), obs[j]);
  }
  return s;
}

/// On-policy storage for one rollout. Advantages and returns are filled by
/// compute_gae before any update and the whole buffer is cleared after.
struct RolloutBuffer {
  std::vector<SparseObs> obs;
  std::vector<nn::Vector> u;  // pre-squash action samples
  std::vector<double> logp, reward, value, advantage, ret;
  std::vector<char> done;  // episode ended at this step

  std::size_t size() const { return reward.size(); }

  void clear() {
    obs.clear();
    u.clear();
    logp.clear();
    reward.clear();
    value.clear();
    advantage.clear();
    ret.clear();
    done.clear();
  }

  /// Generalized advantage estimation; `last_value` bootstraps a rollout that
  /// stops mid-episode.
  void compute_gae(double gamma, double lambda, double last_value) {
    const std::size_t n = size();
    advantage.assign(n, 0.0);
    ret.assign(n, 0.0);
    double gae = 0;
    for (std::size_t k = n; k-- > 0;) {
      const double nonterminal = done[k] ? 0.0 : 1.0;
      const double next_value = k + 1 == n ? last_value : value[k + 1];
      const double delta = reward[k] + gamma * next_value * nonterminal - value[k];
      gae = delta + gamma * lambda * nonterminal * gae;
      advantage[k] = gae;
      ret[k] = gae + value[k];
    }
  }
};

struct Minibatch {
  Eigen::SparseMatrix<double> obs;  // obs_dim x B
  nn::Matrix u;                     // act_dim x B
  nn::Vector old_logp, advantage, ret;
};

inline Minibatch gather_minibatch(const RolloutBuffer& buf, std::span<const std::size_t> idx, std::size_t obs_dim,
                                  bool normalize_advantage) {
  Minibatch mb;
  const auto b = static_cast<Eigen::Index>(idx.size());
  mb.obs.resize(static_cast<Eigen::Index>(obs_dim), b);
  std::vector<Eigen::Triplet<double>> trip;
  mb.u.resize(buf.u.front().size(), b);
  mb.old_logp.resize(b);
  mb.advantage.resize(b);
  mb.ret.resize(b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const std::size_t i = idx[static_cast<std::size_t>(k)];
    for (const auto& [j, v] : buf.obs[i]) trip.emplace_back(j, k, v);
    mb.u.col(k) = buf.u[i];
    mb.old_logp[k] = buf.logp[i];
    mb.advantage[k] = buf.advantage[i];
    mb.ret[k] = buf.ret[i];
  }
  mb.obs.setFromTriplets(trip.begin(), trip.end());
  if (normalize_advantage && b > 1) {
    const double mean = mb.advantage.mean();
    const double var = (mb.advantage.array() - mean).square().sum() / static_cast<double>(b - 1);
    mb.advantage = (mb.advantage.array() - mean) / (std::sqrt(var) + 1e-8);
  }
  return mb;
}

struct LossTerms {
  double total = 0;
  double policy = 0;
  double value = 0;
  double entropy = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
  double max_ratio_dev = 0;
};

struct LossSpec {
  double clip = 0.2;  // <= 0: plain policy-gradient (A2C) objective
  double vf_coef = 0.5;
  double ent_coef = 0.0;
};

struct ActorCriticGrad {
  nn::Vector trunk, log_std, value;

  void reset(const PolicyNet& pi, const nn::Mlp& vf) {
    trunk = nn::Vector::Zero(static_cast<Eigen::Index>(pi.trunk().param_count()));
    log_std = nn::Vector::Zero(pi.log_std().size());
    value = nn::Vector::Zero(static_cast<Eigen::Index>(vf.param_count()));
  }
  double norm() const { return std::sqrt(trunk.squaredNorm() + log_std.squaredNorm() + value.squaredNorm()); }
  void scale(double s) {
    trunk *= s;
    log_std *= s;
    value *= s;
  }
};

/// Combined actor-critic objective on a frozen minibatch:
///   policy term (clipped surrogate, or -A * log pi without clipping)
///   + vf_coef * mean squared value error - ent_coef * entropy.
/// When `grad` is non-null it receives the exact gradient of `total`.
inline LossTerms actor_critic_loss(const PolicyNet& pi, const nn::Mlp& vf, const Minibatch& mb, const LossSpec& spec,
                                   ActorCriticGrad* grad) {
  constexpr double kHalfLog2PiPlusHalf = 0.5 + 0.91893853320467274178;
  const auto b = static_cast<double>(mb.u.cols());
  const auto pcache = pi.trunk().forward(mb.obs);
  const auto vcache = vf.forward(mb.obs);
  const nn::Matrix& mu = pcache.out;
  const nn::Vector& log_std = pi.log_std();
  const nn::Vector inv_var = (-2.0 * log_std).array().exp();

  LossTerms t;
  nn::Matrix d_mu = nn::Matrix::Zero(mu.rows(), mu.cols());
  nn::Vector d_log_std = nn::Vector::Zero(log_std.size());
  nn::Matrix d_v(1, mu.cols());
  for (Eigen::Index k = 0; k < mu.cols(); ++k) {
    const double lp = PolicyNet::log_prob(mb.u.col(k), mu.col(k), log_std);
    const double log_ratio = lp - mb.old_logp[k];
    const double ratio = std::exp(log_ratio);
    const double a = mb.advantage[k];
    double d_lp = 0;
    if (spec.clip > 0) {
      const double clipped = std::clamp(ratio, 1 - spec.clip, 1 + spec.clip);
      t.policy += -std::min(ratio * a, clipped * a) / b;
      const bool active = a >= 0 ? ratio <= 1 + spec.clip : ratio >= 1 - spec.clip;
      if (active) d_lp = -a * ratio / b;
      if (std::abs(ratio - 1) > spec.clip) t.clip_fraction += 1 / b;
    } else {
      t.policy += -a * lp / b;
      d_lp = -a / b;
    }
    t.approx_kl += ((ratio - 1) - log_ratio) / b;
    t.max_ratio_dev = std::max(t.max_ratio_dev, std::abs(ratio - 1));
    for (Eigen::Index j = 0; j < mu.rows(); ++j) {
      const double diff = mb.u(j, k) - mu(j, k);
      d_mu(j, k) = d_lp * diff * inv_var[j];
      d_log_std[j] += d_lp * (diff * diff * inv_var[j] - 1.0);
    }
    const double err = vcache.out(0, k) - mb.ret[k];
    t.value += err * err / b;
    d_v(0, k) = spec.vf_coef * 2.0 * err / b;
  }
  for (Eigen::Index j = 0; j < log_std.size(); ++j) t.entropy += log_std[j] + kHalfLog2PiPlusHalf;
  t.total = t.policy + spec.vf_coef * t.value - spec.ent_coef * t.entropy;

  if (grad) {
    pi.trunk().backward(mb.obs, pcache, d_mu, grad->trunk);
    grad->log_std += d_log_std;
    grad->log_std.array() -= spec.ent_coef;
    vf.backward(mb.obs, vcache, d_v, grad->value);
  }
  return t;
}

struct TrainResult {
  PolicyNet policy;
  nn::Mlp value;
  std::vector<CurvePoint> curve;
  std::int64_t steps = 0;
};

/// Policy and value networks in their pre-training state for `cfg`.
inline std::pair<PolicyNet, nn::Mlp> initial_networks(std::size_t obs_dim, const std::vector<double>& action_bound,
                                                      const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x9011c7));
  PolicyNet pi(obs_dim, action_bound, cfg.hidden, cfg.init_log_std);
  pi.init(rng);
  nn::Mlp vf(PolicyNet::layer_sizes(obs_dim, cfg.hidden, 1), nn::Activation::tanh);
  vf.init(rng, 1.0);
  return {std::move(pi), std::move(vf)};
}

namespace rl_detail {

template <typename Opt>
struct Optimizers {
  Opt trunk, log_std, value;
};

template <typename Opt>
Optimizers<Opt> make_optimizers(double lr) {
  Optimizers<Opt> o;
  o.trunk.lr = o.log_std.lr = o.value.lr = lr;
  return o;
}

inline bool all_finite(const PolicyNet& pi, const nn::Mlp& vf) {
  return pi.trunk().params().allFinite() && pi.log_std().allFinite() && vf.params().allFinite();
}

}  // namespace rl_detail

/// On-policy actor-critic training. PPO: clipped surrogate, several epochs of
/// shuffled minibatches per rollout. A2C: one full-batch step per short
/// rollout without clipping, RMSprop.
template <RlEnvironment Env>
TrainResult train_actor_critic(Env& env, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t obs_dim = env.obs_dim();
  auto [pi, vf] = initial_networks(obs_dim, env.action_bound(), cfg);
  Rng rng(derive_seed(cfg.seed, 0x5a3b1e));

  auto adam = rl_detail::make_optimizers<nn::Adam>(cfg.learning_rate);
  auto rms = rl_detail::make_optimizers<nn::RmsProp>(cfg.learning_rate);
  const LossSpec spec{cfg.algorithm == Algorithm::ppo ? cfg.clip : 0.0, cfg.vf_coef, cfg.ent_coef};

  TrainResult result;
  RolloutBuffer buf;
  std::vector<double> obs = env.reset();
  double ep_return = 0;
  int ep_len = 0;

  // accumulators for the current log window
  double window_reward = 0;
  std::size_t window_episodes = 0;
  LossTerms window_loss;
  std::size_t window_updates = 0;
  double window_ratio_dev = 0;
  std::int64_t next_log = cfg.log_every;

  ActorCriticGrad grad;
  std::int64_t steps = 0;
  while (steps < cfg.total_steps) {
    buf.clear();
    const auto n = static_cast<std::size_t>(std::min<std::int64_t>(cfg.rollout_steps, cfg.total_steps - steps));
    for (std::size_t k = 0; k < n; ++k) {
      const nn::Vector mu = pi.mean(obs);
      nn::Vector u = mu;
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] += std::exp(pi.log_std()[j]) * standard_normal(rng);
      const double v = vf.predict(obs)[0];
      const auto action = pi.squash(u);
      const EnvStep s = env.step(action);
      buf.obs.push_back(sparsify(obs));
      buf.u.push_back(u);
      buf.logp.push_back(PolicyNet::log_prob(u, mu, pi.log_std()));
      buf.value.push_back(v);
      buf.reward.push_back(s.reward);
      buf.done.push_back(s.done ? 1 : 0);
      ep_return += s.reward;
      ++ep_len;
      if (s.done) {
        window_reward += ep_return / ep_len;
        ++window_episodes;
        ep_return = 0;
        ep_len = 0;
        obs = env.reset();
      } else {
        obs = s.obs;
      }
    }
    steps += static_cast<std::int64_t>(n);
    const double last_value = buf.done.back() ? 0.0 : vf.predict(obs)[0];
    buf.compute_gae(cfg.gamma, cfg.gae_lambda, last_value);

    std::vector<std::size_t> order(buf.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    {
      // ratios against the freshly collected data, before any parameter change
      const auto all = gather_minibatch(buf, order, obs_dim, false);
      window_ratio_dev = std::max(window_ratio_dev, actor_critic_loss(pi, vf, all, spec, nullptr).max_ratio_dev);
    }
    const std::size_t mb_size = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch), buf.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (cfg.algorithm == Algorithm::ppo) shuffle_range(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += mb_size) {
        const std::size_t end = std::min(order.size(), start + mb_size);
        const auto mb = gather_minibatch(buf, std::span(order).subspan(start, end - start), obs_dim,
                                         cfg.normalize_advantage);
        grad.reset(pi, vf);
        const LossTerms lt = actor_critic_loss(pi, vf, mb, spec, &grad);
        if (!std::isfinite(lt.total) || !std::isfinite(grad.norm())) {
          throw TrainingDiverged("non-finite loss at step " + std::to_string(steps), result.curve);
        }
        const double gn = grad.norm();
        if (gn > cfg.max_grad_norm) grad.scale(cfg.max_grad_norm / (gn + 1e-6));
        if (cfg.algorithm == Algorithm::ppo) {
          adam.trunk.step(pi.trunk().params(), grad.trunk);
          adam.log_std.step(pi.log_std(), grad.log_std);
          adam.value.step(vf.params(), grad.value);
        } else {
          rms.trunk.step(pi.trunk().params(), grad.trunk);
          rms.log_std.step(pi.log_std(), grad.log_std);
          rms.value.step(vf.params(), grad.value);
        }
        if (!rl_detail::all_finite(pi, vf)) {
          throw TrainingDiverged("non-finite parameters at step " + std::to_string(steps), result.curve);
        }
        window_loss.policy += lt.policy;
        window_loss.value += lt.value;
        window_loss.entropy += lt.entropy;
        window_loss.approx_kl += lt.approx_kl;
        window_loss.clip_fraction += lt.clip_fraction;
        ++window_updates;
      }
    }

    if (steps >= next_log || steps >= cfg.total_steps) {
      CurvePoint c;
      c.step = steps;
      c.episodes = window_episodes;
      if (window_episodes > 0) c.mean_episode_reward = window_reward / static_cast<double>(window_episodes);
      const double u = std::max<std::size_t>(window_updates, 1);
      c.policy_loss = window_loss.policy / u;
      c.value_loss = window_loss.value / u;
      c.entropy = window_loss.entropy / u;
      c.approx_kl = window_loss.approx_kl / u;
      c.clip_fraction = window_loss.clip_fraction / u;
      c.initial_ratio_dev = window_ratio_dev;
      result.curve.push_back(c);
      window_reward = 0;
      window_episodes = 0;
      window_loss = {};
      window_updates = 0;
      window_ratio_dev = 0;
      while (next_log <= steps) next_log += cfg.log_every;
    }
  }
  result.policy = std::move(pi);
  result.value = std::move(vf);
  result.steps = steps;
  return result;
}

/// `make_env(seed)` builds the training environment.
template <typename Factory>
TrainResult train_ppo(Factory&& make_env, TrainConfig cfg) {
  cfg.algorithm = Algorithm::ppo;
  auto env = make_env(derive_seed(cfg.seed, 0xe2));
  return train_actor_critic(env, cfg);
}

template <typename Factory>
TrainResult train_a2c(Factory&& make_env, TrainConfig cfg) {
  cfg.algorithm = Algorithm::a2c;
  auto env = make_env(derive_seed(cfg.seed, 0xe2));
  return train_actor_critic(env, cfg);
}

template <typename Factory>
TrainResult train_policy(Factory&& make_env, const TrainConfig& cfg) {
  return cfg.algorithm == Algorithm::ppo ? train_ppo(make_env, cfg) : train_a2c(make_env, cfg);
}

}  // namespace nidsrl
