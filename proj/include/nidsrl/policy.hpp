#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nidsrl/error.hpp"
#include "nidsrl/evasion_env.hpp"
#include "nidsrl/nn.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

enum class ActMode { deterministic, stochastic };

/// Gaussian policy over pre-squash actions u; the emitted action is
/// scale * tanh(u). The trunk maps an observation to the mean of u; the
/// log standard deviation is a free vector used only while training.
class PolicyNet {
 public:
  static constexpr double kOutputGain = 0.01;

  PolicyNet() = default;
  PolicyNet(std::size_t obs_dim, std::vector<double> action_scale, std::vector<int> hidden = {64, 64},
            double init_log_std = 0.0)
      : trunk_(layer_sizes(obs_dim, hidden, action_scale.size()), nn::Activation::tanh),
        log_std_(nn::Vector::Constant(static_cast<Eigen::Index>(action_scale.size()), init_log_std)),
        scale_(std::move(action_scale)) {}

  void init(Rng& rng) { trunk_.init(rng, kOutputGain); }

  std::size_t obs_dim() const { return static_cast<std::size_t>(trunk_.input_dim()); }
  std::size_t action_dim() const { return scale_.size(); }
  std::vector<int> hidden() const {
    const auto& s = trunk_.sizes();
    return {s.begin() + 1, s.end() - 1};
  }
  const std::vector<double>& action_scale() const { return scale_; }

  nn::Mlp& trunk() { return trunk_; }
  const nn::Mlp& trunk() const { return trunk_; }
  nn::Vector& log_std() { return log_std_; }
  const nn::Vector& log_std() const { return log_std_; }
  bool has_log_std() const { return log_std_.size() > 0; }
  void drop_log_std() { log_std_.resize(0); }

  const ObservationEncoder& encoder() const { return encoder_; }
  void set_encoder(ObservationEncoder e) { encoder_ = std::move(e); }
  const std::string& codec_id() const { return codec_id_; }
  void set_codec_id(std::string id) { codec_id_ = std::move(id); }

  nn::Vector mean(std::span<const double> obs) const {
    check_dim(obs.size(), obs_dim(), "PolicyNet::mean");
    return trunk_.predict(obs);
  }

  /// Squashes a pre-activation sample into the bounded action box.
  std::vector<double> squash(const nn::Vector& u) const {
    std::vector<double> a(action_dim());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = scale_[k] * std::tanh(u[static_cast<Eigen::Index>(k)]);
    return a;
  }

  std::vector<double> act(std::span<const double> obs, ActMode mode, Rng* rng = nullptr) const {
    nn::Vector u = mean(obs);
    if (mode == ActMode::stochastic) {
      require(rng != nullptr, Errc::invalid_argument, "stochastic act needs a generator");
      require(has_log_std(), Errc::invalid_argument, "policy carries no log-std (deployment artifact)");
      for (Eigen::Index k = 0; k < u.size(); ++k) u[k] += std::exp(log_std_[k]) * standard_normal(*rng);
    }
    return squash(u);
  }

  /// Diagonal-Gaussian log density of a pre-squash sample.
  static double log_prob(const nn::Vector& u, const nn::Vector& mu, const nn::Vector& log_std) {
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    double lp = 0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double z = (u[k] - mu[k]) * std::exp(-log_std[k]);
      lp += -0.5 * z * z - log_std[k] - kHalfLog2Pi;
    }
    return lp;
  }

  /// Trainable weights of the trunk, excluding the log-std vector.
  std::size_t param_count() const { return trunk_.param_count(); }

  std::size_t resident_bytes() const {
    return sizeof(*this) + trunk_.resident_bytes() + static_cast<std::size_t>(log_std_.size()) * sizeof(double) +
           scale_.capacity() * sizeof(double) + encoder_.resident_bytes() + codec_id_.capacity();
  }

  static std::vector<int> layer_sizes(std::size_t in, const std::vector<int>& hidden, std::size_t out) {
    std::vector<int> s = {static_cast<int>(in)};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(static_cast<int>(out));
    return s;
  }

 private:
  nn::Mlp trunk_;
  nn::Vector log_std_;
  std::vector<double> scale_;
  ObservationEncoder encoder_;
  std::string codec_id_;
};

/// Trunk parameters follow in_i * out_i + out_i per layer; the log-std head
/// is reported separately.
struct PolicyFootprint {
  std::size_t param_count = 0;
  std::size_t log_std_params = 0;
  std::size_t serialized_bytes = 0;
};

inline std::size_t policy_param_formula(std::size_t in, const std::vector<int>& hidden, std::size_t out) {
  std::size_t n = 0;
  std::size_t prev = in;
  for (int h : hidden) {
    n += prev * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
    prev = static_cast<std::size_t>(h);
  }
  return n + prev * out + out;
}

namespace policy_io {

inline constexpr char kMagic[8] = {'N', 'R', 'L', 'P', 'O', 'L', 'I', 'C'};
inline constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& i) {
  T v{};
  i.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!i) throw Error(Errc::format_error, "truncated policy container");
  return v;
}

inline void put_string(std::ostream& o, const std::string& s) {
  put<std::uint32_t>(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& i) {
  const auto n = get<std::uint32_t>(i);
  require(n < (1u << 20), Errc::format_error, "policy container string too long");
  std::string s(n, '\0');
  i.read(s.data(), n);
  if (!i) throw Error(Errc::format_error, "truncated policy container");
  return s;
}

inline void put_u32s(std::ostream& o, const std::vector<std::uint32_t>& v) {
  put<std::uint32_t>(o, static_cast<std::uint32_t>(v.size()));
  for (auto x : v) put(o, x);
}

inline std::vector<std::uint32_t> get_u32s(std::istream& i) {
  const auto n = get<std::uint32_t>(i);
  require(n < (1u << 24), Errc::format_error, "policy container vocabulary too long");
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) x = get<std::uint32_t>(i);
  return v;
}

}  // namespace policy_io

/// Binary container: magic, version, dims, action scale, codec id, the
/// observation encoder, float32 trunk weights, then an optional log-std block
/// that deployment ignores.
inline void write_policy(std::ostream& o, const PolicyNet& p, bool include_log_std = false) {
  using namespace policy_io;
  o.write(kMagic, sizeof(kMagic));
  put(o, kVersion);
  put<std::uint32_t>(o, static_cast<std::uint32_t>(p.obs_dim()));
  put<std::uint32_t>(o, static_cast<std::uint32_t>(p.action_dim()));
  const auto hidden = p.hidden();
  put<std::uint32_t>(o, static_cast<std::uint32_t>(hidden.size()));
  for (int h : hidden) put<std::uint32_t>(o, static_cast<std::uint32_t>(h));
  for (double s : p.action_scale()) put(o, s);
  put_string(o, p.codec_id());
  const auto& enc = p.encoder();
  put_u32s(o, enc.protocols());
  put_u32s(o, enc.dst_ports());
  put(o, enc.bytes_range().min_log);
  put(o, enc.bytes_range().max_log);
  put(o, enc.pkts_range().min_log);
  put(o, enc.pkts_range().max_log);
  const auto& w = p.trunk().params();
  put<std::uint64_t>(o, static_cast<std::uint64_t>(w.size()));
  for (Eigen::Index k = 0; k < w.size(); ++k) put(o, static_cast<float>(w[k]));
  const bool with_std = include_log_std && p.has_log_std();
  put<std::uint8_t>(o, with_std ? 1 : 0);
  if (with_std) {
    for (Eigen::Index k = 0; k < p.log_std().size(); ++k) put(o, static_cast<float>(p.log_std()[k]));
  }
}

inline PolicyNet read_policy(std::istream& i) {
  using namespace policy_io;
  char magic[sizeof(kMagic)];
  i.read(magic, sizeof(magic));
  if (!i || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(Errc::format_error, "not a policy container");
  const auto version = get<std::uint32_t>(i);
  require(version == kVersion, Errc::format_error, "unsupported policy container version");
  const auto obs_dim = get<std::uint32_t>(i);
  const auto act_dim = get<std::uint32_t>(i);
  const auto n_hidden = get<std::uint32_t>(i);
  require(n_hidden < 16 && act_dim > 0 && act_dim < 64, Errc::format_error, "implausible policy dims");
  std::vector<int> hidden(n_hidden);
  for (auto& h : hidden) h = static_cast<int>(get<std::uint32_t>(i));
  std::vector<double> scale(act_dim);
  for (auto& s : scale) s = get<double>(i);
  PolicyNet p(obs_dim, scale, hidden);
  p.set_codec_id(get_string(i));
  auto protocols = get_u32s(i);
  auto ports = get_u32s(i);
  NumericRange br{get<double>(i), get<double>(i)};
  NumericRange pr{get<double>(i), get<double>(i)};
  ObservationEncoder enc(std::move(protocols), std::move(ports), br, pr);
  check_dim(enc.dim(), obs_dim, "policy observation encoder");
  p.set_encoder(std::move(enc));
  const auto n = get<std::uint64_t>(i);
  check_dim(n, p.trunk().param_count(), "policy weights");
  auto& w = p.trunk().params();
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = get<float>(i);
  if (get<std::uint8_t>(i) == 1) {
    for (Eigen::Index k = 0; k < p.log_std().size(); ++k) p.log_std()[k] = get<float>(i);
  } else {
    p.drop_log_std();
  }
  return p;
}

inline void save_policy(const std::string& path, const PolicyNet& p, bool include_log_std = false) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error(Errc::io_error, "cannot write " + path);
  write_policy(o, p, include_log_std);
}

inline PolicyNet load_policy(const std::string& path) {
  std::ifstream i(path, std::ios::binary);
  if (!i) throw Error(Errc::missing_upstream_artifact, "cannot open policy " + path);
  return read_policy(i);
}

inline PolicyFootprint policy_footprint(const PolicyNet& p) {
  std::ostringstream o;
  write_policy(o, p, false);
  return {p.param_count(), static_cast<std::size_t>(p.log_std().size()), o.str().size()};
}

/// Rolls the policy forward for budget.steps deterministic steps from
/// `flow`, observing only ingress features, then applies the clipped running
/// sum through the shared feasibility routine. No classifier is consulted.
inline FlowRecord rollout_deploy(const PolicyNet& policy, const FlowRecord& flow, const BudgetSpec& budget,
                                 Triple* delta_out = nullptr) {
  budget.validate();
  check_dim(policy.obs_dim(), policy.encoder().dim(), "rollout_deploy observation");
  check_dim(policy.action_dim(), kActionDim, "rollout_deploy action");
  Triple cumulative{};
  FlowRecord current = flow;
  std::vector<double> obs(policy.obs_dim());
  for (int t = 0; t < budget.steps; ++t) {
    policy.encoder().encode_into(current, t, budget.steps, obs);
    const auto a = policy.act(obs, ActMode::deterministic);
    advance_cumulative(cumulative, Triple{a[0], a[1], a[2]}, budget);
    const Triple box = budget.total();
    for (std::size_t k = 0; k < kActionDim; ++k) {
      numeric(current, kAxisFeature[k]) = offset_within(numeric(flow, kAxisFeature[k]), cumulative[k], box[k]);
    }
  }
  if (delta_out) *delta_out = cumulative;
  return apply_perturbation(flow, cumulative, budget.total());
}

}  // namespace nidsrl
