#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nidsrl/error.hpp"
#include "nidsrl/feature_codec.hpp"
#include "nidsrl/flow_record.hpp"
#include "nidsrl/nids_zoo.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

/// Index of each perturbable feature inside an action or perturbation triple.
enum ActionAxis : std::size_t { kDelay = 0, kBytes = 1, kPkts = 2 };
inline constexpr std::size_t kActionDim = 3;
using Triple = std::array<double, kActionDim>;

inline constexpr std::array<NumericFeature, kActionDim> kAxisFeature = {
    NumericFeature::flow_duration, NumericFeature::in_bytes, NumericFeature::in_pkts};

/// Episode-level caps on added delay (ms), ingress bytes and ingress packets.
struct BudgetSpec {
  double max_bytes = 100000;
  double max_pkts = 100;
  double max_delay_ms = 100000;
  int steps = 10;

  void validate() const {
    require(steps >= 1, Errc::invalid_argument, "budget steps must be >= 1");
    require(max_bytes >= 0 && max_pkts >= 0 && max_delay_ms >= 0, Errc::invalid_argument,
            "budget maxima must be >= 0");
  }

  /// Episode maxima in axis order.
  Triple total() const { return {max_delay_ms, max_bytes, max_pkts}; }

  Triple per_step() const {
    const Triple m = total();
    const double t = steps;
    return {m[0] / t, m[1] / t, m[2] / t};
  }

  bool operator==(const BudgetSpec&) const = default;
};

/// Clips a cumulative perturbation into the nonnegative budget box.
inline Triple clip_to_box(const Triple& delta, const Triple& box) {
  Triple out{};
  for (std::size_t k = 0; k < kActionDim; ++k) out[k] = std::clamp(delta[k], 0.0, box[k]);
  return out;
}

/// Single feasibility routine shared by agent deployment and every baseline:
/// clip to [0, box], add to the flow, and round byte/packet counts to the
/// nearest integer that is not below the original.
/// base + delta, stepped down by ulps when rounding would leave the stored
/// offset above `cap`.
inline double offset_within(double base, double delta, double cap) {
  double v = base + delta;
  while (v - base > cap) v = std::nextafter(v, -std::numeric_limits<double>::infinity());
  return v;
}

inline FlowRecord apply_perturbation(const FlowRecord& flow, const Triple& delta, const Triple& box) {
  const Triple d = clip_to_box(delta, box);
  FlowRecord out = flow;
  out.flow_duration_ms = offset_within(flow.flow_duration_ms, d[kDelay], box[kDelay]);
  out.in_bytes = std::max(flow.in_bytes, std::round(flow.in_bytes + d[kBytes]));
  out.in_pkts = std::max(flow.in_pkts, std::round(flow.in_pkts + d[kPkts]));
  // rounding never crosses the cap because originals and caps are integers
  out.in_bytes = std::min(out.in_bytes, flow.in_bytes + std::floor(box[kBytes]));
  out.in_pkts = std::min(out.in_pkts, flow.in_pkts + std::floor(box[kPkts]));
  return out;
}

inline Triple perturbation_of(const FlowRecord& s0, const FlowRecord& s) {
  return {s.flow_duration_ms - s0.flow_duration_ms, s.in_bytes - s0.in_bytes, s.in_pkts - s0.in_pkts};
}

/// Adds one action to a running perturbation: each component is clamped to
/// the per-step bound and the sum is clipped into [0, episode budget].
/// Returns the change actually applied.
inline Triple advance_cumulative(Triple& cumulative, const Triple& action, const BudgetSpec& budget) {
  const Triple eps = budget.per_step();
  const Triple box = budget.total();
  Triple applied{};
  for (std::size_t k = 0; k < kActionDim; ++k) {
    const double a = std::isfinite(action[k]) ? std::clamp(action[k], -eps[k], eps[k]) : 0.0;
    const double next = std::clamp(cumulative[k] + a, 0.0, box[k]);
    applied[k] = next - cumulative[k];
    cumulative[k] = next;
  }
  return applied;
}

/// Step reward: zero while the surrogate still flags the flow, otherwise one
/// minus the largest fraction of any axis' episode budget consumed.
inline double evasion_reward(int surrogate_decision, const Triple& cumulative, const Triple& total) {
  if (surrogate_decision != 0) return 0.0;
  double worst = 0;
  for (std::size_t k = 0; k < kActionDim; ++k) {
    if (total[k] > 0) worst = std::max(worst, cumulative[k] / total[k]);
  }
  return 1.0 - worst;
}

/// Ingress-only view used by the policy: protocol and destination-port
/// one-hots, scaled ingress bytes and packets, and the progress fraction t/T.
/// Self-contained so a deployed policy needs no codec.
class ObservationEncoder {
 public:
  ObservationEncoder() = default;

  explicit ObservationEncoder(const FeatureCodec& codec)
      : protocols_(codec.vocabulary(CategoricalFeature::protocol)),
        dst_ports_(codec.vocabulary(CategoricalFeature::l4_dst_port)),
        bytes_range_(codec.range(NumericFeature::in_bytes)),
        pkts_range_(codec.range(NumericFeature::in_pkts)) {}

  ObservationEncoder(std::vector<std::uint32_t> protocols, std::vector<std::uint32_t> dst_ports,
                     NumericRange bytes_range, NumericRange pkts_range)
      : protocols_(std::move(protocols)),
        dst_ports_(std::move(dst_ports)),
        bytes_range_(bytes_range),
        pkts_range_(pkts_range) {}

  std::size_t dim() const { return protocols_.size() + 1 + dst_ports_.size() + 1 + 3; }

  void encode_into(const FlowRecord& flow, int t, int steps, std::span<double> out) const {
    check_dim(out.size(), dim(), "ObservationEncoder::encode_into");
    std::fill(out.begin(), out.end(), 0.0);
    out[slot(protocols_, flow.protocol)] = 1.0;
    const std::size_t port_base = protocols_.size() + 1;
    out[port_base + slot(dst_ports_, flow.l4_dst_port)] = 1.0;
    const std::size_t num_base = port_base + dst_ports_.size() + 1;
    out[num_base] = scale(bytes_range_, flow.in_bytes);
    out[num_base + 1] = scale(pkts_range_, flow.in_pkts);
    out[num_base + 2] = steps > 0 ? static_cast<double>(t) / steps : 0.0;
  }

  std::vector<double> encode(const FlowRecord& flow, int t, int steps) const {
    std::vector<double> v(dim());
    encode_into(flow, t, steps, v);
    return v;
  }

  const std::vector<std::uint32_t>& protocols() const { return protocols_; }
  const std::vector<std::uint32_t>& dst_ports() const { return dst_ports_; }
  NumericRange bytes_range() const { return bytes_range_; }
  NumericRange pkts_range() const { return pkts_range_; }

  std::size_t resident_bytes() const {
    return sizeof(*this) + (protocols_.capacity() + dst_ports_.capacity()) * sizeof(std::uint32_t);
  }

  bool operator==(const ObservationEncoder&) const = default;

 private:
  static std::size_t slot(const std::vector<std::uint32_t>& vocab, std::uint32_t v) {
    const auto it = std::find(vocab.begin(), vocab.end(), v);
    return static_cast<std::size_t>(it - vocab.begin());
  }
  static double scale(const NumericRange& r, double raw) {
    if (r.max_log <= r.min_log) return 0.0;
    return std::clamp((std::log1p(std::max(raw, 0.0)) - r.min_log) / (r.max_log - r.min_log), 0.0, 1.0);
  }

  std::vector<std::uint32_t> protocols_;
  std::vector<std::uint32_t> dst_ports_;
  NumericRange bytes_range_;
  NumericRange pkts_range_;
};

struct TraceStep {
  int t = 0;
  Triple action{};
  Triple clipped{};
  double reward = 0;
  int decision = 1;
};

inline nlohmann::json to_json(const TraceStep& s) {
  return {{"t", s.t},
          {"action", {{"delay_ms", s.action[kDelay]}, {"bytes", s.action[kBytes]}, {"pkts", s.action[kPkts]}}},
          {"clipped_action",
           {{"delay_ms", s.clipped[kDelay]}, {"bytes", s.clipped[kBytes]}, {"pkts", s.clipped[kPkts]}}},
          {"reward", s.reward},
          {"surrogate_decision", s.decision}};
}

inline void write_trace_jsonl(std::ostream& out, std::span<const TraceStep> trace) {
  for (const auto& s : trace) out << to_json(s).dump() << '\n';
}

/// One rollout of the evasion process. `current` differs from `s0` only on
/// ingress bytes, ingress packets and duration.
struct EvasionEpisode {
  FlowRecord s0;
  FlowRecord current;
  BudgetSpec budget;
  Triple cumulative{};
  int t = 0;
  bool done = false;
  int first_evasion_step = -1;  // 1-based step index of the first benign decision
  std::vector<TraceStep> trace;
  bool keep_trace = false;

  EvasionEpisode() = default;
  EvasionEpisode(const FlowRecord& start, const BudgetSpec& b) : s0(start), current(start), budget(b) {
    budget.validate();
  }
};

struct StepOutcome {
  double reward = 0;
  int decision = 1;
  bool done = false;
};

/// Applies one action: clamp to the per-step bound, accumulate, clip the
/// running sum into [0, episode budget], rewrite the ingress features and
/// score the full state with the surrogate.
template <FlowScorer Surrogate>
StepOutcome step_episode(EvasionEpisode& ep, const Triple& action, const Surrogate& surrogate) {
  if (ep.done) throw Error(Errc::episode_done, "step called on a finished episode");
  const Triple box = ep.budget.total();
  const Triple applied = advance_cumulative(ep.cumulative, action, ep.budget);
  for (std::size_t k = 0; k < kActionDim; ++k) {
    numeric(ep.current, kAxisFeature[k]) = offset_within(numeric(ep.s0, kAxisFeature[k]), ep.cumulative[k], box[k]);
  }
  ++ep.t;
  ep.done = ep.t >= ep.budget.steps;

  StepOutcome out;
  out.decision = surrogate.decide(ep.current);
  out.reward = evasion_reward(out.decision, ep.cumulative, box);
  out.done = ep.done;
  if (out.decision == 0 && ep.first_evasion_step < 0) ep.first_evasion_step = ep.t;
  if (ep.keep_trace) ep.trace.push_back({ep.t, action, applied, out.reward, out.decision});
  return out;
}

struct EnvStep {
  std::vector<double> obs;
  double reward = 0;
  bool done = false;
};

/// Training environment: each reset draws a malicious flow uniformly from the
/// pool; the surrogate scores every step.
template <FlowScorer Surrogate>
class EvasionEnv {
 public:
  EvasionEnv(const FlowSet& flows, const Surrogate& surrogate, ObservationEncoder obs, BudgetSpec budget,
             std::uint64_t seed)
      : surrogate_(&surrogate), obs_(std::move(obs)), budget_(budget), rng_(seed) {
    budget_.validate();
    for (const auto& f : flows) {
      if (f.label == 1) pool_.push_back(f);
    }
    if (pool_.empty()) throw Error(Errc::no_malicious_samples, "evasion environment has no malicious flows");
  }

  std::size_t obs_dim() const { return obs_.dim(); }
  std::size_t action_dim() const { return kActionDim; }
  std::vector<double> action_bound() const {
    const Triple e = budget_.per_step();
    return {e.begin(), e.end()};
  }
  const BudgetSpec& budget() const { return budget_; }
  const ObservationEncoder& observation_encoder() const { return obs_; }
  const EvasionEpisode& episode() const { return ep_; }
  EvasionEpisode& episode() { return ep_; }
  std::size_t pool_size() const { return pool_.size(); }
  std::size_t last_index() const { return last_index_; }

  std::vector<double> reset() {
    last_index_ = uniform_index(rng_, pool_.size());
    ep_ = EvasionEpisode(pool_[last_index_], budget_);
    return obs_.encode(ep_.current, 0, budget_.steps);
  }

  EnvStep step(std::span<const double> action) {
    check_dim(action.size(), kActionDim, "EvasionEnv::step");
    const auto r = step_episode(ep_, Triple{action[0], action[1], action[2]}, *surrogate_);
    return {obs_.encode(ep_.current, ep_.t, budget_.steps), r.reward, r.done};
  }

 private:
  const Surrogate* surrogate_;
  ObservationEncoder obs_;
  BudgetSpec budget_;
  Rng rng_;
  FlowSet pool_;
  EvasionEpisode ep_;
  std::size_t last_index_ = 0;
};

}  // namespace nidsrl
