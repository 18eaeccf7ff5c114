#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nidsrl/error.hpp"
#include "nidsrl/evasion_env.hpp"
#include "nidsrl/nids_zoo.hpp"
#include "nidsrl/policy.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

/// Outcome of attacking one flow. `perturbation` is in axis order
/// (delay, bytes, packets) and is what was actually applied after rounding.
struct AttackResult {
  bool success = false;
  int queries_used = 0;
  Triple perturbation{};
  double wall_latency_ms = 0;
  double final_proba = 1;           // victim probability of the returned flow
  std::vector<double> trace;        // PGD only, when requested: surrogate benign probability per iteration
};

namespace attack_detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <FlowScorer S>
double threshold_of(const S& s) {
  if constexpr (requires { s.threshold(); }) {
    return s.threshold();
  } else {
    return NidsModel::kDefaultThreshold;
  }
}

}  // namespace attack_detail

/// Uniform random search over the raw budget box. Returns the first draw the
/// model calls benign, otherwise the draw with the lowest malicious
/// probability after `query_cap` queries.
template <FlowScorer Model>
AttackResult fuzz_attack(const FlowRecord& flow, const Model& model, const BudgetSpec& budget, int query_cap,
                         std::uint64_t seed) {
  require(query_cap >= 1, Errc::invalid_argument, "fuzz_attack needs query_cap >= 1");
  budget.validate();
  const auto t0 = attack_detail::Clock::now();
  const Triple box = budget.total();
  const double thr = attack_detail::threshold_of(model);
  Rng rng(seed);
  AttackResult r;
  r.final_proba = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= query_cap; ++q) {
    Triple d{};
    for (std::size_t k = 0; k < kActionDim; ++k) d[k] = uniform01(rng) * box[k];
    const FlowRecord cand = apply_perturbation(flow, d, box);
    const double p = model.predict_proba(cand);
    r.queries_used = q;
    if (p < r.final_proba) {
      r.final_proba = p;
      r.perturbation = perturbation_of(flow, cand);
    }
    if (p < thr) {
      r.success = true;
      break;
    }
  }
  r.wall_latency_ms = attack_detail::ms_since(t0);
  return r;
}

struct PgdOptions {
  int steps = 100;
  double step_size = 0.05;  // in log-min-max units of the surrogate's codec
  bool record_trace = false;
};

/// Sign-gradient descent of the surrogate's malicious log-loss over the three
/// perturbable coordinates. The iterate lives in the surrogate's encoded
/// units, is projected into the raw budget box after every step, and each
/// projected point is checked against the victim.
template <FlowScorer Victim>
AttackResult pgd_attack(const FlowRecord& flow, const Victim& victim, const Detector& surrogate,
                        const BudgetSpec& budget, const PgdOptions& opt = {}) {
  require(opt.steps >= 1, Errc::invalid_argument, "pgd_attack needs steps >= 1");
  if (!is_differentiable(surrogate.model.kind())) {
    throw Error(Errc::gradient_unavailable,
                std::string(model_kind_name(surrogate.model.kind())) + " surrogate has no input gradient");
  }
  budget.validate();
  const auto t0 = attack_detail::Clock::now();
  const Triple box = budget.total();
  const double thr = attack_detail::threshold_of(victim);
  const FeatureCodec& codec = surrogate.codec;

  Triple raw0{};
  Triple u{};
  for (std::size_t k = 0; k < kActionDim; ++k) {
    raw0[k] = numeric(flow, kAxisFeature[k]);
    u[k] = codec.log_unit(kAxisFeature[k], raw0[k]);
  }
  Triple delta{};
  FlowRecord iterate = flow;
  std::vector<double> x(codec.dim());
  AttackResult r;
  for (int it = 0; it < opt.steps; ++it) {
    codec.encode_into(iterate, x);
    const auto g = surrogate.model.gradient(x);
    for (std::size_t k = 0; k < kActionDim; ++k) {
      const double gk = (*g)[FeatureCodec::numeric_index(kAxisFeature[k])];
      const double step = gk > 0 ? -opt.step_size : gk < 0 ? opt.step_size : 0.0;
      const double raw = codec.from_log_unit(kAxisFeature[k], u[k] + step);
      delta[k] = std::clamp(raw - raw0[k], 0.0, box[k]);
      u[k] = codec.log_unit(kAxisFeature[k], raw0[k] + delta[k]);
      numeric(iterate, kAxisFeature[k]) = raw0[k] + delta[k];
    }
    if (opt.record_trace) {
      codec.encode_into(iterate, x);
      r.trace.push_back(1.0 - surrogate.model.predict_proba(x));
    }
    const FlowRecord cand = apply_perturbation(flow, delta, box);
    const double p = victim.predict_proba(cand);
    ++r.queries_used;
    r.final_proba = p;
    r.perturbation = perturbation_of(flow, cand);
    if (p < thr) {
      r.success = true;
      break;
    }
  }
  r.wall_latency_ms = attack_detail::ms_since(t0);
  return r;
}

/// Deterministic policy rollout judged once by the victim. Latency covers the
/// rollout only; the verdict is the evaluation, not part of the attack.
template <FlowScorer Victim>
AttackResult agent_attack(const PolicyNet& policy, const FlowRecord& flow, const Victim& victim,
                          const BudgetSpec& budget) {
  const auto t0 = attack_detail::Clock::now();
  const FlowRecord out = rollout_deploy(policy, flow, budget);
  AttackResult r;
  r.wall_latency_ms = attack_detail::ms_since(t0);
  r.final_proba = victim.predict_proba(out);
  r.queries_used = 1;
  r.success = r.final_proba < attack_detail::threshold_of(victim);
  r.perturbation = perturbation_of(flow, out);
  return r;
}

/// One line of the per-flow attack table.
struct AttackRow {
  std::size_t flow_index = 0;
  std::string method;
  double memory_bytes = 0;  // peak for the whole run the flow belonged to
  AttackResult result;
};

inline void write_attack_csv(std::ostream& o, std::span<const AttackRow> rows) {
  o << "flow,method,memory_mb,latency_ms,bytes,packets,delay_ms,success,queries\n";
  o.precision(10);
  for (const auto& row : rows) {
    const auto& r = row.result;
    o << row.flow_index << ',' << row.method << ',' << row.memory_bytes / 1e6 << ',' << r.wall_latency_ms << ','
      << r.perturbation[kBytes] << ',' << r.perturbation[kPkts] << ',' << r.perturbation[kDelay] << ','
      << (r.success ? 1 : 0) << ',' << r.queries_used << '\n';
  }
}

}  // namespace nidsrl
