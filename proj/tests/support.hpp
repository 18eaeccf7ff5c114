#pragma once

#include <cstdint>
#include <string>

#include "nidsrl/flow_record.hpp"

namespace nidsrl::testing {

inline FlowRecord flow(double in_bytes, double in_pkts, double duration_ms, int label = 1,
                       std::string attack = "DoS", std::uint32_t protocol = 6, std::uint32_t dst_port = 80) {
  FlowRecord f;
  f.protocol = protocol;
  f.l4_dst_port = dst_port;
  f.l4_src_port = 40000;
  f.tcp_flags = 27;
  f.in_bytes = in_bytes;
  f.in_pkts = in_pkts;
  f.out_bytes = 2 * in_bytes;
  f.out_pkts = in_pkts;
  f.flow_duration_ms = duration_ms;
  f.label = label;
  f.attack = label ? std::move(attack) : "Benign";
  return f;
}

/// Malicious until ingress bytes reach `cut`.
struct BytesCutScorer {
  double cut = 0;
  double predict_proba(const FlowRecord& f) const { return f.in_bytes >= cut ? 0.2 : 0.8; }
  int decide(const FlowRecord& f) const { return predict_proba(f) >= 0.5 ? 1 : 0; }
};

/// Fixed verdict regardless of input.
struct ConstantScorer {
  int verdict = 1;
  double predict_proba(const FlowRecord&) const { return verdict ? 0.9 : 0.1; }
  int decide(const FlowRecord&) const { return verdict; }
};

}  // namespace nidsrl::testing
