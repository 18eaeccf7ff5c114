#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nidsrl {

/// One bidirectional NetFlow-v9 sample. Counts are stored as doubles so that
/// perturbed (pre-rounding) states can live in the same type.
struct FlowRecord {
  std::uint32_t protocol = 0;
  std::uint32_t l4_dst_port = 0;
  std::uint32_t l4_src_port = 0;
  std::uint32_t tcp_flags = 0;
  double in_bytes = 0;
  double in_pkts = 0;
  double out_bytes = 0;
  double out_pkts = 0;
  double flow_duration_ms = 0;
  int label = 0;
  std::string attack;

  bool operator==(const FlowRecord&) const = default;
};

using FlowSet = std::vector<FlowRecord>;

enum class NumericFeature : std::size_t { in_bytes, in_pkts, out_bytes, out_pkts, flow_duration };
enum class CategoricalFeature : std::size_t { protocol, l4_dst_port, l4_src_port, tcp_flags };

inline constexpr std::size_t kNumNumeric = 5;
inline constexpr std::size_t kNumCategorical = 4;

inline constexpr std::array<std::string_view, kNumNumeric> kNumericNames = {
    "IN_BYTES", "IN_PKTS", "OUT_BYTES", "OUT_PKTS", "FLOW_DURATION_MILLISECONDS"};
inline constexpr std::array<std::string_view, kNumCategorical> kCategoricalNames = {
    "PROTOCOL", "L4_DST_PORT", "L4_SRC_PORT", "TCP_FLAGS"};

inline double& numeric(FlowRecord& f, NumericFeature which) {
  switch (which) {
    case NumericFeature::in_bytes: return f.in_bytes;
    case NumericFeature::in_pkts: return f.in_pkts;
    case NumericFeature::out_bytes: return f.out_bytes;
    case NumericFeature::out_pkts: return f.out_pkts;
    case NumericFeature::flow_duration: return f.flow_duration_ms;
  }
  return f.in_bytes;
}

inline double numeric(const FlowRecord& f, NumericFeature which) {
  return numeric(const_cast<FlowRecord&>(f), which);
}

inline std::uint32_t& categorical(FlowRecord& f, CategoricalFeature which) {
  switch (which) {
    case CategoricalFeature::protocol: return f.protocol;
    case CategoricalFeature::l4_dst_port: return f.l4_dst_port;
    case CategoricalFeature::l4_src_port: return f.l4_src_port;
    case CategoricalFeature::tcp_flags: return f.tcp_flags;
  }
  return f.protocol;
}

inline std::uint32_t categorical(const FlowRecord& f, CategoricalFeature which) {
  return categorical(const_cast<FlowRecord&>(f), which);
}

/// The three ingress features an agent may perturb, in action order.
inline constexpr std::array<NumericFeature, 3> kActionFeatures = {
    NumericFeature::flow_duration, NumericFeature::in_bytes, NumericFeature::in_pkts};

enum class AttackCategory {
  DiscoveryRecon,
  DenialOfService,
  AccessAuth,
  ExploitInject,
  MalwarePersist,
  NetworkOther,
};

inline constexpr std::array<AttackCategory, 6> kAllCategories = {
    AttackCategory::DiscoveryRecon, AttackCategory::DenialOfService,
    AttackCategory::AccessAuth,     AttackCategory::ExploitInject,
    AttackCategory::MalwarePersist, AttackCategory::NetworkOther};

constexpr std::string_view category_name(AttackCategory c) {
  switch (c) {
    case AttackCategory::DiscoveryRecon: return "DiscoveryRecon";
    case AttackCategory::DenialOfService: return "DenialOfService";
    case AttackCategory::AccessAuth: return "AccessAuth";
    case AttackCategory::ExploitInject: return "ExploitInject";
    case AttackCategory::MalwarePersist: return "MalwarePersist";
    case AttackCategory::NetworkOther: return "NetworkOther";
  }
  return "NetworkOther";
}

namespace detail {
inline std::string normalize_attack_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}
}  // namespace detail

/// Total mapping from attack labels onto the six categories. Matching ignores
/// case, whitespace and punctuation, so "Brute Force", "brute-force" and
/// "BruteForce" agree; plural and dataset-specific spellings are folded in.
inline AttackCategory categorize(std::string_view attack_name) {
  struct Entry {
    std::string_view key;
    AttackCategory category;
  };
  static constexpr std::array<Entry, 24> table = {{
      {"reconnaissance", AttackCategory::DiscoveryRecon},
      {"scanning", AttackCategory::DiscoveryRecon},
      {"analysis", AttackCategory::DiscoveryRecon},
      {"dos", AttackCategory::DenialOfService},
      {"ddos", AttackCategory::DenialOfService},
      {"bruteforce", AttackCategory::AccessAuth},
      {"password", AttackCategory::AccessAuth},
      {"theft", AttackCategory::AccessAuth},
      {"injection", AttackCategory::ExploitInject},
      {"xss", AttackCategory::ExploitInject},
      {"fuzzers", AttackCategory::ExploitInject},
      {"exploits", AttackCategory::ExploitInject},
      {"worms", AttackCategory::MalwarePersist},
      {"ransomware", AttackCategory::MalwarePersist},
      {"bot", AttackCategory::MalwarePersist},
      {"backdoor", AttackCategory::MalwarePersist},
      {"shellcode", AttackCategory::MalwarePersist},
      {"mitm", AttackCategory::NetworkOther},
      {"infiltration", AttackCategory::NetworkOther},
      {"generic", AttackCategory::NetworkOther},
      // common spelling variants found in the NetFlow corpora
      {"backdoors", AttackCategory::MalwarePersist},
      {"botnet", AttackCategory::MalwarePersist},
      {"worm", AttackCategory::MalwarePersist},
      {"exploit", AttackCategory::ExploitInject},
  }};
  const std::string key = detail::normalize_attack_name(attack_name);
  const auto it = std::find_if(table.begin(), table.end(),
                               [&](const Entry& e) { return e.key == key; });
  return it == table.end() ? AttackCategory::NetworkOther : it->category;
}

inline std::size_t count_malicious(const FlowSet& flows) {
  return static_cast<std::size_t>(
      std::count_if(flows.begin(), flows.end(), [](const FlowRecord& f) { return f.label == 1; }));
}

}  // namespace nidsrl
