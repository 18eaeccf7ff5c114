#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nidsrl/error.hpp"
#include "nidsrl/flow_record.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

// Synthetic NetFlow generator standing in for the public corpora in tests and
// smoke runs. Volumetric attacks (DoS, brute force, exploit uploads) differ
// from benign traffic mainly in ingress counts and timing; persistence
// malware differs in ports and TCP flags. The split gives agents something to
// learn on the former and nothing to gain on the latter.

struct LogNormal {
  double median = 1;
  double sigma = 0;

  double sample(Rng& rng) const { return median * std::exp(sigma * standard_normal(rng)); }
};

template <typename T>
struct Weighted {
  T value;
  double weight;
};

template <typename T>
const T& pick(const std::vector<Weighted<T>>& items, Rng& rng) {
  double total = 0;
  for (const auto& it : items) total += it.weight;
  double u = uniform01(rng) * total;
  for (const auto& it : items) {
    if (u < it.weight) return it.value;
    u -= it.weight;
  }
  return items.back().value;
}

/// Port value 0 in a port table means "draw an ephemeral port".
struct TrafficTemplate {
  std::vector<Weighted<std::uint32_t>> protocols;
  std::vector<Weighted<std::uint32_t>> tcp_ports;
  std::vector<Weighted<std::uint32_t>> udp_ports;
  std::vector<Weighted<std::uint32_t>> tcp_flags;
  LogNormal in_pkts;
  LogNormal in_pkt_size;
  LogNormal out_pkts;
  LogNormal out_pkt_size;
  LogNormal duration_ms;
  double one_way_fraction = 0;  // flows whose egress collapses to a single small packet
  bool one_way_udp_only = false;
  std::shared_ptr<const TrafficTemplate> variant;  // drawn instead with probability variant_fraction
  double variant_fraction = 0;
};

struct AttackMix {
  std::string name;
  double weight;
};

struct SyntheticProfile {
  std::string name = "enterprise";
  double malicious_fraction = 0.3;
  double volume_scale = 1.0;   // multiplies every packet-size median
  double duration_scale = 1.0; // multiplies every duration median
  std::vector<AttackMix> mix;
  std::vector<Weighted<std::uint32_t>> benign_tcp_ports;
  std::vector<Weighted<std::uint32_t>> benign_udp_ports;
  std::vector<Weighted<std::uint32_t>> backdoor_ports;

  static SyntheticProfile enterprise() {
    SyntheticProfile p;
    p.mix = {{"DDoS", .15},      {"DoS", .12},       {"Reconnaissance", .10}, {"Scanning", .05},
             {"Analysis", .02},  {"Brute Force", .10}, {"Password", .04},     {"Theft", .01},
             {"Exploits", .10},  {"Injection", .06}, {"XSS", .04},            {"Fuzzers", .05},
             {"Backdoor", .04},  {"Bot", .03},       {"Worms", .01},          {"Ransomware", .01},
             {"Shellcode", .02}, {"Generic", .03},   {"MITM", .01},           {"Infiltration", .01}};
    p.benign_tcp_ports = {{443, .35}, {80, .25}, {22, .05}, {25, .04}, {8080, .05}, {3389, .03},
                          {993, .03}, {445, .04}, {143, .02}, {110, .02}, {21, .02}, {0, .10}};
    p.benign_udp_ports = {{53, .60}, {123, .15}, {137, .05}, {161, .05}, {1900, .05}, {0, .10}};
    p.backdoor_ports = {{4444, .3}, {6667, .2}, {31337, .2}, {5555, .15}, {9001, .15}};
    return p;
  }

  /// Out-of-distribution sibling: IoT-style ports, smaller packets, a
  /// recon/flood heavy attack mix.
  static SyntheticProfile iot() {
    SyntheticProfile p;
    p.name = "iot";
    p.malicious_fraction = 0.45;
    p.volume_scale = 0.6;
    p.duration_scale = 0.5;
    p.mix = {{"DDoS", .25},     {"DoS", .20},      {"Reconnaissance", .15}, {"Scanning", .05},
             {"Password", .08}, {"Theft", .02},    {"Injection", .07},      {"XSS", .03},
             {"Backdoor", .05}, {"Ransomware", .02}, {"Bot", .03},          {"MITM", .05}};
    p.benign_tcp_ports = {{1883, .25}, {8883, .10}, {80, .20}, {443, .20}, {23, .03},
                          {8080, .07}, {0, .15}};
    p.benign_udp_ports = {{5683, .30}, {53, .40}, {123, .15}, {0, .15}};
    p.backdoor_ports = {{4444, .3}, {6667, .3}, {23231, .2}, {48101, .2}};
    return p;
  }

  /// Only volumetric floods and port-signature persistence malware.
  static SyntheticProfile volumetric_vs_signature() {
    SyntheticProfile p = enterprise();
    p.name = "volumetric";
    p.mix = {{"DDoS", .30}, {"DoS", .20}, {"Backdoor", .20}, {"Bot", .15}, {"Shellcode", .15}};
    return p;
  }

  static SyntheticProfile by_name(const std::string& name) {
    if (name == "enterprise") return enterprise();
    if (name == "iot") return iot();
    if (name == "volumetric") return volumetric_vs_signature();
    throw Error(Errc::invalid_argument, "unknown synthetic profile '" + name + "'");
  }
};

namespace synth_detail {

inline TrafficTemplate benign_template(const SyntheticProfile& p) {
  TrafficTemplate t;
  t.protocols = {{6, .75}, {17, .22}, {1, .03}};
  t.tcp_ports = p.benign_tcp_ports;
  t.udp_ports = p.benign_udp_ports;
  t.tcp_flags = {{27, .40}, {31, .20}, {26, .15}, {24, .15}, {30, .10}};
  t.in_pkts = {12, 0.9};
  t.in_pkt_size = {350, 0.5};
  t.out_pkts = {10, 1.0};
  t.out_pkt_size = {600, 0.8};
  t.duration_ms = {3000, 1.3};
  // benign one-way traffic is datagram telemetry (syslog, traps), never TCP
  t.one_way_fraction = 0.15;
  t.one_way_udp_only = true;
  return t;
}

inline TrafficTemplate attack_template(const SyntheticProfile& p, AttackCategory c,
                                       const std::string& name) {
  TrafficTemplate t;
  const std::vector<Weighted<std::uint32_t>> web = {{80, .5}, {443, .35}, {8080, .15}};
  switch (c) {
    case AttackCategory::DenialOfService:
      t.protocols = {{6, .85}, {17, .15}};
      t.tcp_ports = web;
      t.udp_ports = {{53, .5}, {123, .5}};
      t.tcp_flags = {{2, .25}, {27, .30}, {24, .25}, {26, .20}};
      t.in_pkts = {2, 0.5};
      t.in_pkt_size = {60, 0.3};
      t.out_pkts = {1, 0.7};
      t.out_pkt_size = {60, 0.4};
      t.duration_ms = {800, 1.5};
      t.one_way_fraction = 0.8;
      if (name == "DDoS") {
        // high-rate floods: many small ingress packets, nothing comes back
        TrafficTemplate flood = t;
        flood.protocols = {{6, .75}, {17, .25}};
        flood.tcp_flags = {{2, .6}, {24, .2}, {26, .2}};
        flood.in_pkts = {400, 0.8};
        flood.in_pkt_size = {80, 0.4};
        flood.duration_ms = {2000, 1.0};
        flood.one_way_fraction = 1.0;
        t.variant = std::make_shared<const TrafficTemplate>(flood);
        t.variant_fraction = 0.5;
      }
      break;
    case AttackCategory::DiscoveryRecon:
      t.protocols = {{6, .9}, {17, .1}};
      t.tcp_ports = {{0, .6}, {22, .1}, {80, .15}, {443, .15}};
      t.udp_ports = {{0, .5}, {161, .5}};
      t.tcp_flags = {{2, .40}, {27, .30}, {24, .30}};
      t.in_pkts = {1.2, 0.3};
      t.in_pkt_size = {50, 0.15};
      t.out_pkts = {1, 0.3};
      t.out_pkt_size = {50, 0.2};
      t.duration_ms = {60, 1.5};
      t.one_way_fraction = 0.85;
      break;
    case AttackCategory::AccessAuth:
      t.protocols = {{6, 1.0}};
      t.tcp_ports = {{22, .5}, {21, .2}, {3389, .15}, {80, .15}};
      t.tcp_flags = {{27, .5}, {31, .3}, {24, .2}};
      t.in_pkts = {15, 0.3};
      t.in_pkt_size = {80, 0.2};
      t.out_pkts = {12, 0.3};
      t.out_pkt_size = {90, 0.3};
      t.duration_ms = {2500, 0.6};
      break;
    case AttackCategory::ExploitInject:
      t.protocols = {{6, 1.0}};
      t.tcp_ports = web;
      t.tcp_flags = {{18, .5}, {22, .3}, {24, .2}};
      t.in_pkts = {8, 0.6};
      t.in_pkt_size = {700, 0.4};
      t.out_pkts = {6, 0.6};
      t.out_pkt_size = {500, 0.6};
      t.duration_ms = {1500, 0.8};
      break;
    case AttackCategory::MalwarePersist:
      t.protocols = {{6, 1.0}};
      t.tcp_ports = p.backdoor_ports;
      t.tcp_flags = {{25, .5}, {29, .3}, {27, .2}};
      t.in_pkts = {12, 0.9};
      t.in_pkt_size = {350, 0.5};
      t.out_pkts = {10, 1.0};
      t.out_pkt_size = {600, 0.8};
      t.duration_ms = {3000, 1.3};
      break;
    case AttackCategory::NetworkOther:
      if (name == "MITM" || name == "Infiltration") {
        t.protocols = {{6, 1.0}};
        t.tcp_ports = {{445, .4}, {3389, .3}, {0, .3}};
        t.tcp_flags = {{29, .5}, {25, .5}};
        t.in_pkts = {30, 0.5};
        t.in_pkt_size = {200, 0.4};
        t.out_pkts = {30, 0.5};
        t.out_pkt_size = {200, 0.4};
        t.duration_ms = {20000, 0.8};
      } else {
        t.protocols = {{17, 1.0}};
        t.udp_ports = {{53, .8}, {111, .2}};
        t.in_pkts = {2, 0.2};
        t.in_pkt_size = {600, 0.2};
        t.out_pkts = {2, 0.2};
        t.out_pkt_size = {60, 0.2};
        t.duration_ms = {2, 0.5};
      }
      break;
  }
  return t;
}

inline double at_least(double v, double floor_value) { return std::max(v, floor_value); }

inline FlowRecord draw(const TrafficTemplate& tmpl, const SyntheticProfile& p, Rng& rng) {
  const TrafficTemplate& t =
      tmpl.variant && uniform01(rng) < tmpl.variant_fraction ? *tmpl.variant : tmpl;
  FlowRecord f;
  f.protocol = pick(t.protocols, rng);
  auto port_from = [&](const std::vector<Weighted<std::uint32_t>>& table) -> std::uint32_t {
    if (table.empty()) return 0;
    const std::uint32_t v = pick(table, rng);
    return v == 0 ? 1024 + static_cast<std::uint32_t>(uniform_index(rng, 64512)) : v;
  };
  if (f.protocol == 6) {
    f.l4_dst_port = port_from(t.tcp_ports);
    f.tcp_flags = pick(t.tcp_flags, rng);
  } else if (f.protocol == 17) {
    f.l4_dst_port = port_from(t.udp_ports);
  }
  f.l4_src_port = f.protocol == 1 ? 0 : 1024 + static_cast<std::uint32_t>(uniform_index(rng, 64512));

  f.in_pkts = std::round(at_least(t.in_pkts.sample(rng), 1));
  const double in_size = at_least(t.in_pkt_size.sample(rng) * p.volume_scale, 40);
  f.in_bytes = std::round(f.in_pkts * in_size);
  const bool one_way = uniform01(rng) < t.one_way_fraction;
  if (one_way && (!t.one_way_udp_only || f.protocol == 17)) {
    f.out_pkts = uniform01(rng) < 0.5 ? 0 : 1;
    f.out_bytes = f.out_pkts * std::round(40 + 20 * uniform01(rng));
  } else {
    f.out_pkts = std::round(at_least(t.out_pkts.sample(rng), 1));
    f.out_bytes = std::round(f.out_pkts * at_least(t.out_pkt_size.sample(rng) * p.volume_scale, 40));
  }
  f.flow_duration_ms = std::round(t.duration_ms.sample(rng) * p.duration_scale);
  return f;
}

}  // namespace synth_detail

/// `n` flows drawn deterministically from `seed`.
inline FlowSet generate_synthetic(std::size_t n, std::uint64_t seed,
                                  const SyntheticProfile& profile = SyntheticProfile::enterprise()) {
  require(n > 0, Errc::invalid_argument, "generate_synthetic needs n > 0");
  require(!profile.mix.empty(), Errc::invalid_argument, "profile has an empty attack mix");
  const auto benign = synth_detail::benign_template(profile);
  std::vector<Weighted<std::size_t>> mix;
  std::vector<TrafficTemplate> templates;
  for (std::size_t k = 0; k < profile.mix.size(); ++k) {
    mix.push_back({k, profile.mix[k].weight});
    templates.push_back(synth_detail::attack_template(profile, categorize(profile.mix[k].name),
                                                      profile.mix[k].name));
  }

  Rng rng(derive_seed(seed, 0x5717));
  FlowSet out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < profile.malicious_fraction) {
      const std::size_t k = pick(mix, rng);
      FlowRecord f = synth_detail::draw(templates[k], profile, rng);
      f.label = 1;
      f.attack = profile.mix[k].name;
      out.push_back(std::move(f));
    } else {
      out.push_back(synth_detail::draw(benign, profile, rng));
    }
  }
  return out;
}

}  // namespace nidsrl
