#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nidsrl/error.hpp"
#include "nidsrl/flow_record.hpp"

namespace nidsrl {

/// Maps the logical NetFlow columns onto header names. Defaults follow the
/// NF-v2 corpora (UNSW-NB15, ToN-IoT, BoT-IoT, CSE-CIC-IDS2018).
struct CsvSchema {
  std::string protocol = "PROTOCOL";
  std::string l4_dst_port = "L4_DST_PORT";
  std::string l4_src_port = "L4_SRC_PORT";
  std::string tcp_flags = "TCP_FLAGS";
  std::string in_bytes = "IN_BYTES";
  std::string in_pkts = "IN_PKTS";
  std::string out_bytes = "OUT_BYTES";
  std::string out_pkts = "OUT_PKTS";
  std::string flow_duration = "FLOW_DURATION_MILLISECONDS";
  std::string label = "Label";
  std::string attack = "Attack";

  /// Apply overrides keyed by logical name ("in_bytes" -> "BYTES_IN", ...).
  static CsvSchema with_overrides(const std::map<std::string, std::string>& overrides) {
    CsvSchema s;
    for (const auto& [key, column] : overrides) {
      if (std::string* slot = s.slot(key)) {
        *slot = column;
      } else {
        throw Error(Errc::invalid_argument, "unknown schema key '" + key + "'");
      }
    }
    return s;
  }

  std::vector<std::string> columns() const {
    return {protocol, l4_dst_port, l4_src_port, tcp_flags, in_bytes, in_pkts,
            out_bytes, out_pkts, flow_duration, label, attack};
  }

 private:
  std::string* slot(std::string_view key) {
    if (key == "protocol") return &protocol;
    if (key == "l4_dst_port") return &l4_dst_port;
    if (key == "l4_src_port") return &l4_src_port;
    if (key == "tcp_flags") return &tcp_flags;
    if (key == "in_bytes") return &in_bytes;
    if (key == "in_pkts") return &in_pkts;
    if (key == "out_bytes") return &out_bytes;
    if (key == "out_pkts") return &out_pkts;
    if (key == "flow_duration") return &flow_duration;
    if (key == "label") return &label;
    if (key == "attack") return &attack;
    return nullptr;
  }
};

struct RowError {
  std::size_t index;  // 0-based data row (header excluded)
  std::string reason;
};

struct LoadReport {
  FlowSet flows;
  std::vector<RowError> rejected;

  std::size_t accepted() const { return flows.size(); }
};

namespace csv_detail {

inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool is_benign_tag(std::string_view s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.empty() || lower == "benign" || lower == "normal";
}

}  // namespace csv_detail

/// Parse one data row (already split) into a FlowRecord; returns the reason
/// on failure.
inline std::optional<std::string> parse_flow_row(const std::vector<std::string>& cells,
                                                 const std::vector<std::size_t>& idx,
                                                 FlowRecord& out) {
  using csv_detail::parse_number;
  const std::size_t need = *std::max_element(idx.begin(), idx.end()) + 1;
  if (cells.size() < need) return "expected at least " + std::to_string(need) + " fields";

  static constexpr std::array<std::string_view, 11> names = {
      "protocol", "l4_dst_port", "l4_src_port", "tcp_flags", "in_bytes", "in_pkts",
      "out_bytes", "out_pkts", "flow_duration", "label", "attack"};

  std::array<double, 10> v{};
  for (std::size_t k = 0; k < 10; ++k) {
    const auto parsed = parse_number(cells[idx[k]]);
    if (!parsed) return std::string(names[k]) + " is not a number: '" + cells[idx[k]] + "'";
    if (*parsed < 0) return std::string(names[k]) + " is negative";
    v[k] = *parsed;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (v[k] != std::floor(v[k]) || v[k] > 4294967295.0) {
      return std::string(names[k]) + " is not a categorical code";
    }
  }
  if (v[1] > 65535 || v[2] > 65535) return "port outside 0-65535";
  if (v[9] != 0 && v[9] != 1) return "label must be 0 or 1";

  out.protocol = static_cast<std::uint32_t>(v[0]);
  out.l4_dst_port = static_cast<std::uint32_t>(v[1]);
  out.l4_src_port = static_cast<std::uint32_t>(v[2]);
  out.tcp_flags = static_cast<std::uint32_t>(v[3]);
  out.in_bytes = v[4];
  out.in_pkts = v[5];
  out.out_bytes = v[6];
  out.out_pkts = v[7];
  out.flow_duration_ms = v[8];
  out.label = static_cast<int>(v[9]);
  const std::string attack(csv_detail::trim(cells[idx[10]]));
  out.attack = csv_detail::is_benign_tag(attack) ? std::string() : attack;
  if (out.label == 1 && out.attack.empty()) return "malicious row without attack name";
  if (out.label == 0 && !out.attack.empty()) return "benign row with attack name '" + attack + "'";
  return std::nullopt;
}

/// Reads NetFlow rows from a stream. Bad rows are collected in the report;
/// with `strict` the first bad row throws MalformedRow instead.
inline LoadReport read_netflow(std::istream& in, const CsvSchema& schema = {},
                               bool strict = false) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::empty_dataset, "no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = csv_detail::split_row(line);

  std::vector<std::size_t> idx;
  for (const auto& name : schema.columns()) {
    const auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
      return csv_detail::trim(h) == name;
    });
    if (it == header.end()) throw Error(Errc::missing_column, name);
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  LoadReport report;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (csv_detail::trim(line).empty() || line == "\r") continue;
    FlowRecord rec;
    if (auto reason = parse_flow_row(csv_detail::split_row(line), idx, rec)) {
      if (strict) throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": " + *reason);
      report.rejected.push_back({row, std::move(*reason)});
    } else {
      report.flows.push_back(std::move(rec));
    }
    ++row;
  }
  if (report.flows.empty()) throw Error(Errc::empty_dataset, "no accepted rows");
  return report;
}

inline LoadReport load_netflow(const std::string& path, const CsvSchema& schema = {},
                               bool strict = false) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return read_netflow(in, schema, strict);
}

inline std::string format_count(double v) {
  char buf[64];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", v);
  }
  return buf;
}

inline void write_netflow(std::ostream& out, const FlowSet& flows, const CsvSchema& schema = {}) {
  const auto cols = schema.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& f : flows) {
    out << f.protocol << ',' << f.l4_dst_port << ',' << f.l4_src_port << ',' << f.tcp_flags << ','
        << format_count(f.in_bytes) << ',' << format_count(f.in_pkts) << ','
        << format_count(f.out_bytes) << ',' << format_count(f.out_pkts) << ','
        << format_count(f.flow_duration_ms) << ',' << f.label << ','
        << (f.label == 1 ? f.attack : std::string("Benign")) << '\n';
  }
}

inline void save_netflow(const std::string& path, const FlowSet& flows, const CsvSchema& schema = {}) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  write_netflow(out, flows, schema);
}

}  // namespace nidsrl
