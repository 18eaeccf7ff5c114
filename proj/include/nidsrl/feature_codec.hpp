#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "nidsrl/error.hpp"
#include "nidsrl/flow_record.hpp"
#include "nidsrl/hash.hpp"

namespace nidsrl {

/// Decoded value of a categorical feature that fell into the "other" bucket.
inline constexpr std::uint32_t kOtherCategory = std::numeric_limits<std::uint32_t>::max();

struct NumericRange {
  double min_log = 0;
  double max_log = 0;

  bool operator==(const NumericRange&) const = default;
};

/// Log/min-max scaling for counts and durations plus one-hot vocabularies for
/// categorical codes. Layout of an encoded vector:
///   [5 numeric coordinates | protocol | dst port | src port | tcp flags]
/// where each categorical block is its vocabulary followed by one "other" slot.
class FeatureCodec {
 public:
  static constexpr std::size_t kDefaultTopKPorts = 512;
  static constexpr int kFormatVersion = 1;

  FeatureCodec() { rebuild_index(); }

  static FeatureCodec fit(const FlowSet& train, std::size_t top_k_ports = kDefaultTopKPorts) {
    require(!train.empty(), Errc::empty_dataset, "fit_codec needs at least one flow");
    FeatureCodec c;
    c.top_k_ports_ = top_k_ports;
    for (std::size_t k = 0; k < kNumNumeric; ++k) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& f : train) {
        const double v = std::log1p(numeric(f, static_cast<NumericFeature>(k)));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      c.ranges_[k] = {lo, hi};
    }
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      const auto which = static_cast<CategoricalFeature>(k);
      std::unordered_map<std::uint32_t, std::size_t> counts;
      for (const auto& f : train) ++counts[categorical(f, which)];
      std::vector<std::pair<std::uint32_t, std::size_t>> order(counts.begin(), counts.end());
      std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      const bool is_port =
          which == CategoricalFeature::l4_dst_port || which == CategoricalFeature::l4_src_port;
      if (is_port && order.size() > top_k_ports) order.resize(top_k_ports);
      for (const auto& [value, n] : order) c.vocab_[k].push_back(value);
    }
    c.rebuild_index();
    return c;
  }

  std::size_t dim() const { return offsets_.back(); }
  std::size_t top_k_ports() const { return top_k_ports_; }

  const NumericRange& range(NumericFeature f) const { return ranges_[idx(f)]; }
  const std::vector<std::uint32_t>& vocabulary(CategoricalFeature f) const { return vocab_[idx(f)]; }

  static constexpr std::size_t numeric_index(NumericFeature f) { return static_cast<std::size_t>(f); }
  std::size_t block_offset(CategoricalFeature f) const { return offsets_[idx(f)]; }
  std::size_t block_size(CategoricalFeature f) const { return vocab_[idx(f)].size() + 1; }

  /// Position of `value` inside its one-hot block; the last slot is "other".
  std::size_t slot(CategoricalFeature f, std::uint32_t value) const {
    const auto& map = lookup_[idx(f)];
    const auto it = map.find(value);
    return it == map.end() ? vocab_[idx(f)].size() : it->second;
  }

  /// Unclamped log-min-max coordinate. Constant features map onto a unit
  /// slope so that gradients in this space remain meaningful.
  double log_unit(NumericFeature f, double raw) const {
    const auto& r = ranges_[idx(f)];
    const double span = r.max_log - r.min_log;
    const double x = std::log1p(std::max(raw, 0.0)) - r.min_log;
    return span > 0 ? x / span : x;
  }

  double from_log_unit(NumericFeature f, double u) const {
    const auto& r = ranges_[idx(f)];
    const double span = r.max_log - r.min_log;
    return std::expm1((span > 0 ? u * span : u) + r.min_log);
  }

  double encode_numeric(NumericFeature f, double raw) const {
    const auto& r = ranges_[idx(f)];
    if (r.max_log <= r.min_log) return 0.0;
    return std::clamp(log_unit(f, raw), 0.0, 1.0);
  }

  void encode_into(const FlowRecord& flow, std::span<double> out) const {
    check_dim(out.size(), dim(), "FeatureCodec::encode_into");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < kNumNumeric; ++k) {
      const auto f = static_cast<NumericFeature>(k);
      out[k] = encode_numeric(f, numeric(flow, f));
    }
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      const auto f = static_cast<CategoricalFeature>(k);
      out[offsets_[k] + slot(f, categorical(flow, f))] = 1.0;
    }
  }

  std::vector<double> encode(const FlowRecord& flow) const {
    std::vector<double> v(dim());
    encode_into(flow, v);
    return v;
  }

  /// Inverse mapping. Byte and packet counts are rounded to integers; the
  /// "other" bucket decodes to kOtherCategory. Label fields are left benign.
  FlowRecord decode(std::span<const double> x) const {
    check_dim(x.size(), dim(), "FeatureCodec::decode");
    FlowRecord f;
    for (std::size_t k = 0; k < kNumNumeric; ++k) {
      const auto which = static_cast<NumericFeature>(k);
      const auto& r = ranges_[k];
      double v = std::expm1(r.min_log + x[k] * (r.max_log - r.min_log));
      if (which != NumericFeature::flow_duration) v = std::round(v);
      numeric(f, which) = std::max(v, 0.0);
    }
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      const auto which = static_cast<CategoricalFeature>(k);
      const std::size_t begin = offsets_[k];
      const std::size_t n = vocab_[k].size() + 1;
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j) {
        if (x[begin + j] > x[begin + best]) best = j;
      }
      categorical(f, which) = best < vocab_[k].size() ? vocab_[k][best] : kOtherCategory;
    }
    return f;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "nidsrl-codec";
    j["version"] = kFormatVersion;
    j["top_k_ports"] = top_k_ports_;
    for (std::size_t k = 0; k < kNumNumeric; ++k) {
      j["numeric"][std::string(kNumericNames[k])] = {{"min_log", ranges_[k].min_log},
                                                     {"max_log", ranges_[k].max_log}};
    }
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      j["categorical"][std::string(kCategoricalNames[k])] = vocab_[k];
    }
    return j;
  }

  static FeatureCodec from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "nidsrl-codec") throw Error(Errc::format_error, "not a codec document");
    if (j.value("version", 0) != kFormatVersion) {
      throw Error(Errc::format_error, "unsupported codec version");
    }
    FeatureCodec c;
    c.top_k_ports_ = j.at("top_k_ports").get<std::size_t>();
    for (std::size_t k = 0; k < kNumNumeric; ++k) {
      const auto& r = j.at("numeric").at(std::string(kNumericNames[k]));
      c.ranges_[k] = {r.at("min_log").get<double>(), r.at("max_log").get<double>()};
    }
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      c.vocab_[k] = j.at("categorical").at(std::string(kCategoricalNames[k])).get<std::vector<std::uint32_t>>();
    }
    c.rebuild_index();
    return c;
  }

  /// Stable identifier derived from the serialized state.
  std::string id() const { return content_hash(to_json().dump()); }

  std::size_t resident_bytes() const {
    std::size_t n = sizeof(*this);
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      n += vocab_[k].capacity() * sizeof(std::uint32_t);
      n += lookup_[k].size() * (sizeof(std::uint32_t) + sizeof(std::size_t) + 2 * sizeof(void*));
    }
    return n;
  }

 private:
  template <typename E>
  static constexpr std::size_t idx(E e) { return static_cast<std::size_t>(e); }

  void rebuild_index() {
    offsets_[0] = kNumNumeric;
    for (std::size_t k = 0; k < kNumCategorical; ++k) {
      lookup_[k].clear();
      for (std::size_t j = 0; j < vocab_[k].size(); ++j) lookup_[k].emplace(vocab_[k][j], j);
      offsets_[k + 1] = offsets_[k] + vocab_[k].size() + 1;
    }
  }

  std::size_t top_k_ports_ = kDefaultTopKPorts;
  std::array<NumericRange, kNumNumeric> ranges_{};
  std::array<std::vector<std::uint32_t>, kNumCategorical> vocab_{};
  std::array<std::unordered_map<std::uint32_t, std::size_t>, kNumCategorical> lookup_{};
  std::array<std::size_t, kNumCategorical + 1> offsets_{};
};

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Encoded design matrix with labels; rows are sparse because every
/// categorical block is one-hot.
struct EncodedData {
  SparseRows x;
  std::vector<int> y;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }
};

inline EncodedData encode_all(const FeatureCodec& codec, const FlowSet& flows) {
  EncodedData d;
  d.x.resize(static_cast<Eigen::Index>(flows.size()), static_cast<Eigen::Index>(codec.dim()));
  d.x.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(flows.size()),
                                        static_cast<int>(kNumNumeric + kNumCategorical)));
  std::vector<double> row(codec.dim());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    codec.encode_into(flows[i], row);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) d.x.insert(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    d.y.push_back(flows[i].label);
  }
  d.x.makeCompressed();
  return d;
}

}  // namespace nidsrl
