#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nidsrl {

enum class Errc {
  missing_column,
  malformed_row,
  empty_dataset,
  insufficient_class_samples,
  single_class_data,
  non_finite_feature,
  dimension_mismatch,
  no_malicious_samples,
  episode_done,
  divergence_detected,
  gradient_unavailable,
  no_detected_malicious,
  insufficient_grid,
  missing_upstream_artifact,
  config_invalid,
  empty_filter,
  invalid_argument,
  io_error,
  format_error,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::missing_column: return "MissingColumn";
    case Errc::malformed_row: return "MalformedRow";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::insufficient_class_samples: return "InsufficientClassSamples";
    case Errc::single_class_data: return "SingleClassData";
    case Errc::non_finite_feature: return "NonFiniteFeature";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::no_malicious_samples: return "NoMaliciousSamples";
    case Errc::episode_done: return "EpisodeDone";
    case Errc::divergence_detected: return "DivergenceDetected";
    case Errc::gradient_unavailable: return "GradientUnavailable";
    case Errc::no_detected_malicious: return "NoDetectedMalicious";
    case Errc::insufficient_grid: return "InsufficientGrid";
    case Errc::missing_upstream_artifact: return "MissingUpstreamArtifact";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::empty_filter: return "EmptyFilter";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
    case Errc::format_error: return "FormatError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the named codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

inline void check_dim(std::size_t got, std::size_t expected, std::string_view where) {
  if (got != expected) {
    throw Error(Errc::dimension_mismatch, std::string(where) + ": expected " +
                                              std::to_string(expected) + ", got " +
                                              std::to_string(got));
  }
}

}  // namespace nidsrl
