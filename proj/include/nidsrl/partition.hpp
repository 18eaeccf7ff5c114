#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nidsrl/error.hpp"
#include "nidsrl/flow_record.hpp"
#include "nidsrl/random.hpp"

namespace nidsrl {

struct SplitFractions {
  double victim = 0.4;
  double train = 0.4;
  double test = 0.2;
};

/// Victim / adversary-reconnaissance / evaluation splits of one corpus.
struct DataSplit {
  FlowSet victim_set;
  FlowSet train_set;
  FlowSet test_set;
  std::uint64_t seed = 0;
};

/// Label-stratified three-way split. Each class is shuffled independently and
/// cut by rounded fractions, so class ratios agree across splits up to one
/// flow of rounding per class.
inline DataSplit partition_flows(const FlowSet& flows, SplitFractions fr, std::uint64_t seed) {
  require(fr.victim > 0 && fr.train > 0 && fr.test > 0, Errc::invalid_argument,
          "split fractions must be positive");
  require(std::fabs(fr.victim + fr.train + fr.test - 1.0) <= 1e-9, Errc::invalid_argument,
          "split fractions must sum to 1");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < flows.size(); ++i) by_class[flows[i].label == 1].push_back(i);

  DataSplit out;
  out.seed = seed;
  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = by_class[cls];
    if (idx.size() < 3) {
      throw Error(Errc::insufficient_class_samples,
                  std::string(cls ? "malicious" : "benign") + " class has " +
                      std::to_string(idx.size()) + " flows; every split needs one");
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    shuffle_range(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    auto n_victim = static_cast<std::size_t>(std::llround(fr.victim * n));
    auto n_train = static_cast<std::size_t>(std::llround(fr.train * n));
    n_victim = std::clamp<std::size_t>(n_victim, 1, idx.size() - 2);
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - n_victim - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const FlowRecord& f = flows[idx[k]];
      if (k < n_victim) {
        out.victim_set.push_back(f);
      } else if (k < n_victim + n_train) {
        out.train_set.push_back(f);
      } else {
        out.test_set.push_back(f);
      }
    }
  }
  return out;
}

/// Seeded subsample of `n` flows (all flows when n >= size).
inline FlowSet subsample(const FlowSet& flows, std::size_t n, std::uint64_t seed) {
  if (n >= flows.size()) return flows;
  std::vector<std::size_t> idx(flows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  shuffle_range(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  FlowSet out;
  out.reserve(n);
  for (auto i : idx) out.push_back(flows[i]);
  return out;
}

inline FlowSet malicious_only(const FlowSet& flows) {
  FlowSet out;
  for (const auto& f : flows) {
    if (f.label == 1) out.push_back(f);
  }
  return out;
}

}  // namespace nidsrl
