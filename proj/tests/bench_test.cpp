#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nidsrl/eval_bench.hpp"
#include "support.hpp"

using namespace nidsrl;
using nidsrl::testing::BytesCutScorer;
using nidsrl::testing::ConstantScorer;
using nidsrl::testing::flow;

namespace {

FlowRecord add_bytes(FlowRecord f, double n) {
  f.in_bytes += n;
  return f;
}

std::vector<MatrixEntry> two_by_two(const std::string& victim, double a_lr, double a_mlp, double b_lr, double b_mlp) {
  return {{victim, "MLP", "A", "LR", a_lr},
          {victim, "MLP", "A", "MLP", a_mlp},
          {victim, "MLP", "B", "LR", b_lr},
          {victim, "MLP", "B", "MLP", b_mlp}};
}

}  // namespace

TEST(Asr, HandBuiltTenFlows) {
  // 7 malicious, 5 of them detected (bytes < 500); +150 bytes frees 450 and 400
  FlowSet fs;
  for (double b : {100, 200, 300, 400, 450, 600, 700}) fs.push_back(flow(b, 1, 1));
  for (double b : {10, 20, 30}) fs.push_back(flow(b, 1, 1, 0));
  const auto s = measure_asr([](const FlowRecord& f) { return add_bytes(f, 150); }, BytesCutScorer{500}, fs);
  EXPECT_EQ(s.malicious, 7u);
  EXPECT_EQ(s.detected, 5u);
  EXPECT_EQ(s.evaded, 2u);
  EXPECT_DOUBLE_EQ(s.asr, 0.4);
  EXPECT_DOUBLE_EQ(s.clean_detection_rate, 5.0 / 7.0);
  EXPECT_EQ(detected_malicious(BytesCutScorer{500}, fs).size(), 5u);
  EXPECT_EQ(detected_malicious(BytesCutScorer{500}, fs, 3).size(), 3u);
}

TEST(Asr, NothingDetectedIsAnError) {
  const FlowSet fs = {flow(100, 1, 1), flow(5, 1, 1, 0)};
  try {
    (void)measure_asr([](const FlowRecord& f) { return f; }, ConstantScorer{0}, fs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_detected_malicious);
  }
}

TEST(ThreatMatrix, TwoByTwoMatchesHandAggregation) {
  const auto m = threat_matrix(two_by_two("V", 0.2, 0.6, 0.4, 0.1));
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::white_box), 0.6);
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::gray_data), 0.4);    // corpus A mean over kinds
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::gray_model), 0.5);   // mean of 0.6 and 0.4
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::black_box), 0.325);
  EXPECT_EQ(m.victims, 1u);
  EXPECT_EQ(m.rules.size(), 4u);
}

TEST(ThreatMatrix, VictimsAreAveragedAndOrderDoesNotMatter) {
  auto entries = two_by_two("V", 0.2, 0.6, 0.4, 0.1);
  const auto w = two_by_two("W", 0.8, 0.0, 0.0, 0.0);
  entries.insert(entries.end(), w.begin(), w.end());
  const auto m = threat_matrix(entries);
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::white_box), 0.7);
  EXPECT_DOUBLE_EQ(m.cell(ThreatCell::black_box), (0.325 + 0.2) / 2);
  std::mt19937 gen(4);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(entries.begin(), entries.end(), gen);
    EXPECT_EQ(threat_matrix(entries).cells, m.cells);
  }
}

TEST(ThreatMatrix, WhiteBoxDominatesOnRandomGrids) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    const auto m = threat_matrix(two_by_two("V", u(gen), u(gen), u(gen), u(gen)));
    for (auto c : kAllThreatCells) EXPECT_GE(m.cell(ThreatCell::white_box), m.cell(c));
    EXPECT_LE(m.cell(ThreatCell::black_box), m.cell(ThreatCell::gray_data));
    EXPECT_LE(m.cell(ThreatCell::black_box), m.cell(ThreatCell::gray_model));
  }
}

TEST(ThreatMatrix, DegenerateGridCollapsesButIsRefusedWhenStrict) {
  const std::vector<MatrixEntry> one = {{"V", "MLP", "A", "MLP", 0.37}};
  const auto m = aggregate_threat_cells(one);
  for (auto c : kAllThreatCells) EXPECT_DOUBLE_EQ(m.cell(c), 0.37);
  try {
    (void)threat_matrix(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_grid);
  }
  auto holes = two_by_two("V", 0.1, 0.2, 0.3, 0.4);
  holes.pop_back();
  EXPECT_THROW((void)threat_matrix(holes), Error);
  auto dup = two_by_two("V", 0.1, 0.2, 0.3, 0.4);
  dup.push_back(dup.front());
  EXPECT_THROW((void)threat_matrix(dup), Error);
}

TEST(Throughput, IsAsrOverLatencyInSeconds) {
  EXPECT_NEAR(throughput_of(0.479, 5.72), 83.7, 0.05);
  EXPECT_NEAR(throughput_of(0.479, 5.72), 0.479 / 0.00572, 1e-9);
  EXPECT_EQ(throughput_of(0.5, 0), 0.0);
  BenchRecord r;
  r.asr = 0.25;
  r.mean_latency_ms = 2;
  r.finalize();
  EXPECT_DOUBLE_EQ(r.throughput, 125);
  EXPECT_TRUE(r.throughput_consistent());
  r.throughput += 1;
  EXPECT_FALSE(r.throughput_consistent());
}

TEST(ResultsDb, JsonlRoundTripCarriesSchemaVersion) {
  BenchRecord r;
  r.dataset = "synthetic-enterprise";
  r.train_dataset = r.dataset;
  r.victim_kind = "MLP";
  r.surrogate_kind = "LR";
  r.algorithm = "PPO";
  r.budget.max_bytes = 1234;
  r.asr = 0.375;
  r.detected = 80;
  r.mean_latency_ms = 0.02;
  r.peak_memory_bytes = 5e5;
  r.mean_perturbation = {1, 2, 3};
  r.seed = 42;
  r.finalize();
  const auto path = (std::filesystem::path(::testing::TempDir()) / "bench_roundtrip.jsonl").string();
  std::filesystem::remove(path);
  const BenchRecord recs[] = {r, r};
  append_results_jsonl(path, recs);
  const auto back = read_results_jsonl(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(to_json(back[0]), to_json(r));
  EXPECT_EQ(back[0].scenario_id(), r.scenario_id());
  EXPECT_EQ(to_json(r)["schema_version"], kResultsSchemaVersion);

  auto j = to_json(r);
  j["schema_version"] = kResultsSchemaVersion + 1;
  EXPECT_THROW((void)bench_record_from_json(j), Error);

  std::ostringstream csv;
  write_results_csv(csv, recs);
  EXPECT_EQ(csv.str().rfind("schema_version,scenario_id,", 0), 0u);
  {
    const std::string s = csv.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  }
  std::filesystem::remove(path);
}

TEST(ResultsDb, ScenarioIdIgnoresMeasurements) {
  BenchRecord a;
  BenchRecord b = a;
  b.asr = 0.9;
  b.mean_latency_ms = 7;
  EXPECT_EQ(a.scenario_id(), b.scenario_id());
  b.steps = 20;
  EXPECT_NE(a.scenario_id(), b.scenario_id());
}

TEST(Sweeps, LineFitRecoversExactLine) {
  const std::vector<double> x = {1, 10, 20, 40}, y = {3, 21, 41, 81};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2, 1e-12);
  EXPECT_NEAR(f.intercept, 1, 1e-12);
  EXPECT_NEAR(f.r2, 1, 1e-12);
  const std::vector<double> same = {2, 2};
  EXPECT_THROW((void)fit_line(same, same), Error);
}

TEST(Sweeps, ProbeReachesTheSameTotalForEveryT) {
  BudgetSpec b;
  const Triple box = b.total();
  for (int t : {1, 10, 20, 40}) {
    b.steps = t;
    EXPECT_EQ(probe_total(b), box) << "T=" << t;
  }
}

TEST(Sweeps, BudgetAndSizeGrids) {
  EXPECT_EQ(log_budget_grid(1e5), (std::vector<double>{0, 1, 10, 100, 1e3, 1e4, 1e5}));
  const auto small = log_sizes(5000);
  EXPECT_TRUE(small.truncated);
  EXPECT_EQ(small.sizes, (std::vector<std::size_t>{10, 100, 1000, 5000}));
  const auto full = log_sizes(2000000);
  EXPECT_FALSE(full.truncated);
  EXPECT_EQ(full.sizes.back(), 1000000u);
  EXPECT_EQ(default_sweep_axes().size(), 4u);
}

TEST(Sweeps, DataSizeSkipsSizesThatCannotTrain) {
  const std::size_t sizes[] = {10, 1000};
  const ModelKind kinds[] = {ModelKind::mlp, ModelKind::lr};
  const auto pts = sweep_data_size(sizes, kinds, [](std::size_t n, ModelKind k) {
    if (n < 100) throw Error(Errc::single_class_data, "too small");
    return k == ModelKind::mlp ? 0.6 : 0.2;
  });
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_FALSE(pts[0].asr.has_value());
  EXPECT_FALSE(pts[0].note.empty());
  EXPECT_DOUBLE_EQ(*pts[2].asr, 0.6);
  EXPECT_DOUBLE_EQ(*pts[3].asr, 0.4);
  EXPECT_THROW(sweep_data_size(sizes, kinds,
                               [](std::size_t, ModelKind) -> double { throw Error(Errc::io_error, "disk"); }),
               Error);
}

TEST(Cost, LatencyIsAveragedPerRepetition) {
  const FlowSet fs = {flow(1, 1, 1), flow(2, 1, 1), flow(6, 1, 1)};
  int built = 0;
  const auto c = measure_cost(
      [&] {
        ++built;
        return [](const FlowRecord& f) {
          AttackResult r;
          r.wall_latency_ms = f.in_bytes;
          r.success = f.in_bytes > 1;
          r.perturbation = {0, f.in_bytes, 0};
          return r;
        };
      },
      fs, 3);
  EXPECT_EQ(built, 3);
  ASSERT_EQ(c.mean_latency_ms.size(), 3u);
  EXPECT_DOUBLE_EQ(c.median_latency_ms, 3);
  EXPECT_DOUBLE_EQ(c.latency_ms, 3);
  EXPECT_DOUBLE_EQ(c.asr, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.mean_perturbation[kBytes], 3);
  EXPECT_FALSE(c.memory_method.empty());
  EXPECT_THROW(measure_cost([] { return [](const FlowRecord&) { return AttackResult{}; }; }, FlowSet{}), Error);
  EXPECT_DOUBLE_EQ(median_of({5, 1, 3, 2}), 2.5);
}
