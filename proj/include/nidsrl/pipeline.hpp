#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nidsrl/baseline_attacks.hpp"
#include "nidsrl/error.hpp"
#include "nidsrl/eval_bench.hpp"
#include "nidsrl/feature_codec.hpp"
#include "nidsrl/hash.hpp"
#include "nidsrl/netflow_csv.hpp"
#include "nidsrl/nids_zoo.hpp"
#include "nidsrl/partition.hpp"
#include "nidsrl/policy.hpp"
#include "nidsrl/rl.hpp"
#include "nidsrl/synthetic.hpp"

namespace nidsrl {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "nidsrl-out";
  int threads = 1;

  struct Data {
    std::string source = "synthetic";  // synthetic | csv
    std::string path;
    std::string profile = "enterprise";
    std::size_t flows = 50000;
    std::string ood_source = "synthetic";
    std::string ood_path;
    std::string ood_profile = "iot";
  } data;

  SplitFractions split;
  std::size_t top_k_ports = FeatureCodec::kDefaultTopKPorts;
  ModelKind victim_kind = ModelKind::mlp;
  ModelKind surrogate_kind = ModelKind::mlp;
  int cv_folds = 3;
  BudgetSpec budget;

  struct Agent {
    std::vector<Algorithm> algorithms = {Algorithm::ppo, Algorithm::a2c};
    std::int64_t total_steps = 100000;
    std::vector<int> hidden = {64, 64};
    std::int64_t log_every = 2048;
  } agent;

  struct Attack {
    std::size_t flows = 200;
    int fuzz_queries = 1000;
    int pgd_steps = 100;
    double pgd_step_size = 0.05;
    int repetitions = 3;
    std::size_t trace_episodes = 20;
  } attack;

  struct Bench {
    bool t_sweep = true;
    std::vector<int> t_values = {1, 10, 20, 40};
    std::int64_t t_sweep_steps = 20000;
    int t_sweep_repetitions = 9;  // latency is a median over this many passes
    bool sensitivity = true;
    double budget_grid_max = 1e5;
    std::size_t sensitivity_flows = 150;  // per category
    bool matrix = true;
    std::vector<ModelKind> surrogate_kinds = {ModelKind::mlp, ModelKind::lr};
    std::int64_t agent_steps = 50000;
    bool data_efficiency = true;
    std::vector<std::size_t> data_sizes = {1000, 10000};
  } bench;

  TrainConfig train_config(Algorithm a) const {
    TrainConfig c = a == Algorithm::ppo ? TrainConfig::ppo() : TrainConfig::a2c();
    c.total_steps = agent.total_steps;
    c.hidden = agent.hidden;
    c.log_every = agent.log_every;
    return c;
  }

  Hyperparams hyperparams() const {
    Hyperparams hp;
    hp.cv_folds = cv_folds;
    hp.rf.threads = threads;
    return hp;
  }
};

namespace config_detail {

inline const nlohmann::json& empty_object() {
  static const nlohmann::json j = nlohmann::json::object();
  return j;
}

/// Reads known keys and rejects everything else on `finish()`.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw Error(Errc::config_invalid, "'" + prefix_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config_invalid, "'" + prefix_ + key + "': " + e.what());
    }
  }

  void get_kind(const std::string& key, ModelKind& out) {
    std::string s = model_kind_name(out);
    get(key, s);
    out = parse_kind(key, s);
  }

  void get_kinds(const std::string& key, std::vector<ModelKind>& out) {
    std::vector<std::string> names;
    for (auto k : out) names.push_back(model_kind_name(k));
    get(key, names);
    out.clear();
    for (const auto& s : names) out.push_back(parse_kind(key, s));
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.contains(key) ? j_.at(key) : empty_object(), prefix_ + key + ".");
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw Error(Errc::config_invalid, "unknown key '" + prefix_ + k + "'");
    }
  }

 private:
  ModelKind parse_kind(const std::string& key, const std::string& s) const {
    try {
      return parse_model_kind(s);
    } catch (const Error&) {
      throw Error(Errc::config_invalid, "'" + prefix_ + key + "': unknown model kind '" + s + "'");
    }
  }

  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline std::vector<std::string> kind_names(const std::vector<ModelKind>& ks) {
  std::vector<std::string> out;
  for (auto k : ks) out.push_back(model_kind_name(k));
  return out;
}

}  // namespace config_detail

inline void validate(const PipelineConfig& c) {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::config_invalid, what);
  };
  need(c.data.source == "synthetic" || c.data.source == "csv", "data.source must be 'synthetic' or 'csv'");
  need(c.data.source != "csv" || !c.data.path.empty(), "data.path is required for csv input");
  need(c.data.source != "synthetic" || c.data.flows > 0, "data.flows must be positive");
  need(c.data.ood_source == "synthetic" || c.data.ood_source == "csv", "data.ood_source must be 'synthetic' or 'csv'");
  need(c.data.ood_source != "csv" || !c.data.ood_path.empty(), "data.ood_path is required for csv input");
  for (const auto* p : {&c.data.profile, &c.data.ood_profile}) {
    try {
      (void)SyntheticProfile::by_name(*p);
    } catch (const Error&) {
      throw Error(Errc::config_invalid, "unknown synthetic profile '" + *p + "'");
    }
  }
  need(c.split.victim > 0 && c.split.train > 0 && c.split.test > 0 &&
           std::fabs(c.split.victim + c.split.train + c.split.test - 1.0) <= 1e-9,
       "split fractions must be positive and sum to 1");
  need(c.top_k_ports >= 1, "codec.top_k_ports must be >= 1");
  need(c.threads >= 1, "threads must be >= 1");
  need(c.cv_folds >= 0, "hyperparams.cv_folds must be >= 0");
  need(!c.output_dir.empty(), "output_dir must not be empty");
  try {
    c.budget.validate();
  } catch (const Error& e) {
    throw Error(Errc::config_invalid, e.what());
  }
  need(!c.agent.algorithms.empty(), "agent.algorithms must not be empty");
  for (auto a : c.agent.algorithms) c.train_config(a).validate();
  need(c.attack.flows >= 1, "attack.flows must be >= 1");
  need(c.attack.fuzz_queries >= 1 && c.attack.pgd_steps >= 1 && c.attack.repetitions >= 1,
       "attack counts must be >= 1");
  need(c.attack.pgd_step_size > 0, "attack.pgd_step_size must be positive");
  need(!c.bench.t_sweep || c.bench.t_values.size() >= 2, "bench.t_values needs >= 2 entries");
  for (int t : c.bench.t_values) need(t >= 1, "bench.t_values must be >= 1");
  need(c.bench.t_sweep_steps > 0 && c.bench.agent_steps > 0, "bench step counts must be positive");
  need(c.bench.t_sweep_repetitions >= 1, "bench.t_sweep_repetitions must be >= 1");
  need(c.bench.budget_grid_max >= 1, "bench.budget_grid_max must be >= 1");
  need(!c.bench.surrogate_kinds.empty(), "bench.surrogate_kinds must not be empty");
  for (auto n : c.bench.data_sizes) need(n >= 1, "bench.data_sizes must be >= 1");
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  config_detail::Reader r(j, "");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("threads", c.threads);
  {
    auto d = r.child("data");
    d.get("source", c.data.source);
    d.get("path", c.data.path);
    d.get("profile", c.data.profile);
    d.get("flows", c.data.flows);
    d.get("ood_source", c.data.ood_source);
    d.get("ood_path", c.data.ood_path);
    d.get("ood_profile", c.data.ood_profile);
    d.finish();
  }
  {
    auto s = r.child("split");
    s.get("victim", c.split.victim);
    s.get("train", c.split.train);
    s.get("test", c.split.test);
    s.finish();
  }
  {
    auto s = r.child("codec");
    s.get("top_k_ports", c.top_k_ports);
    s.finish();
  }
  {
    auto s = r.child("models");
    s.get_kind("victim", c.victim_kind);
    s.get_kind("surrogate", c.surrogate_kind);
    s.get("cv_folds", c.cv_folds);
    s.finish();
  }
  {
    auto s = r.child("budget");
    s.get("max_bytes", c.budget.max_bytes);
    s.get("max_pkts", c.budget.max_pkts);
    s.get("max_delay_ms", c.budget.max_delay_ms);
    s.get("steps", c.budget.steps);
    s.finish();
  }
  {
    auto s = r.child("agent");
    std::vector<std::string> algos;
    for (auto a : c.agent.algorithms) algos.push_back(algorithm_name(a));
    s.get("algorithms", algos);
    c.agent.algorithms.clear();
    for (const auto& a : algos) {
      try {
        c.agent.algorithms.push_back(parse_algorithm(a));
      } catch (const Error&) {
        throw Error(Errc::config_invalid, "'agent.algorithms': unknown algorithm '" + a + "'");
      }
    }
    s.get("total_steps", c.agent.total_steps);
    s.get("hidden", c.agent.hidden);
    s.get("log_every", c.agent.log_every);
    s.finish();
  }
  {
    auto s = r.child("attack");
    s.get("flows", c.attack.flows);
    s.get("fuzz_queries", c.attack.fuzz_queries);
    s.get("pgd_steps", c.attack.pgd_steps);
    s.get("pgd_step_size", c.attack.pgd_step_size);
    s.get("repetitions", c.attack.repetitions);
    s.get("trace_episodes", c.attack.trace_episodes);
    s.finish();
  }
  {
    auto s = r.child("bench");
    s.get("t_sweep", c.bench.t_sweep);
    s.get("t_values", c.bench.t_values);
    s.get("t_sweep_steps", c.bench.t_sweep_steps);
    s.get("t_sweep_repetitions", c.bench.t_sweep_repetitions);
    s.get("sensitivity", c.bench.sensitivity);
    s.get("budget_grid_max", c.bench.budget_grid_max);
    s.get("sensitivity_flows", c.bench.sensitivity_flows);
    s.get("matrix", c.bench.matrix);
    s.get_kinds("surrogate_kinds", c.bench.surrogate_kinds);
    s.get("agent_steps", c.bench.agent_steps);
    s.get("data_efficiency", c.bench.data_efficiency);
    s.get("data_sizes", c.bench.data_sizes);
    s.finish();
  }
  r.finish();
  validate(c);
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  std::vector<std::string> algos;
  for (auto a : c.agent.algorithms) algos.push_back(algorithm_name(a));
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"threads", c.threads},
          {"data",
           {{"source", c.data.source},
            {"path", c.data.path},
            {"profile", c.data.profile},
            {"flows", c.data.flows},
            {"ood_source", c.data.ood_source},
            {"ood_path", c.data.ood_path},
            {"ood_profile", c.data.ood_profile}}},
          {"split", {{"victim", c.split.victim}, {"train", c.split.train}, {"test", c.split.test}}},
          {"codec", {{"top_k_ports", c.top_k_ports}}},
          {"models",
           {{"victim", model_kind_name(c.victim_kind)},
            {"surrogate", model_kind_name(c.surrogate_kind)},
            {"cv_folds", c.cv_folds}}},
          {"budget",
           {{"max_bytes", c.budget.max_bytes},
            {"max_pkts", c.budget.max_pkts},
            {"max_delay_ms", c.budget.max_delay_ms},
            {"steps", c.budget.steps}}},
          {"agent",
           {{"algorithms", algos},
            {"total_steps", c.agent.total_steps},
            {"hidden", c.agent.hidden},
            {"log_every", c.agent.log_every}}},
          {"attack",
           {{"flows", c.attack.flows},
            {"fuzz_queries", c.attack.fuzz_queries},
            {"pgd_steps", c.attack.pgd_steps},
            {"pgd_step_size", c.attack.pgd_step_size},
            {"repetitions", c.attack.repetitions},
            {"trace_episodes", c.attack.trace_episodes}}},
          {"bench",
           {{"t_sweep", c.bench.t_sweep},
            {"t_values", c.bench.t_values},
            {"t_sweep_steps", c.bench.t_sweep_steps},
            {"t_sweep_repetitions", c.bench.t_sweep_repetitions},
            {"sensitivity", c.bench.sensitivity},
            {"budget_grid_max", c.bench.budget_grid_max},
            {"sensitivity_flows", c.bench.sensitivity_flows},
            {"matrix", c.bench.matrix},
            {"surrogate_kinds", config_detail::kind_names(c.bench.surrogate_kinds)},
            {"agent_steps", c.bench.agent_steps},
            {"data_efficiency", c.bench.data_efficiency},
            {"data_sizes", c.bench.data_sizes}}}};
}

/// Hash of every setting that can change results. Output location and thread
/// count are excluded; object keys are sorted, so key order never matters.
inline std::string config_hash(const PipelineConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  return content_hash(j.dump());
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_invalid, "cannot read config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_invalid, path + ": " + e.what());
  }
  return config_from_json(j);
}

/// NIDSRL_OUTPUT_DIR and NIDSRL_THREADS; nothing else is read from the environment.
inline void apply_env_overrides(PipelineConfig& c) {
  if (const char* v = std::getenv("NIDSRL_OUTPUT_DIR"); v && *v) c.output_dir = v;
  if (const char* v = std::getenv("NIDSRL_THREADS"); v && *v) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw Error(Errc::config_invalid, "NIDSRL_THREADS must be a positive integer");
    c.threads = static_cast<int>(n);
  }
}

// ---------------------------------------------------------------------------
// Stages and manifest

enum class Stage { ingest, train_nids, train_agent, attack, bench, report };
inline constexpr std::array<Stage, 6> kAllStages = {Stage::ingest, Stage::train_nids, Stage::train_agent,
                                                    Stage::attack, Stage::bench,      Stage::report};

inline std::string stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::train_nids: return "train-nids";
    case Stage::train_agent: return "train-agent";
    case Stage::attack: return "attack";
    case Stage::bench: return "bench";
    case Stage::report: return "report";
  }
  return "?";
}

inline Stage parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (stage_name(st) == s) return st;
  }
  throw Error(Errc::invalid_argument, "unknown stage '" + std::string(s) + "'");
}

inline std::vector<Stage> upstream_of(Stage s) {
  switch (s) {
    case Stage::ingest: return {};
    case Stage::train_nids: return {Stage::ingest};
    case Stage::train_agent: return {Stage::ingest, Stage::train_nids};
    case Stage::attack: return {Stage::ingest, Stage::train_nids, Stage::train_agent};
    case Stage::bench: return {Stage::ingest, Stage::train_nids, Stage::train_agent};
    case Stage::report: return {Stage::attack, Stage::bench};
  }
  return {};
}

enum class ReportTemplate { cost_table, learning_figure, tradeoff, sensitivity, matrix, data_efficiency };
inline constexpr std::array<ReportTemplate, 6> kAllTemplates = {
    ReportTemplate::cost_table,  ReportTemplate::learning_figure, ReportTemplate::tradeoff,
    ReportTemplate::sensitivity, ReportTemplate::matrix,          ReportTemplate::data_efficiency};

inline std::string template_name(ReportTemplate t) {
  switch (t) {
    case ReportTemplate::cost_table: return "cost-table";
    case ReportTemplate::learning_figure: return "learning-figure";
    case ReportTemplate::tradeoff: return "tradeoff";
    case ReportTemplate::sensitivity: return "sensitivity";
    case ReportTemplate::matrix: return "matrix";
    case ReportTemplate::data_efficiency: return "data-efficiency";
  }
  return "?";
}

inline ReportTemplate parse_template(std::string_view s) {
  for (auto t : kAllTemplates) {
    if (template_name(t) == s) return t;
  }
  throw Error(Errc::invalid_argument, "unknown report template '" + std::string(s) + "'");
}

struct StageOutcome {
  Stage stage = Stage::ingest;
  bool cached = false;
  double seconds = 0;
  std::map<std::string, std::string> artifacts;  // logical name -> relative path
};

// ---------------------------------------------------------------------------
// Reports

struct ReportTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::string> docs;  // one per column
  std::vector<std::vector<std::string>> rows;
  std::string summary;

  void write_csv(std::ostream& o) const {
    for (std::size_t i = 0; i < columns.size(); ++i) o << (i ? "," : "") << columns[i];
    o << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << r[i];
      o << '\n';
    }
  }

  std::string text() const {
    std::ostringstream o;
    o << name << "\n\nColumns:\n";
    for (std::size_t i = 0; i < columns.size(); ++i) o << "  " << columns[i] << ": " << docs[i] << '\n';
    o << '\n' << summary << '\n';
    return o.str();
  }
};

namespace report_detail {

inline std::string num(double v, int precision = 6) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

inline std::string hardware() {
  std::string model = "unknown CPU";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto p = line.find(':');
      if (p != std::string::npos) model = line.substr(p + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hardware threads";
}

inline std::string conventions() {
  return std::string("ASR denominator: ") + kAsrDenominator + ". Hardware: " + hardware() + ".";
}

inline std::vector<const BenchRecord*> filter(const std::vector<BenchRecord>& db, const std::string& experiment,
                                              const std::string& tmpl) {
  std::vector<const BenchRecord*> out;
  for (const auto& r : db) {
    if (r.experiment == experiment) out.push_back(&r);
  }
  if (out.empty()) throw Error(Errc::empty_filter, "no '" + experiment + "' records for template " + tmpl);
  return out;
}

}  // namespace report_detail

/// Renders one template from the results database. `curves` maps algorithm
/// name to its training curve (learning-figure only).
inline ReportTable render_report(ReportTemplate t, const std::vector<BenchRecord>& db,
                                 const std::map<std::string, std::vector<CurvePoint>>& curves = {}) {
  using report_detail::num;
  ReportTable tab;
  tab.name = template_name(t);
  const std::string conv = report_detail::conventions();
  switch (t) {
    case ReportTemplate::cost_table: {
      const auto rows = report_detail::filter(db, "cost", tab.name);
      tab.columns = {"method", "memory_mb", "latency_ms", "bytes", "packets", "delay_ms", "asr_pct", "throughput_per_s"};
      tab.docs = {"attack algorithm or baseline",
                  "peak heap above entry while loading the attacker and attacking every flow, MB",
                  "mean wall-clock latency per attacked flow, ms",
                  "mean added ingress bytes",
                  "mean added ingress packets",
                  "mean added delay, ms",
                  "attack success rate, percent",
                  "successful attacks per second, asr / latency"};
      for (const auto* r : rows) {
        tab.rows.push_back({r->algorithm, num(r->peak_memory_bytes / 1e6), num(r->mean_latency_ms),
                            num(r->mean_perturbation[kBytes]), num(r->mean_perturbation[kPkts]),
                            num(r->mean_perturbation[kDelay]), num(100 * r->asr), num(r->throughput)});
      }
      tab.summary = std::to_string(rows.size()) + " methods on " + std::to_string(rows.front()->detected) +
                    " detected flows. Memory method: " + rows.front()->memory_method + ". " + conv;
      break;
    }
    case ReportTemplate::learning_figure: {
      if (curves.empty()) throw Error(Errc::empty_filter, "no training curves for template " + tab.name);
      tab.columns = {"algorithm", "step", "mean_episode_reward", "episodes"};
      tab.docs = {"training algorithm", "environment steps so far",
                  "mean per-step reward of episodes finished in the window", "episodes finished in the window"};
      for (const auto& [algo, curve] : curves) {
        for (const auto& c : curve) {
          tab.rows.push_back({algo, std::to_string(c.step), num(c.mean_episode_reward), std::to_string(c.episodes)});
        }
      }
      if (tab.rows.empty()) throw Error(Errc::empty_filter, "training curves are empty");
      tab.summary = "Training curves for " + std::to_string(curves.size()) + " algorithm(s). " + conv;
      break;
    }
    case ReportTemplate::tradeoff: {
      auto rows = report_detail::filter(db, "t-sweep", tab.name);
      std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->steps < b->steps; });
      tab.columns = {"T", "asr_pct", "latency_ms", "throughput_per_s"};
      tab.docs = {"episode length", "attack success rate, percent", "median per-attack latency, ms",
                  "successful attacks per second"};
      std::vector<double> x, y;
      for (const auto* r : rows) {
        tab.rows.push_back({std::to_string(r->steps), num(100 * r->asr), num(r->mean_latency_ms), num(r->throughput)});
        x.push_back(r->steps);
        y.push_back(r->mean_latency_ms);
      }
      tab.summary = "Total budget fixed across T.";
      if (rows.size() >= 2) {
        const auto fit = fit_line(x, y);
        tab.summary += " Latency fit: " + num(fit.slope) + " ms per step + " + num(fit.intercept) + " ms, R^2 " +
                       num(fit.r2) + ".";
      }
      tab.summary += " " + conv;
      break;
    }
    case ReportTemplate::sensitivity: {
      const auto rows = report_detail::filter(db, "sensitivity", tab.name);
      tab.columns = {"category", "axes", "budget", "detected", "asr_pct"};
      tab.docs = {"attack category", "perturbation axes opened (others capped at zero)",
                  "cap on each opened axis", "detected flows in the category", "attack success rate, percent"};
      for (const auto* r : rows) {
        const double b = r->axes == "delay" ? r->budget.max_delay_ms
                         : r->axes == "packets" ? r->budget.max_pkts
                                                : r->budget.max_bytes;
        tab.rows.push_back({r->category, r->axes, num(b), std::to_string(r->detected), num(100 * r->asr)});
      }
      tab.summary = "One trained policy deployed under nested budget boxes. " + conv;
      break;
    }
    case ReportTemplate::matrix: {
      const auto rows = report_detail::filter(db, "matrix", tab.name);
      std::vector<MatrixEntry> entries;
      for (const auto* r : rows) entries.push_back({r->dataset, r->victim_kind, r->train_dataset, r->surrogate_kind, r->asr});
      const auto m = aggregate_threat_cells(entries);
      tab.columns = {"scope", "cell", "victim_access", "data_access", "asr_pct"};
      tab.docs = {"all victims, one victim kind, or one victim dataset", "threat-model cell",
                  "adversary knows the victim model family", "adversary owns in-distribution data",
                  "aggregated attack success rate, percent"};
      const auto emit = [&](const std::string& scope, const std::array<double, 4>& v) {
        for (std::size_t c = 0; c < 4; ++c) {
          const auto cell = kAllThreatCells[c];
          tab.rows.push_back({scope, std::string(threat_cell_name(cell)), victim_access(cell) ? "1" : "0",
                              data_access(cell) ? "1" : "0", num(100 * v[c])});
        }
      };
      emit("all", m.cells);
      for (const auto& [k, v] : m.by_victim_kind) emit("victim_kind=" + k, v);
      for (const auto& [d, v] : m.by_dataset) emit("dataset=" + d, v);
      tab.summary = "Aggregation rules: ";
      for (const auto& r : m.rules) tab.summary += r + "; ";
      tab.summary += conv;
      break;
    }
    case ReportTemplate::data_efficiency: {
      const auto rows = report_detail::filter(db, "data-size", tab.name);
      std::map<std::size_t, std::vector<double>> by_size;
      for (const auto* r : rows) by_size[r->train_size].push_back(r->asr);
      tab.columns = {"train_size", "cell", "asr_pct"};
      tab.docs = {"adversary-owned flows used for surrogate and policy", "threat-model cell",
                  "attack success rate, percent (WhiteBox: best surrogate kind, GrayData: mean over kinds)"};
      for (const auto& [n, v] : by_size) {
        const double wb = *std::max_element(v.begin(), v.end());
        double gd = 0;
        for (double a : v) gd += a;
        gd /= static_cast<double>(v.size());
        tab.rows.push_back({std::to_string(n), "WhiteBox", num(100 * wb)});
        tab.rows.push_back({std::to_string(n), "GrayData", num(100 * gd)});
      }
      tab.summary = "Surrogate and policy retrained per size. " + conv;
      break;
    }
  }
  return tab;
}

// ---------------------------------------------------------------------------
// Pipeline

class Pipeline {
 public:
  static constexpr int kManifestVersion = 1;

  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), hash_(config_hash(cfg_)), root_(cfg_.output_dir) {
    validate(cfg_);
  }

  const PipelineConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }

  nlohmann::json manifest() const { return load_manifest(); }

  /// Runs one stage unless the manifest already holds it for this config with
  /// intact artifacts.
  StageOutcome run_stage(Stage s) {
    nlohmann::json m = load_manifest();
    if (m.value("config_hash", std::string{}) != hash_) m = reset_manifest(m);
    for (Stage up : upstream_of(s)) {
      if (!stage_intact(m, up)) {
        throw Error(Errc::missing_upstream_artifact,
                    "stage '" + stage_name(s) + "' needs '" + stage_name(up) + "' to run first");
      }
    }
    StageOutcome out;
    out.stage = s;
    if (stage_intact(m, s)) {
      out.cached = true;
      for (const auto& [k, v] : m["stages"][stage_name(s)]["artifacts"].items()) out.artifacts[k] = v["path"];
      return out;
    }
    remove_stage_files(m, s);
    manifest_ = &m;
    pending_ = nlohmann::json::object();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (s) {
        case Stage::ingest: run_ingest(); break;
        case Stage::train_nids: run_train_nids(); break;
        case Stage::train_agent: run_train_agent(); break;
        case Stage::attack: run_attack(); break;
        case Stage::bench: run_bench(); break;
        case Stage::report: run_report(); break;
      }
    } catch (...) {
      // Leave nothing on disk the manifest does not list.
      for (const auto& [k, v] : pending_.items()) {
        std::error_code ec;
        std::filesystem::remove(root_ / v["path"].get<std::string>(), ec);
      }
      m["stages"].erase(stage_name(s));
      manifest_ = nullptr;
      notes_ = nlohmann::json::array();
      save_manifest(m);
      throw;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto& entry = m["stages"][stage_name(s)];
    entry = {{"config_hash", hash_}, {"seconds", out.seconds}, {"artifacts", pending_}, {"seed", stage_seed(s)},
             {"notes", notes_}};
    notes_ = nlohmann::json::array();
    for (const auto& [k, v] : pending_.items()) out.artifacts[k] = v["path"];
    manifest_ = nullptr;
    save_manifest(m);
    return out;
  }

  std::vector<StageOutcome> run_all() {
    std::vector<StageOutcome> out;
    for (auto s : kAllStages) out.push_back(run_stage(s));
    return out;
  }

  /// Results database rows produced by the attack and bench stages.
  std::vector<BenchRecord> results() const {
    const auto m = load_manifest();
    std::vector<BenchRecord> db;
    for (const auto* stage : {"attack", "bench"}) {
      if (!m.contains("stages") || !m["stages"].contains(stage)) continue;
      const auto& arts = m["stages"][stage]["artifacts"];
      if (!arts.contains("results")) continue;
      const auto recs = read_results_jsonl((root_ / arts["results"]["path"].get<std::string>()).string());
      db.insert(db.end(), recs.begin(), recs.end());
    }
    return db;
  }

  std::map<std::string, std::vector<CurvePoint>> curves() const {
    const auto m = load_manifest();
    std::map<std::string, std::vector<CurvePoint>> out;
    if (!m.contains("stages") || !m["stages"].contains("train-agent")) return out;
    for (auto a : cfg_.agent.algorithms) {
      const std::string key = "curve-" + algorithm_name(a);
      const auto& arts = m["stages"]["train-agent"]["artifacts"];
      if (!arts.contains(key)) continue;
      std::ifstream in(root_ / arts[key]["path"].get<std::string>());
      out[algorithm_name(a)] = read_curve_csv(in);
    }
    return out;
  }

 private:
  // -- manifest helpers ------------------------------------------------------

  nlohmann::json load_manifest() const {
    std::ifstream in(manifest_path());
    if (!in) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      return nlohmann::json::object();
    }
  }

  void save_manifest(const nlohmann::json& m) const {
    std::filesystem::create_directories(root_);
    const auto tmp = manifest_path().string() + ".tmp";
    {
      std::ofstream o(tmp);
      if (!o) throw Error(Errc::io_error, "cannot write manifest in " + root_.string());
      o << m.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, manifest_path());
  }

  nlohmann::json reset_manifest(const nlohmann::json& old) const {
    if (old.contains("stages")) {
      for (auto s : kAllStages) remove_stage_files(old, s);
    }
    nlohmann::json m;
    m["schema_version"] = kManifestVersion;
    m["config_hash"] = hash_;
    m["root_seed"] = cfg_.seed;
    m["config"] = to_json(cfg_);
    m["versions"] = {{"nidsrl", kVersion},
                     {"codec_format", FeatureCodec::kFormatVersion},
                     {"model_format", NidsModel::kFormatVersion},
                     {"policy_format", policy_io::kVersion},
                     {"results_schema", kResultsSchemaVersion}};
    m["stages"] = nlohmann::json::object();
    return m;
  }

  static std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::missing_upstream_artifact, "missing artifact " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  bool stage_intact(const nlohmann::json& m, Stage s) const {
    if (!m.contains("stages") || !m["stages"].contains(stage_name(s))) return false;
    const auto& e = m["stages"][stage_name(s)];
    if (e.value("config_hash", std::string{}) != hash_) return false;
    for (const auto& [k, v] : e["artifacts"].items()) {
      const auto p = root_ / v["path"].get<std::string>();
      if (!std::filesystem::exists(p)) return false;
      if (content_hash(read_file(p)) != v["hash"].get<std::string>()) return false;
    }
    return true;
  }

  void remove_stage_files(const nlohmann::json& m, Stage s) const {
    if (!m.contains("stages") || !m["stages"].contains(stage_name(s))) return;
    for (const auto& [k, v] : m["stages"][stage_name(s)]["artifacts"].items()) {
      std::error_code ec;
      std::filesystem::remove(root_ / v["path"].get<std::string>(), ec);
    }
  }

  std::uint64_t stage_seed(Stage s) const { return derive_seed(cfg_.seed, 0x5747 + static_cast<std::uint64_t>(s)); }

  /// Writes `bytes` under a content-addressed name inside the stage directory.
  void put(Stage s, const std::string& logical, const std::string& ext, const std::string& bytes) {
    const std::string h = content_hash(bytes);
    const std::string rel = stage_name(s) + "/" + logical + "-" + h + "." + ext;
    std::filesystem::create_directories(root_ / stage_name(s));
    std::ofstream o(root_ / rel, std::ios::binary);
    if (!o) throw Error(Errc::io_error, "cannot write " + (root_ / rel).string());
    o << bytes;
    pending_[logical] = {{"path", rel}, {"hash", h}};
  }

  std::string get(Stage s, const std::string& logical) const {
    const auto& arts = (*manifest_)["stages"][stage_name(s)]["artifacts"];
    if (!arts.contains(logical)) {
      throw Error(Errc::missing_upstream_artifact, "artifact '" + logical + "' of stage '" + stage_name(s) + "'");
    }
    const std::string bytes = read_file(root_ / arts[logical]["path"].get<std::string>());
    if (content_hash(bytes) != arts[logical]["hash"].get<std::string>()) {
      throw Error(Errc::missing_upstream_artifact, "artifact '" + logical + "' changed on disk");
    }
    return bytes;
  }

  void note(const std::string& s) { notes_.push_back(s); }

  FlowSet get_flows(const std::string& logical) const {
    std::istringstream in(get(Stage::ingest, logical));
    return read_netflow(in).flows;
  }

  Detector get_detector(Stage s, const std::string& prefix) const {
    Detector d;
    d.codec = FeatureCodec::from_json(nlohmann::json::parse(get(s, prefix + "-codec")));
    d.model = NidsModel::from_json(nlohmann::json::parse(get(s, prefix + "-model")), d.codec.dim());
    return d;
  }

  PolicyNet get_policy(Algorithm a) const {
    std::istringstream in(get(Stage::train_agent, "policy-" + algorithm_name(a)));
    return read_policy(in);
  }

  static std::string csv_of(const FlowSet& flows) {
    std::ostringstream o;
    write_netflow(o, flows);
    return o.str();
  }

  std::string dataset_name() const {
    return cfg_.data.source == "synthetic" ? cfg_.data.profile
                                           : std::filesystem::path(cfg_.data.path).stem().string();
  }

  std::string ood_name() const {
    const std::string n = cfg_.data.ood_source == "synthetic"
                              ? cfg_.data.ood_profile
                              : std::filesystem::path(cfg_.data.ood_path).stem().string();
    return n == dataset_name() ? n + "-ood" : n;
  }

  FlowSet load_corpus(const std::string& source, const std::string& path, const std::string& profile,
                      std::uint64_t seed) {
    if (source == "synthetic") return generate_synthetic(cfg_.data.flows, seed, SyntheticProfile::by_name(profile));
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_upstream_artifact, "input data not found: " + path);
    auto rep = read_netflow(in);
    if (!rep.rejected.empty()) note(path + ": rejected " + std::to_string(rep.rejected.size()) + " rows");
    return std::move(rep.flows);
  }

  BenchRecord base_record(const std::string& experiment) const {
    BenchRecord r;
    r.experiment = experiment;
    r.dataset = dataset_name();
    r.train_dataset = dataset_name();
    r.victim_kind = model_kind_name(cfg_.victim_kind);
    r.surrogate_kind = model_kind_name(cfg_.surrogate_kind);
    r.steps = cfg_.budget.steps;
    r.budget = cfg_.budget;
    r.seed = cfg_.seed;
    r.memory_method = heap::method_name();
    return r;
  }

  static std::string jsonl_of(const std::vector<BenchRecord>& recs) {
    std::ostringstream o;
    for (const auto& r : recs) o << to_json(r).dump() << '\n';
    return o.str();
  }

  // -- stages ----------------------------------------------------------------

  void run_ingest() {
    const auto seed = stage_seed(Stage::ingest);
    const FlowSet corpus = load_corpus(cfg_.data.source, cfg_.data.path, cfg_.data.profile, derive_seed(seed, 1));
    const auto split = partition_flows(corpus, cfg_.split, derive_seed(seed, 2));
    put(Stage::ingest, "victim-flows", "csv", csv_of(split.victim_set));
    put(Stage::ingest, "train-flows", "csv", csv_of(split.train_set));
    put(Stage::ingest, "test-flows", "csv", csv_of(split.test_set));
    nlohmann::json summary = {{"dataset", dataset_name()}, {"flows", corpus.size()}};
    for (const auto& [name, fs] : {std::pair<std::string, const FlowSet*>{"victim", &split.victim_set},
                                   {"train", &split.train_set},
                                   {"test", &split.test_set}}) {
      summary["splits"][name] = {{"flows", fs->size()}, {"malicious", count_malicious(*fs)}};
    }
    if (cfg_.bench.matrix) {
      const FlowSet ood = load_corpus(cfg_.data.ood_source, cfg_.data.ood_path, cfg_.data.ood_profile, derive_seed(seed, 3));
      const auto osplit = partition_flows(ood, cfg_.split, derive_seed(seed, 4));
      put(Stage::ingest, "ood-train-flows", "csv", csv_of(osplit.train_set));
      summary["ood"] = {{"dataset", ood_name()}, {"train_flows", osplit.train_set.size()}};
    }
    put(Stage::ingest, "summary", "json", summary.dump(2));
  }

  void run_train_nids() {
    const FlowSet victim_set = get_flows("victim-flows");
    const FlowSet test = get_flows("test-flows");
    FeatureCodec codec = FeatureCodec::fit(victim_set, cfg_.top_k_ports);
    const auto data = encode_all(codec, victim_set);
    NidsModel model = train_model(cfg_.victim_kind, data, cfg_.hyperparams(), stage_seed(Stage::train_nids), codec.id());
    const auto rep = evaluate(model, encode_all(codec, test));
    put(Stage::train_nids, "victim-codec", "json", codec.to_json().dump());
    put(Stage::train_nids, "victim-model", "json", model.to_json().dump());
    put(Stage::train_nids, "victim-eval", "json",
        nlohmann::json{{"kind", model_kind_name(cfg_.victim_kind)},
                       {"test_flows", test.size()},
                       {"precision", rep.precision},
                       {"recall", rep.recall},
                       {"f1", rep.f1},
                       {"accuracy", rep.accuracy}}
            .dump(2));
  }

  void run_train_agent() {
    const FlowSet adversary = get_flows("train-flows");
    const Detector victim = get_detector(Stage::train_nids, "victim");
    const auto seed = stage_seed(Stage::train_agent);
    const Detector sur = fit_surrogate(adversary, victim, cfg_.surrogate_kind, cfg_.hyperparams(), cfg_.top_k_ports,
                                       derive_seed(seed, 1));
    put(Stage::train_agent, "surrogate-codec", "json", sur.codec.to_json().dump());
    put(Stage::train_agent, "surrogate-model", "json", sur.model.to_json().dump());
    for (auto a : cfg_.agent.algorithms) {
      TrainConfig tc = cfg_.train_config(a);
      tc.seed = derive_seed(seed, 2);
      const auto res = train_against(sur, adversary, cfg_.budget, tc);
      std::ostringstream pol, curve;
      write_policy(pol, res.policy);
      write_curve_csv(curve, res.curve);
      put(Stage::train_agent, "policy-" + algorithm_name(a), "nrlp", pol.str());
      put(Stage::train_agent, "curve-" + algorithm_name(a), "csv", curve.str());
    }
  }

  void run_attack() {
    const FlowSet test = get_flows("test-flows");
    const FlowSet adversary = get_flows("train-flows");
    const Detector victim = get_detector(Stage::train_nids, "victim");
    const Detector surrogate = get_detector(Stage::train_agent, "surrogate");
    const FlowSet targets = detected_malicious(victim, test, cfg_.attack.flows);
    if (targets.empty()) throw Error(Errc::no_detected_malicious, "victim detects no malicious test flow");
    const auto seed = stage_seed(Stage::attack);
    const BudgetSpec& b = cfg_.budget;
    const int reps = cfg_.attack.repetitions;

    std::vector<BenchRecord> recs;
    std::vector<AttackRow> rows;
    const auto record = [&](const std::string& method, const std::string& surrogate_kind, const CostReport& c) {
      BenchRecord r = base_record("cost");
      r.algorithm = method;
      r.surrogate_kind = surrogate_kind;
      r.train_size = adversary.size();
      r.asr = c.asr;
      r.detected = targets.size();
      r.mean_latency_ms = c.latency_ms;
      r.peak_memory_bytes = c.max_peak_bytes;
      r.mean_perturbation = c.mean_perturbation;
      r.memory_method = c.memory_method;
      r.finalize();
      recs.push_back(r);
      for (std::size_t i = 0; i < c.last.size(); ++i) rows.push_back({i, method, c.max_peak_bytes, c.last[i]});
    };

    for (auto a : cfg_.agent.algorithms) {
      const PolicyNet policy = get_policy(a);
      const auto cost = measure_cost(
          [&] {
            return [p = PolicyNet(policy), &victim, b](const FlowRecord& f) { return agent_attack(p, f, victim, b); };
          },
          targets, reps);
      record(algorithm_name(a), model_kind_name(cfg_.surrogate_kind), cost);
    }

    const int cap = cfg_.attack.fuzz_queries;
    const auto fuzz = measure_cost(
        [&] {
          return [v = Detector(victim), b, cap, seed, k = std::uint64_t{0}](const FlowRecord& f) mutable {
            return fuzz_attack(f, v, b, cap, derive_seed(seed, k++));
          };
        },
        targets, reps);
    record("Fuzzing", "-", fuzz);

    // PGD follows the victim's own gradients when it has them, otherwise an
    // MLP surrogate fitted on the adversary's data.
    std::optional<Detector> grad_model;
    std::string pgd_source = model_kind_name(cfg_.victim_kind);
    if (!is_differentiable(cfg_.victim_kind)) {
      if (is_differentiable(cfg_.surrogate_kind)) {
        grad_model = surrogate;
        pgd_source = model_kind_name(cfg_.surrogate_kind);
      } else {
        grad_model = fit_surrogate(adversary, victim, ModelKind::mlp, cfg_.hyperparams(), cfg_.top_k_ports,
                                   derive_seed(seed, 0x96d));
        pgd_source = "MLP";
      }
      note("PGD gradients from a " + pgd_source + " surrogate");
    }
    const PgdOptions popt{cfg_.attack.pgd_steps, cfg_.attack.pgd_step_size, false};
    const auto pgd = measure_cost(
        [&] {
          Detector v = victim;
          std::optional<Detector> g = grad_model;
          return [v = std::move(v), g = std::move(g), b, popt](const FlowRecord& f) {
            return pgd_attack(f, v, g ? *g : v, b, popt);
          };
        },
        targets, reps);
    record("PGD", pgd_source, pgd);

    std::ostringstream csv;
    write_attack_csv(csv, rows);
    put(Stage::attack, "attacks", "csv", csv.str());
    put(Stage::attack, "results", "jsonl", jsonl_of(recs));

    // Deployment episodes scored by the victim, one JSON object per step.
    const PolicyNet main_policy = get_policy(cfg_.agent.algorithms.front());
    std::ostringstream traces;
    const std::size_t n_traces = std::min(cfg_.attack.trace_episodes, targets.size());
    std::vector<double> obs(main_policy.obs_dim());
    for (std::size_t i = 0; i < n_traces; ++i) {
      EvasionEpisode ep(targets[i], b);
      ep.keep_trace = true;
      while (!ep.done) {
        main_policy.encoder().encode_into(ep.current, ep.t, b.steps, obs);
        const auto act = main_policy.act(obs, ActMode::deterministic);
        step_episode(ep, Triple{act[0], act[1], act[2]}, victim);
      }
      for (const auto& st : ep.trace) {
        auto j = to_json(st);
        j["episode"] = i;
        j["scorer"] = "victim";
        traces << j.dump() << '\n';
      }
    }
    put(Stage::attack, "traces", "jsonl", traces.str());
  }

  void run_bench() {
    const FlowSet adversary = get_flows("train-flows");
    const FlowSet test = get_flows("test-flows");
    const Detector victim = get_detector(Stage::train_nids, "victim");
    const Detector surrogate = get_detector(Stage::train_agent, "surrogate");
    const PolicyNet policy = get_policy(cfg_.agent.algorithms.front());
    const auto seed = stage_seed(Stage::bench);
    const Algorithm algo = cfg_.agent.algorithms.front();
    std::vector<BenchRecord> recs;
    nlohmann::json summary = nlohmann::json::object();

    if (cfg_.bench.t_sweep) {
      TrainConfig tc = cfg_.train_config(algo);
      tc.total_steps = cfg_.bench.t_sweep_steps;
      tc.seed = derive_seed(seed, 1);
      const FlowSet targets = detected_malicious(victim, test, cfg_.attack.flows);
      const auto sweep = sweep_T([&](const BudgetSpec& b) { return train_against(surrogate, adversary, b, tc).policy; },
                                 victim, targets, cfg_.budget, cfg_.bench.t_values, cfg_.bench.t_sweep_repetitions);
      for (const auto& p : sweep.points) {
        BenchRecord r = base_record("t-sweep");
        r.algorithm = algorithm_name(algo);
        r.steps = p.steps;
        r.budget.steps = p.steps;
        r.train_size = adversary.size();
        r.asr = p.asr;
        r.detected = targets.size();
        r.mean_latency_ms = p.latency_ms;
        r.finalize();
        recs.push_back(r);
        summary["t_sweep"]["probe_total"][std::to_string(p.steps)] = {
            {"delay_ms", p.probe_total[kDelay]}, {"bytes", p.probe_total[kBytes]}, {"packets", p.probe_total[kPkts]}};
      }
      summary["t_sweep"]["fit"] = {{"slope_ms_per_step", sweep.fit.slope},
                                   {"intercept_ms", sweep.fit.intercept},
                                   {"r2", sweep.fit.r2}};
    }

    if (cfg_.bench.sensitivity) {
      const auto grid = log_budget_grid(cfg_.bench.budget_grid_max);
      const auto axes = default_sweep_axes();
      try {
        const auto rows =
            sweep_budget(policy, victim, test, cfg_.budget.steps, grid, axes, cfg_.bench.sensitivity_flows);
        for (const auto& row : rows) {
          BenchRecord r = base_record("sensitivity");
          r.algorithm = algorithm_name(algo);
          r.category = row.category;
          r.axes = row.axes;
          r.budget.max_bytes = row.axes.find("bytes") != std::string::npos ? row.budget : 0;
          r.budget.max_pkts = row.axes.find("packets") != std::string::npos ? row.budget : 0;
          r.budget.max_delay_ms = row.axes == "delay" ? row.budget : 0;
          r.train_size = adversary.size();
          r.asr = row.asr;
          r.detected = row.detected;
          r.finalize();
          recs.push_back(r);
        }
      } catch (const Error& e) {
        if (e.code() != Errc::invalid_argument) throw;
        note(std::string("sensitivity skipped: ") + e.what());
      }
    }

    // Agents keyed by (training corpus, size, surrogate kind), shared by the
    // matrix and the data-size sweep.
    std::map<std::tuple<std::string, std::size_t, ModelKind>, double> asr_cache;
    const auto agent_asr = [&](const std::string& corpus, const FlowSet& flows, ModelKind kind) {
      const auto key = std::make_tuple(corpus, flows.size(), kind);
      if (auto it = asr_cache.find(key); it != asr_cache.end()) return it->second;
      AgentSetup setup;
      setup.surrogate_kind = kind;
      setup.hp = cfg_.hyperparams();
      setup.top_k_ports = cfg_.top_k_ports;
      setup.budget = cfg_.budget;
      setup.train = cfg_.train_config(algo);
      setup.train.total_steps = cfg_.bench.agent_steps;
      setup.seed = derive_seed(seed, 0x100 + static_cast<std::uint64_t>(kind));
      const auto agent = train_agent(flows, victim, setup);
      const double asr = policy_asr(agent.policy, victim, test, cfg_.budget).asr;
      asr_cache[key] = asr;
      return asr;
    };

    if (cfg_.bench.matrix) {
      const FlowSet ood = get_flows("ood-train-flows");
      for (const auto& [name, flows] : {std::pair<std::string, const FlowSet*>{dataset_name(), &adversary},
                                        {ood_name(), &ood}}) {
        for (ModelKind k : cfg_.bench.surrogate_kinds) {
          BenchRecord r = base_record("matrix");
          r.algorithm = algorithm_name(algo);
          r.train_dataset = name;
          r.surrogate_kind = model_kind_name(k);
          r.train_size = flows->size();
          r.threat_cell = "grid";
          r.asr = agent_asr(name, *flows, k);
          r.finalize();
          recs.push_back(r);
        }
      }
    }

    if (cfg_.bench.data_efficiency) {
      std::vector<std::size_t> sizes;
      for (auto n : cfg_.bench.data_sizes) {
        if (n < adversary.size()) {
          sizes.push_back(n);
        } else {
          note("data size " + std::to_string(n) + " truncated to the corpus");
        }
      }
      sizes.push_back(adversary.size());
      std::sort(sizes.begin(), sizes.end());
      sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
      std::map<std::pair<std::size_t, ModelKind>, double> seen;
      const auto points = sweep_data_size(sizes, cfg_.bench.surrogate_kinds, [&](std::size_t n, ModelKind k) {
        const FlowSet sub = subsample(adversary, n, derive_seed(seed, 0x200 + n));
        return seen[{n, k}] = agent_asr(dataset_name(), sub, k);
      });
      for (const auto& p : points) {
        if (p.cell != ThreatCell::white_box) continue;
        if (!p.asr) {
          note("data size " + std::to_string(p.size) + " unavailable: " + p.note);
          continue;
        }
        for (ModelKind k : cfg_.bench.surrogate_kinds) {
          BenchRecord r = base_record("data-size");
          r.algorithm = algorithm_name(algo);
          r.surrogate_kind = model_kind_name(k);
          r.train_size = p.size;
          r.threat_cell = "grid";
          r.asr = seen.at({p.size, k});
          r.finalize();
          recs.push_back(r);
        }
      }
    }

    put(Stage::bench, "results", "jsonl", jsonl_of(recs));
    put(Stage::bench, "summary", "json", summary.dump(2));
  }

  void run_report() {
    std::vector<BenchRecord> db;
    for (const auto& [stage, key] : {std::pair{Stage::attack, "results"}, std::pair{Stage::bench, "results"}}) {
      std::istringstream in(get(stage, key));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) db.push_back(bench_record_from_json(nlohmann::json::parse(line)));
      }
    }
    std::map<std::string, std::vector<CurvePoint>> curves;
    for (auto a : cfg_.agent.algorithms) {
      std::istringstream in(get(Stage::train_agent, "curve-" + algorithm_name(a)));
      curves[algorithm_name(a)] = read_curve_csv(in);
    }
    std::ostringstream all;
    write_results_csv(all, db);
    put(Stage::report, "results", "csv", all.str());
    for (auto t : kAllTemplates) {
      try {
        const auto tab = render_report(t, db, curves);
        std::ostringstream csv;
        tab.write_csv(csv);
        put(Stage::report, template_name(t), "csv", csv.str());
        put(Stage::report, template_name(t) + "-summary", "txt", tab.text());
      } catch (const Error& e) {
        if (e.code() != Errc::empty_filter) throw;
        note(std::string("template skipped: ") + e.what());
      }
    }
  }

  PipelineConfig cfg_;
  std::string hash_;
  std::filesystem::path root_;
  nlohmann::json* manifest_ = nullptr;
  nlohmann::json pending_ = nlohmann::json::object();
  nlohmann::json notes_ = nlohmann::json::array();
};

}  // namespace nidsrl
