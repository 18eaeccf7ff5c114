// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset. Exit status is non-zero if any selected
// criterion fails.
#include "nidsrl/alloc_hooks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "nidsrl/nidsrl.hpp"

using namespace nidsrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

FlowRecord make_flow(double in_bytes, double in_pkts, double duration_ms, int label = 1) {
  FlowRecord f;
  f.protocol = 6;
  f.l4_dst_port = 80;
  f.l4_src_port = 40000;
  f.tcp_flags = 27;
  f.in_bytes = in_bytes;
  f.in_pkts = in_pkts;
  f.out_bytes = 2 * in_bytes;
  f.out_pkts = in_pkts;
  f.flow_duration_ms = duration_ms;
  f.label = label;
  f.attack = label ? "DoS" : "Benign";
  return f;
}

struct AlwaysMalicious {
  double predict_proba(const FlowRecord&) const { return 0.9; }
  int decide(const FlowRecord&) const { return 1; }
};

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// ---------------------------------------------------------------------------
// Shared fixtures, built on first use

constexpr std::uint64_t kCorpusSeed = 20240;
constexpr std::size_t kCorpusFlows = 50000;
constexpr std::int64_t kLearningSteps = 100000;
constexpr std::int64_t kComparisonSteps = 50000;  // agents in the ordering, sensitivity and data-size checks

struct Corpus {
  DataSplit split;
  Hyperparams hp;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus c;
    c.split = partition_flows(generate_synthetic(kCorpusFlows, kCorpusSeed), {}, derive_seed(kCorpusSeed, 1));
    return c;
  }();
  return c;
}

Detector train_victim(const FlowSet& flows, ModelKind kind, const Hyperparams& hp, std::uint64_t seed) {
  Detector d;
  d.codec = FeatureCodec::fit(flows);
  d.model = train_model(kind, encode_all(d.codec, flows), hp, seed, d.codec.id());
  return d;
}

TrainConfig ppo_steps(std::int64_t steps) {
  TrainConfig c = TrainConfig::ppo();
  c.total_steps = steps;
  return c;
}

struct LearningRun {
  Detector victim;
  TrainedAgent agent;
  AgentSetup setup;
  double seconds = 0;
};

const LearningRun& learning_run() {
  static const LearningRun r = [] {
    const auto t0 = Clock::now();
    LearningRun r;
    const auto& c = corpus();
    r.victim = train_victim(c.split.victim_set, ModelKind::mlp, c.hp, derive_seed(kCorpusSeed, 2));
    r.setup.surrogate_kind = ModelKind::mlp;
    r.setup.train = ppo_steps(kLearningSteps);
    r.setup.seed = derive_seed(kCorpusSeed, 3);
    r.agent = train_agent(c.split.train_set, r.victim, r.setup);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return r;
}

struct PipelineRun {
  fs::path dir;
  double seconds = 0;
  std::optional<std::string> error;
  std::vector<StageOutcome> outcomes;
  std::vector<BenchRecord> db;
  std::map<std::string, std::vector<CurvePoint>> curves;
  nlohmann::json manifest;
  PipelineConfig cfg;
};

const PipelineRun& pipeline_run() {
  static const PipelineRun r = [] {
    PipelineRun r;
    r.dir = fs::temp_directory_path() / ("nidsrl-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(r.dir);
    r.cfg.output_dir = r.dir.string();
    const auto t0 = Clock::now();
    try {
      Pipeline p(r.cfg);
      r.outcomes = p.run_all();
      r.seconds = seconds_since(t0);
      r.db = p.results();
      r.curves = p.curves();
      r.manifest = p.manifest();
    } catch (const std::exception& e) {
      r.seconds = seconds_since(t0);
      r.error = e.what();
    }
    return r;
  }();
  return r;
}

// ---------------------------------------------------------------------------
// 1. normalization

struct NormRow {
  double in_bytes, duration, bytes_unit, duration_unit;
};

// log1p(v) / log1p(max), computed outside the library
const NormRow kNormTable[20] = {
    {0, 0.0, 0, 0},
    {1, 0.5, 0.050171662312452667, 0.036853373423487511},
    {9, 1.0, 0.16666665460293797, 0.063001257991843515},
    {40, 2.0, 0.26879728999710234, 0.099854631415331019},
    {99, 3.0, 0.33333330920587595, 0.12600251598368703},
    {100, 5.0, 0.33405353811751781, 0.16285588940717455},
    {250, 8.0, 0.39994559129782692, 0.19970926283066209},
    {999, 13.0, 0.4999999638088139, 0.23986814971106643},
    {1000, 21.0, 0.50007231005013042, 0.28094980190275276},
    {1500, 34.0, 0.5293967437215501, 0.32315128266373133},
    {4095, 55.0, 0.60205994774943195, 0.36587066569475346},
    {10000, 89.0, 0.66667385629070519, 0.40899491176701402},
    {12345, 144.0, 0.68192099607945222, 0.45234330493801334},
    {50000, 233.0, 0.78316305833592914, 0.4958428781883773},
    {65535, 377.0, 0.80274659699924267, 0.53943204395705957},
    {99999, 610.0, 0.83333327301468985, 0.58307844264903241},
    {100000, 987.0, 0.83333399683515486, 0.62675965055466842},
    {250000, 1597.0, 0.89965689252177705, 0.67046264426869062},
    {999999, 2584.0, 0.99999992761762779, 0.71417902013857837},
    {1000000, 60000.0, 1, 1},
};

Verdict normalization() {
  const auto t0 = Clock::now();
  FlowSet fs;
  for (const auto& r : kNormTable) fs.push_back(make_flow(r.in_bytes, 1, r.duration));
  const auto codec = FeatureCodec::fit(fs);
  const auto bi = FeatureCodec::numeric_index(NumericFeature::in_bytes);
  const auto di = FeatureCodec::numeric_index(NumericFeature::flow_duration);
  double worst = 0;
  std::size_t roundtrip_bad = 0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto x = codec.encode(fs[i]);
    worst = std::max({worst, std::abs(x[bi] - kNormTable[i].bytes_unit), std::abs(x[di] - kNormTable[i].duration_unit)});
    const auto back = codec.decode(x);
    if (back.in_bytes != fs[i].in_bytes || back.in_pkts != fs[i].in_pkts || back.protocol != fs[i].protocol ||
        back.l4_dst_port != fs[i].l4_dst_port ||
        std::abs(back.flow_duration_ms - fs[i].flow_duration_ms) > 1e-6 * (1 + fs[i].flow_duration_ms)) {
      ++roundtrip_bad;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-9 && roundtrip_bad == 0 && secs < 1.0,
          "max abs error " + fmt(worst) + " (< 1e-9), round-trip mismatches " + std::to_string(roundtrip_bad) +
              ", " + fmt(secs) + " s (< 1 s)"};
}

// ---------------------------------------------------------------------------
// 2. reward

Verdict reward_table() {
  const Triple total = {1000, 5000, 50};  // delay, bytes, packets
  struct Case {
    const char* name;
    int decision;
    Triple cumulative;
    double expected;
  };
  const Case cases[] = {
      {"not evaded", 1, {200, 1000, 5}, 0.0},
      {"evaded, zero perturbation", 0, {0, 0, 0}, 1.0},
      {"evaded, full byte budget", 0, {0, 5000, 0}, 0.0},
      {"evaded, full delay budget", 0, {1000, 0, 0}, 0.0},
      {"evaded, half budget on the largest axis", 0, {0, 2500, 10}, 0.5},  // 1 - max(0, 0.5, 0.2)
  };
  double worst = 0;
  std::string bad;
  for (const auto& c : cases) {
    const double err = std::abs(evasion_reward(c.decision, c.cumulative, total) - c.expected);
    worst = std::max(worst, err);
    if (err > 1e-12) bad += std::string(" [") + c.name + "]";
  }
  return {bad.empty(), std::to_string(std::size(cases)) + " cases, max error " + fmt(worst) + " (<= 1e-12)" + bad};
}

// ---------------------------------------------------------------------------
// 3. budget safety

Verdict budget_safety() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(31337);
  std::uniform_real_distribution<double> any(-3, 3);
  std::size_t violations = 0, steps = 0;
  const int sequences = 100000;
  for (int seq = 0; seq < sequences; ++seq) {
    BudgetSpec b;
    b.max_bytes = static_cast<double>(gen() % 200001);
    b.max_pkts = static_cast<double>(gen() % 301) + (gen() % 2 ? 0.5 : 0.0);
    b.max_delay_ms = static_cast<double>(gen() % 100001) / 3.0;
    b.steps = 1 + static_cast<int>(gen() % 40);
    EvasionEpisode ep(make_flow(static_cast<double>(gen() % 100000), static_cast<double>(gen() % 200),
                                static_cast<double>(gen() % 10000)),
                      b);
    const Triple eps = b.per_step();
    const Triple box = b.total();
    while (!ep.done) {
      Triple a{};
      for (std::size_t k = 0; k < kActionDim; ++k) {
        const auto roll = gen() % 50;
        a[k] = roll == 0 ? std::nan("") : roll == 1 ? 1e300 : roll == 2 ? -1e300 : any(gen) * eps[k];
      }
      step_episode(ep, a, AlwaysMalicious{});
      ++steps;
      for (std::size_t k = 0; k < kActionDim; ++k) {
        const double d = numeric(ep.current, kAxisFeature[k]) - numeric(ep.s0, kAxisFeature[k]);
        if (!(d >= 0 && d <= box[k])) ++violations;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 30.0, std::to_string(sequences) + " sequences, " + std::to_string(steps) +
                                              " steps, " + std::to_string(violations) + " violations, " + fmt(secs) +
                                              " s (< 30 s)"};
}

// ---------------------------------------------------------------------------
// 4. gradients

double model_gradient_error(const NidsModel& m, std::vector<double> x) {
  const auto g = *m.gradient(x);
  const double h = 1e-5;
  double num = 0, den = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = softplus(m.logit(x));
    x[j] = keep - h;
    const double down = softplus(m.logit(x));
    x[j] = keep;
    const double fd = (up - down) / (2 * h);
    num += (g[j] - fd) * (g[j] - fd);
    den += fd * fd;
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

double training_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t obs = 9;
  PolicyNet pi(obs, {1.0, 3.0, 0.5}, {16, 16}, -0.3);
  pi.trunk().init(rng, 1.0);
  for (Eigen::Index k = 0; k < pi.log_std().size(); ++k) pi.log_std()[k] = -0.8 + 0.3 * uniform01(rng);
  nn::Mlp vf(PolicyNet::layer_sizes(obs, {16, 16}, 1), nn::Activation::tanh);
  vf.init(rng, 1.0);
  const Eigen::Index b = 16;
  nn::Matrix dense = nn::Matrix::Zero(static_cast<Eigen::Index>(obs), b);
  for (Eigen::Index k = 0; k < b; ++k) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(obs); ++j) {
      if (uniform01(rng) < 0.6) dense(j, k) = 2 * uniform01(rng) - 1;
    }
  }
  Minibatch mb;
  mb.obs = dense.sparseView();
  mb.u.resize(3, b);
  mb.old_logp.resize(b);
  mb.advantage.resize(b);
  mb.ret.resize(b);
  const auto cache = pi.trunk().forward(mb.obs);
  for (Eigen::Index k = 0; k < b; ++k) {
    for (Eigen::Index j = 0; j < 3; ++j) mb.u(j, k) = cache.out(j, k) + 0.7 * standard_normal(rng);
    mb.old_logp[k] =
        PolicyNet::log_prob(mb.u.col(k), cache.out.col(k), pi.log_std()) + 0.1 * (2 * uniform01(rng) - 1);
    mb.advantage[k] = standard_normal(rng);
    mb.ret[k] = standard_normal(rng);
  }
  const LossSpec spec{0.2, 0.5, 0.01};
  ActorCriticGrad g;
  g.reset(pi, vf);
  actor_critic_loss(pi, vf, mb, spec, &g);
  const double h = 1e-6;
  double num = 0, den = 0;
  const auto probe = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double up = actor_critic_loss(pi, vf, mb, spec, nullptr).total;
    p = keep - h;
    const double down = actor_critic_loss(pi, vf, mb, spec, nullptr).total;
    p = keep;
    const double fd = (up - down) / (2 * h);
    num += (analytic - fd) * (analytic - fd);
    den += fd * fd;
  };
  for (Eigen::Index k = 0; k < g.trunk.size(); ++k) probe(pi.trunk().params()[k], g.trunk[k]);
  for (Eigen::Index k = 0; k < g.log_std.size(); ++k) probe(pi.log_std()[k], g.log_std[k]);
  for (Eigen::Index k = 0; k < g.value.size(); ++k) probe(vf.params()[k], g.value[k]);
  return std::sqrt(num / den);
}

Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto split = partition_flows(generate_synthetic(6000, 4242), {0.6, 0.2, 0.2}, 7);
  const auto codec = FeatureCodec::fit(split.victim_set, 64);
  const auto train = encode_all(codec, split.victim_set);
  const auto test = encode_all(codec, split.test_set);
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> unit(0, 1);
  std::string detail;
  bool ok = true;
  for (auto kind : {ModelKind::lr, ModelKind::mlp}) {
    const auto m = train_model(kind, train, {}, 5, codec.id());
    double worst = 0;
    for (int p = 0; p < 100; ++p) {
      // a held-out row with its numeric coordinates redrawn inside the unit box
      std::vector<double> x(codec.dim(), 0.0);
      const auto row = static_cast<Eigen::Index>(gen() % static_cast<std::uint64_t>(test.x.rows()));
      for (SparseRows::InnerIterator it(test.x, row); it; ++it) x[static_cast<std::size_t>(it.col())] = it.value();
      for (std::size_t j = 0; j < kNumNumeric; ++j) x[j] = unit(gen);
      worst = std::max(worst, model_gradient_error(m, x));
    }
    ok = ok && worst < 1e-3;
    detail += std::string(model_kind_name(kind)) + " max rel " + fmt(worst) + ", ";
  }
  double worst = 0;
  for (std::uint64_t s = 1; s <= 100; ++s) worst = std::max(worst, training_gradient_error(s));
  ok = ok && worst < 1e-3;
  const double secs = seconds_since(t0);
  ok = ok && secs < 60;
  return {ok, detail + "policy/value max rel " + fmt(worst) + " (all < 1e-3 over 100 points), " + fmt(secs) +
                  " s (< 60 s)"};
}

// ---------------------------------------------------------------------------
// 5. learning gain with a brute-force feasibility oracle

/// Exhaustive search of the grid {i/100 * box} on all three axes against an
/// MLP detector. The first layer is split per axis so each grid point costs
/// one addition plus the deeper layers; packet values are evaluated as one
/// batch.
class GridOracle {
 public:
  GridOracle(const Detector& victim, const Triple& box) : victim_(victim), box_(box) {
    net_ = &std::get<nn::Mlp>(victim.model.params());
    const double t = victim.model.threshold();
    cut_ = std::log(t / (1 - t));
  }

  bool evadable(const FlowRecord& f) const {
    const Split sp = split(f);
    nn::Matrix z(sp.z0.size(), kN);
    // largest perturbations first: evadable flows usually stop early
    for (int ib = kN - 1; ib >= 0; --ib) {
      for (int id = kN - 1; id >= 0; --id) {
        const nn::Vector base = sp.z0 + sp.shift[kBytes].col(ib) + sp.shift[kDelay].col(id);
        z = sp.shift[kPkts].colwise() + base;
        if (deep(z).minCoeff() < cut_) return true;
      }
    }
    return false;
  }

  /// Largest gap between the split evaluation and the detector's own logit on
  /// random grid points, plus any grid point that feasibility rounding moves.
  double self_check(const FlowSet& flows, std::mt19937_64& gen) const {
    double gap = 0;
    for (const auto& f : flows) {
      const Split sp = split(f);
      for (int t = 0; t < 5; ++t) {
        const int i[kActionDim] = {static_cast<int>(gen() % kN), static_cast<int>(gen() % kN),
                                   static_cast<int>(gen() % kN)};
        FlowRecord g = f;
        for (std::size_t k = 0; k < kActionDim; ++k) numeric(g, kAxisFeature[k]) += box_[k] * i[k] / 100.0;
        nn::Matrix z = sp.z0 + sp.shift[kBytes].col(i[kBytes]) + sp.shift[kDelay].col(i[kDelay]) +
                       sp.shift[kPkts].col(i[kPkts]);
        gap = std::max(gap, std::abs(deep(z)(0, 0) - victim_.model.logit(victim_.codec.encode(g))));
        const FlowRecord feasible = apply_perturbation(f, perturbation_of(f, g), box_);
        for (std::size_t k = 0; k < kActionDim; ++k) {
          gap = std::max(gap, std::abs(numeric(feasible, kAxisFeature[k]) - numeric(g, kAxisFeature[k])));
        }
      }
    }
    return gap;
  }

 private:
  static constexpr int kN = 101;

  struct Split {
    nn::Vector z0;
    std::array<nn::Matrix, kActionDim> shift;  // first-layer change per axis value
  };

  Split split(const FlowRecord& f) const {
    const auto& codec = victim_.codec;
    const auto x0 = codec.encode(f);
    const auto w0 = net_->weight(0);
    Split sp;
    sp.z0 = net_->bias(0);
    for (std::size_t j = 0; j < x0.size(); ++j) {
      if (x0[j] != 0.0) sp.z0 += w0.col(static_cast<Eigen::Index>(j)) * x0[j];
    }
    for (std::size_t k = 0; k < kActionDim; ++k) {
      const auto idx = FeatureCodec::numeric_index(kAxisFeature[k]);
      sp.shift[k].resize(sp.z0.size(), kN);
      for (int i = 0; i < kN; ++i) {
        FlowRecord g = f;
        numeric(g, kAxisFeature[k]) += box_[k] * i / 100.0;
        const double u = codec.encode(g)[idx];
        sp.shift[k].col(i) = w0.col(static_cast<Eigen::Index>(idx)) * (u - x0[idx]);
      }
    }
    return sp;
  }

  /// Hidden layers and output for a batch of first-layer pre-activations.
  nn::Matrix deep(const nn::Matrix& z) const {
    nn::Matrix h = z.cwiseMax(0.0);
    for (std::size_t l = 1; l < net_->layers(); ++l) {
      nn::Matrix next = net_->weight(l) * h;
      next.colwise() += net_->bias(l);
      h = l + 1 == net_->layers() ? std::move(next) : nn::Matrix(next.cwiseMax(0.0));
    }
    return h;
  }

  const Detector& victim_;
  Triple box_;
  const nn::Mlp* net_ = nullptr;
  double cut_ = 0;
};

constexpr std::size_t kOracleFlows = 300;

Verdict learning_gain() {
  const auto t0 = Clock::now();
  const auto& run = learning_run();
  const auto& test = corpus().split.test_set;
  const BudgetSpec& budget = run.setup.budget;
  const PolicyNet untrained =
      initial_policy(ObservationEncoder(run.agent.surrogate.codec), budget, run.setup.train, run.setup.seed);
  const auto before = policy_asr(untrained, run.victim, test, budget);
  const auto after = policy_asr(run.agent.policy, run.victim, test, budget);
  const double gain = after.asr - before.asr;

  const FlowSet detected = detected_malicious(run.victim, test);
  FlowSet sample;
  const std::size_t stride = std::max<std::size_t>(1, detected.size() / kOracleFlows);
  for (std::size_t i = 0; i < detected.size() && sample.size() < kOracleFlows; i += stride) sample.push_back(detected[i]);
  const GridOracle oracle(run.victim, budget.total());
  std::mt19937_64 gen(5);
  const double gap = oracle.self_check(FlowSet(sample.begin(), sample.begin() + 20), gen);
  std::size_t evadable = 0, agent_hits = 0;
  for (const auto& f : sample) {
    evadable += oracle.evadable(f);
    agent_hits += run.victim.decide(rollout_deploy(run.agent.policy, f, budget)) == 0;
  }
  const double frac = static_cast<double>(evadable) / static_cast<double>(sample.size());
  const double secs = run.seconds + seconds_since(t0);
  const bool ok = gain >= 0.20 && frac >= gain && gap < 1e-9 && secs < 900;
  return {ok, "ASR untrained " + fmt(100 * before.asr) + "% -> trained " + fmt(100 * after.asr) + "% on " +
                  std::to_string(after.detected) + " detected flows, gain " + fmt(100 * gain) +
                  " points (>= 20); grid oracle: " + std::to_string(evadable) + "/" + std::to_string(sample.size()) +
                  " = " + fmt(100 * frac) + "% evadable (>= gain), agent evades " + std::to_string(agent_hits) +
                  " of them, oracle/detector logit gap " + fmt(gap) + "; " + fmt(secs) + " s (< 900 s)"};
}

// ---------------------------------------------------------------------------
// 6. robustness ordering

Verdict robustness_ordering() {
  const auto& c = corpus();
  const ModelKind order[] = {ModelKind::gbt, ModelKind::rf, ModelKind::mlp};  // expected least to most evadable
  std::string detail;
  std::vector<double> inversions;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double asr[3];
    for (int k = 0; k < 3; ++k) {
      const Detector victim = train_victim(c.split.victim_set, order[k], c.hp, derive_seed(seed, 10 + k));
      AgentSetup setup;
      setup.surrogate_kind = order[k];
      setup.train = ppo_steps(kComparisonSteps);
      setup.seed = derive_seed(seed, 20 + k);
      const auto agent = train_agent(c.split.train_set, victim, setup);
      asr[k] = policy_asr(agent.policy, victim, c.split.test_set, setup.budget).asr;
    }
    for (int k = 0; k < 2; ++k) {
      if (asr[k] > asr[k + 1]) inversions.push_back(asr[k] - asr[k + 1]);
    }
    detail += "seed " + std::to_string(seed) + ": GBT " + fmt(100 * asr[0]) + "%, RF " + fmt(100 * asr[1]) +
              "%, MLP " + fmt(100 * asr[2]) + "%; ";
  }
  const bool ok = inversions.empty() || (inversions.size() == 1 && inversions[0] <= 0.05);
  std::string inv = std::to_string(inversions.size()) + " inversion(s)";
  for (double v : inversions) inv += " " + fmt(100 * v) + "pt";
  return {ok, detail + inv + " (allowed: at most one of <= 5 points)"};
}

// ---------------------------------------------------------------------------
// 7. throughput identity

Verdict throughput_identity() {
  const auto& run = pipeline_run();
  if (run.error) return {false, "pipeline failed: " + *run.error};
  double worst = 0;
  for (const auto& r : run.db) {
    const double expect = r.mean_latency_ms > 0 ? r.asr / (r.mean_latency_ms / 1000.0) : 0.0;
    worst = std::max(worst, std::abs(r.throughput - expect));
  }
  const double spot = throughput_of(0.479, 5.72);
  const bool ok = !run.db.empty() && worst <= 1e-6 && std::abs(spot - 83.7) < 0.05;
  return {ok, std::to_string(run.db.size()) + " records, max |throughput - asr/latency_s| " + fmt(worst) +
                  " (<= 1e-6); 0.479 / 5.72 ms = " + fmt(spot, 6) + "/s"};
}

// ---------------------------------------------------------------------------
// 8. cost ordering

Verdict cost_ordering() {
  const auto& run = learning_run();
  const auto& test = corpus().split.test_set;
  const BudgetSpec b = run.setup.budget;
  const Detector& victim = run.victim;
  const FlowSet targets = detected_malicious(victim, test, 200);
  const int reps = 3;
  const auto agent = measure_cost(
      [&] {
        return [p = PolicyNet(run.agent.policy), &victim, b](const FlowRecord& f) {
          return agent_attack(p, f, victim, b);
        };
      },
      targets, reps);
  const auto fuzz = measure_cost(
      [&] {
        return [v = Detector(victim), b, k = std::uint64_t{0}](const FlowRecord& f) mutable {
          return fuzz_attack(f, v, b, 1000, derive_seed(77, k++));
        };
      },
      targets, reps);
  const auto pgd = measure_cost(
      [&] { return [v = Detector(victim), b](const FlowRecord& f) { return pgd_attack(f, v, v, b); }; }, targets,
      reps);
  bool ok = heap::tracking();
  std::string detail;
  for (int r = 0; r < reps; ++r) {
    const bool mem = agent.peak_bytes[r] < fuzz.peak_bytes[r] && agent.peak_bytes[r] < pgd.peak_bytes[r];
    const bool lat = agent.mean_latency_ms[r] < pgd.mean_latency_ms[r];
    ok = ok && mem && lat;
    detail += "rep " + std::to_string(r + 1) + ": memory MB agent " + fmt(agent.peak_bytes[r] / 1e6) + " / fuzz " +
              fmt(fuzz.peak_bytes[r] / 1e6) + " / PGD " + fmt(pgd.peak_bytes[r] / 1e6) + ", latency ms agent " +
              fmt(agent.mean_latency_ms[r]) + " / PGD " + fmt(pgd.mean_latency_ms[r]) + (mem && lat ? "" : " [X]") +
              "; ";
  }
  return {ok, detail + std::to_string(targets.size()) + " flows, " + heap::method_name()};
}

// ---------------------------------------------------------------------------
// 9. episode-length sweep

Verdict t_sweep_linearity() {
  const auto& run = pipeline_run();
  if (run.error) return {false, "pipeline failed: " + *run.error};
  std::vector<double> x, y;
  std::set<int> seen;
  for (const auto& r : run.db) {
    if (r.experiment != "t-sweep") continue;
    x.push_back(r.steps);
    y.push_back(r.mean_latency_ms);
    seen.insert(r.steps);
  }
  if (x.size() < 2) return {false, "no t-sweep records"};
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);

  std::optional<Triple> first;
  bool same = true;
  std::string totals;
  for (int t : run.cfg.bench.t_values) {
    BudgetSpec b = run.cfg.budget;
    b.steps = t;
    const Triple p = probe_total(b);
    if (!first) first = p;
    same = same && p == *first;
  }
  const bool grid = seen == std::set<int>{1, 10, 20, 40};
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts += "T=" + fmt(x[i]) + ": " + fmt(y[i]) + " ms, ";
  return {r2 >= 0.95 && same && grid, pts + "R^2 " + fmt(r2) + " (>= 0.95), probe totals " +
                                          (same ? "identical" : "DIFFER") + " (bytes " + fmt((*first)[kBytes], 10) +
                                          ", packets " + fmt((*first)[kPkts], 10) + ", delay " +
                                          fmt((*first)[kDelay], 10) + ")"};
}

// ---------------------------------------------------------------------------
// 10. volumetric sensitivity

Verdict volumetric_direction() {
  const auto profile = SyntheticProfile::by_name("volumetric");
  const auto grid = log_budget_grid(1e5);
  const std::vector<SweepAxes> axes = {{"bytes+packets", {false, true, true}}};
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto split = partition_flows(generate_synthetic(20000, derive_seed(seed, 40), profile), {}, seed);
    const Detector victim = train_victim(split.victim_set, ModelKind::mlp, {}, derive_seed(seed, 41));
    AgentSetup setup;
    setup.train = ppo_steps(kComparisonSteps);
    setup.seed = derive_seed(seed, 42);
    const auto agent = train_agent(split.train_set, victim, setup);
    const auto rows = sweep_budget(agent.policy, victim, split.test_set, setup.budget.steps, grid, axes);
    std::map<std::string, std::pair<double, double>> span;  // category -> (asr at 0, asr at max)
    for (const auto& r : rows) {
      if (r.budget == grid.front()) span[r.category].first = r.asr;
      if (r.budget == grid.back()) span[r.category].second = r.asr;
    }
    const auto gain = [&](const std::string& c) { return span.at(c).second - span.at(c).first; };
    if (!span.count("DenialOfService") || !span.count("MalwarePersist")) {
      return {false, "seed " + std::to_string(seed) + ": missing DoS or MalwarePersist rows"};
    }
    const double dos = gain("DenialOfService"), mal = gain("MalwarePersist");
    ok = ok && dos > mal;
    detail += "seed " + std::to_string(seed) + ": DoS +" + fmt(100 * dos) + "pt vs MalwarePersist +" +
              fmt(100 * mal) + "pt; ";
  }
  return {ok, detail + "bytes+packets budget 0 -> 1e5, DoS gain must be strictly larger on every seed"};
}

// ---------------------------------------------------------------------------
// 11. threat matrix

Verdict matrix_dominance() {
  const auto& run = pipeline_run();
  if (run.error) return {false, "pipeline failed: " + *run.error};
  std::vector<MatrixEntry> entries;
  for (const auto& r : run.db) {
    if (r.experiment == "matrix") entries.push_back({r.dataset, r.victim_kind, r.train_dataset, r.surrogate_kind, r.asr});
  }
  if (entries.empty()) return {false, "no matrix records"};
  ThreatMatrix m;
  try {
    m = threat_matrix(entries);
  } catch (const Error& e) {
    return {false, e.what()};
  }
  const double wb = m.cell(ThreatCell::white_box);
  bool dominant = true;
  for (auto c : kAllThreatCells) dominant = dominant && wb >= m.cell(c);
  const bool bb = m.cell(ThreatCell::black_box) > 0;

  // hand aggregation of the first victim's 2x2 block
  std::map<std::string, std::map<std::string, double>> block;  // corpus -> kind -> asr
  const auto& v0 = entries.front();
  for (const auto& e : entries) {
    if (e.victim_dataset == v0.victim_dataset && e.victim_kind == v0.victim_kind) block[e.train_dataset][e.surrogate_kind] = e.asr;
  }
  std::vector<MatrixEntry> sub;
  double hand_wb = -1, hand_gd = -1, gm_sum = 0, bb_sum = 0;
  std::size_t cells = 0;
  for (const auto& [corpus_name, kinds] : block) {
    double row_max = -1, row_sum = 0;
    for (const auto& [kind, asr] : kinds) {
      sub.push_back({v0.victim_dataset, v0.victim_kind, corpus_name, kind, asr});
      row_max = std::max(row_max, asr);
      row_sum += asr;
      bb_sum += asr;
      ++cells;
    }
    hand_wb = std::max(hand_wb, row_max);
    hand_gd = std::max(hand_gd, row_sum / static_cast<double>(kinds.size()));
    gm_sum += row_max;
  }
  const double hand[4] = {hand_wb, hand_gd, gm_sum / static_cast<double>(block.size()),
                          bb_sum / static_cast<double>(cells)};
  const auto lib = aggregate_threat_cells(sub);
  bool exact = cells == 4;
  for (std::size_t c = 0; c < 4; ++c) exact = exact && lib.cells[c] == hand[c];

  std::string cellstr;
  for (auto c : kAllThreatCells) cellstr += std::string(threat_cell_name(c)) + " " + fmt(100 * m.cell(c)) + "%, ";
  return {dominant && bb && exact, cellstr + std::to_string(m.victims) + " victims; WhiteBox dominant: " +
                                       (dominant ? "yes" : "no") + ", BlackBox > 0: " + (bb ? "yes" : "no") +
                                       ", 2x2 hand oracle exact: " + (exact ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 12. data efficiency

Verdict data_efficiency() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 12;
  const auto split = partition_flows(generate_synthetic(300000, derive_seed(seed, 1)), {}, derive_seed(seed, 2));
  const Detector victim = train_victim(split.victim_set, ModelKind::mlp, {}, derive_seed(seed, 3));
  const std::size_t max_size = split.train_set.size();
  const std::size_t sizes[] = {100000, max_size};
  const ModelKind kinds[] = {ModelKind::mlp, ModelKind::lr};
  std::map<std::size_t, std::vector<double>> asr;
  for (std::size_t n : sizes) {
    const FlowSet adversary(split.train_set.begin(), split.train_set.begin() + static_cast<std::ptrdiff_t>(n));
    for (ModelKind k : kinds) {
      AgentSetup setup;
      setup.surrogate_kind = k;
      setup.train = ppo_steps(kComparisonSteps);
      setup.seed = derive_seed(seed, 10 + static_cast<std::uint64_t>(k));
      const auto agent = train_agent(adversary, victim, setup);
      asr[n].push_back(policy_asr(agent.policy, victim, split.test_set, setup.budget).asr);
    }
  }
  const auto wb = [&](std::size_t n) { return std::max(asr[n][0], asr[n][1]); };
  const auto gd = [&](std::size_t n) { return (asr[n][0] + asr[n][1]) / 2; };
  const double gap = std::abs(wb(100000) - wb(max_size));
  const bool ok = max_size > 100000 && gap <= 0.10 && wb(max_size) >= gd(max_size);
  return {ok, "WhiteBox ASR " + fmt(100 * wb(100000)) + "% at 1e5 vs " + fmt(100 * wb(max_size)) + "% at " +
                  std::to_string(max_size) + " (gap " + fmt(100 * gap) + " <= 10 points); at max WhiteBox " +
                  fmt(100 * wb(max_size)) + "% >= GrayData " + fmt(100 * gd(max_size)) + "%; " +
                  fmt(seconds_since(t0)) + " s"};
}

// ---------------------------------------------------------------------------
// 13. end to end

Verdict end_to_end() {
  const auto& run = pipeline_run();
  if (run.error) return {false, "pipeline failed after " + fmt(run.seconds) + " s: " + *run.error};
  std::string problems;
  const auto& stages = run.manifest["stages"];
  std::set<std::string> listed;
  for (auto s : kAllStages) {
    const std::string name = stage_name(s);
    if (!stages.contains(name) || stages[name]["artifacts"].empty()) {
      problems += " missing stage " + name + ";";
      continue;
    }
    for (const auto& [k, v] : stages[name]["artifacts"].items()) {
      const std::string rel = v["path"].get<std::string>();
      listed.insert(rel);
      if (!fs::exists(run.dir / rel)) problems += " missing file " + rel + ";";
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(run.dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), run.dir).generic_string();
    if (rel != "manifest.json" && !listed.count(rel)) problems += " unlisted file " + rel + ";";
  }
  std::string rendered;
  for (auto t : kAllTemplates) {
    try {
      const auto tab = render_report(t, run.db, run.curves);
      if (tab.rows.empty()) problems += " empty template " + template_name(t) + ";";
      rendered += template_name(t) + " " + std::to_string(tab.rows.size()) + " rows, ";
    } catch (const Error& e) {
      problems += " template " + template_name(t) + ": " + e.what() + ";";
    }
  }
  const bool ok = problems.empty() && run.seconds < 900;
  return {ok, "6 stages in " + fmt(run.seconds) + " s (< 900 s), " + std::to_string(listed.size()) +
                  " artifacts listed; " + rendered + "output in " + run.dir.string() + problems};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> all = {
      {1, "normalization", normalization},
      {2, "reward conformance", reward_table},
      {3, "budget safety", budget_safety},
      {4, "gradient fidelity", gradient_fidelity},
      {5, "learning gain", learning_gain},
      {6, "robustness ordering", robustness_ordering},
      {7, "throughput identity", throughput_identity},
      {8, "cost ordering", cost_ordering},
      {9, "episode-length linearity", t_sweep_linearity},
      {10, "volumetric sensitivity", volumetric_direction},
      {11, "threat-matrix dominance", matrix_dominance},
      {12, "data efficiency", data_efficiency},
      {13, "end-to-end pipeline", end_to_end},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail
              << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
