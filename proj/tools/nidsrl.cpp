#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nidsrl/alloc_hooks.hpp"
#include "nidsrl/nidsrl.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kUpstream = 3, kRuntime = 4 };

int exit_code_for(nidsrl::Errc c) {
  switch (c) {
    case nidsrl::Errc::config_invalid: return kConfig;
    case nidsrl::Errc::missing_upstream_artifact: return kUpstream;
    default: return kRuntime;
  }
}

nidsrl::PipelineConfig load(const std::string& path) {
  nidsrl::PipelineConfig c = path.empty() ? nidsrl::PipelineConfig{} : nidsrl::load_config(path);
  nidsrl::apply_env_overrides(c);
  nidsrl::validate(c);
  return c;
}

void print_outcome(const nidsrl::StageOutcome& o) {
  std::cout << nidsrl::stage_name(o.stage) << ": " << (o.cached ? "cached" : "done");
  if (!o.cached) std::printf(" in %.1f s", o.seconds);
  std::cout << '\n';
  for (const auto& [k, v] : o.artifacts) std::cout << "  " << k << " -> " << v << '\n';
  std::cout.flush();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial evasion of flow-based network intrusion detectors with RL agents"};
  app.require_subcommand(1);
  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "pipeline config (JSON); defaults apply when omitted")
        ->check(CLI::ExistingFile);
  };

  auto* run = app.add_subcommand("run", "run every stage in order, skipping cached ones");
  add_config(run);

  std::optional<nidsrl::Stage> single;
  for (auto s : nidsrl::kAllStages) {
    auto* sub = app.add_subcommand(nidsrl::stage_name(s), "run the " + nidsrl::stage_name(s) + " stage");
    add_config(sub);
    sub->callback([&single, s] { single = s; });
  }

  std::string tmpl;
  std::string out_path;
  auto* render = app.add_subcommand("render", "render one report template from the results database");
  add_config(render);
  render->add_option("-t,--template", tmpl, "cost-table, learning-figure, tradeoff, sensitivity, matrix or data-efficiency")
      ->required();
  render->add_option("-o,--out", out_path, "write the CSV here instead of stdout");

  auto* init = app.add_subcommand("init-config", "print the default config");
  init->add_option("-o,--out", out_path, "write to a file instead of stdout");

  auto* check = app.add_subcommand("validate", "validate a config and print its hash");
  add_config(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (init->parsed()) {
      const std::string text = nidsrl::to_json(nidsrl::PipelineConfig{}).dump(2) + "\n";
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream(out_path) << text;
      }
      return kOk;
    }
    const nidsrl::PipelineConfig cfg = load(config_path);
    if (check->parsed()) {
      std::cout << "ok " << nidsrl::config_hash(cfg) << '\n';
      return kOk;
    }
    nidsrl::Pipeline pipe(cfg);
    if (run->parsed()) {
      for (auto s : nidsrl::kAllStages) print_outcome(pipe.run_stage(s));
      std::cout << "manifest: " << pipe.manifest_path().string() << '\n';
      return kOk;
    }
    if (single) {
      print_outcome(pipe.run_stage(*single));
      return kOk;
    }
    if (render->parsed()) {
      nidsrl::ReportTemplate t{};
      try {
        t = nidsrl::parse_template(tmpl);
      } catch (const nidsrl::Error& e) {
        throw nidsrl::Error(nidsrl::Errc::config_invalid, e.what());
      }
      const auto db = pipe.results();
      if (db.empty() && t != nidsrl::ReportTemplate::learning_figure) {
        throw nidsrl::Error(nidsrl::Errc::missing_upstream_artifact, "no results database in " + cfg.output_dir);
      }
      const auto tab = nidsrl::render_report(t, db, pipe.curves());
      if (out_path.empty()) {
        tab.write_csv(std::cout);
      } else {
        std::ofstream o(out_path);
        tab.write_csv(o);
      }
      std::cerr << tab.text();
      return kOk;
    }
  } catch (const nidsrl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
