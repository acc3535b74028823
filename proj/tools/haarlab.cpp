// Command-line driver: reproducible experiment runs, experiment catalog,
// regression fixtures and a quick selftest.
//
// Exit codes: 0 success, 2 config error, 3 tolerance failure in selftest.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "haarlab/harness.hpp"

using namespace haarlab;

int main(int argc, char** argv) {
  CLI::App app{"haarlab: strong-random-unitary numerical laboratory"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config");
  std::string config_path, out_override;
  uint64_t seed_override = 0;
  bool have_seed = false;
  run_cmd->add_option("config", config_path, "config JSON file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed_override, "override / supply the seed");
  run_cmd->add_option("--out", out_override, "override the output directory");

  auto* list_cmd = app.add_subcommand("list", "list available experiments");

  auto* fix_cmd = app.add_subcommand("fixtures", "write regression fixtures");
  std::string which = "weingarten";
  int fk = 2, fp = 1, fq = 1;
  double fD = 4;
  std::string fix_out = "fixtures";
  fix_cmd->add_option("which", which, "weingarten | brauer")->required();
  fix_cmd->add_option("--k", fk, "moment order (weingarten)");
  fix_cmd->add_option("--D", fD, "local dimension");
  fix_cmd->add_option("--p", fp, "left copies (brauer)");
  fix_cmd->add_option("--q", fq, "right copies (brauer)");
  fix_cmd->add_option("--out", fix_out, "output directory");

  auto* self_cmd = app.add_subcommand("selftest", "run the exact-identity selftest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      have_seed = seed_opt->count() > 0;
      std::ifstream f(config_path);
      if (!f) {
        std::cerr << "cannot open config: " << config_path << "\n";
        return 2;
      }
      json j;
      try {
        j = json::parse(f);
      } catch (const std::exception& e) {
        std::cerr << "config parse error: " << e.what() << "\n";
        return 2;
      }
      harness::ExperimentConfig cfg;
      try {
        cfg = harness::ExperimentConfig::from_json(j);
      } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      if (have_seed) {
        cfg.seed = seed_override;
        cfg.has_seed = true;
      }
      if (!out_override.empty()) cfg.out_dir = out_override;
      if (!cfg.has_seed) {
        std::cerr << "config error: seed required (config key or --seed)\n";
        return 2;
      }
      try {
        auto manifest = harness::run(cfg);
        std::cout << "wrote " << cfg.out_dir << "/" << manifest.config_hash << " ("
                  << manifest.wall_clock_ms << " ms)\n";
      } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      return 0;
    }
    if (*list_cmd) {
      for (const auto& e : harness::list_experiments())
        std::cout << e.name << "\n    requires: " << e.required << "\n    limits:   " << e.limits
                  << "\n";
      return 0;
    }
    if (*fix_cmd) {
      namespace fs = std::filesystem;
      fs::create_directories(fix_out);
      if (which == "weingarten") {
        auto t = wg::weingarten_table(fk, fD);
        std::ofstream f(fs::path(fix_out) / ("weingarten_k" + std::to_string(fk) + "_D" +
                                             std::to_string(int(fD)) + ".json"));
        f << t.to_json().dump(2) << "\n";
      } else if (which == "brauer") {
        harness::ExperimentConfig cfg;
        cfg.experiment = "brauer_fixture";
        cfg.params = json{{"p", fp}, {"q", fq}, {"D", int(fD)}};
        cfg.seed = 0;
        cfg.has_seed = true;
        auto [result, csv] = harness::run_experiment(cfg);
        std::ofstream f(fs::path(fix_out) / ("brauer_p" + std::to_string(fp) + "_q" +
                                             std::to_string(fq) + "_D" + std::to_string(int(fD)) +
                                             ".json"));
        f << result.dump(2) << "\n";
      } else {
        std::cerr << "unknown fixture kind: " << which << "\n";
        return 2;
      }
      std::cout << "wrote fixtures to " << fix_out << "\n";
      return 0;
    }
    if (*self_cmd) {
      std::string log;
      bool ok = harness::selftest(&log);
      std::cout << log;
      std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
      return ok ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
