#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mflab/errors.hpp"
#include "mflab/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

int report(const std::exception& e, int code) {
  std::cerr << "mflab: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mflab: McKean-Vlasov flows, contraction conditions and propagation of chaos"};
  app.require_subcommand(1);

  std::string cfg_path;
  long long seed = -1;
  std::string out;
  bool no_plots = false;
  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV/SVG outputs");
  run->add_option("config", cfg_path, "Experiment config file")->required();
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--out", out, "Output directory");
  run->add_flag("--no-plots", no_plots, "Skip SVG output");

  app.add_subcommand("list", "List registered experiments");

  std::string check_path;
  auto* check = app.add_subcommand("check", "Validate a config without running it");
  check->add_option("config", check_path, "Experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand("list")) {
      for (const auto& e : mflab::experiment_registry()) std::printf("%-26s %s\n", e.name.c_str(), e.claim.c_str());
      return kExitOk;
    }
    if (app.got_subcommand("check")) {
      const auto cfg = mflab::load_experiment_config(check_path);
      mflab::check_experiment(cfg);
      std::printf("%s: ok (%s)\n", check_path.c_str(), cfg.experiment.c_str());
      return kExitOk;
    }
    auto cfg = mflab::load_experiment_config(cfg_path);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out.empty()) cfg.out_dir = out;
    if (no_plots) cfg.plots = false;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = mflab::run_experiment(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& p : mflab::emit_experiment(res, cfg, wall)) std::printf("wrote %s\n", p.c_str());
    std::printf("%s\n", res.summary.dump().c_str());
    if (res.diverged) {
      std::cerr << "mflab: " << res.error << "\n";
      return kExitDivergence;
    }
    return kExitOk;
  } catch (const mflab::IoError& e) {
    return report(e, kExitIo);
  } catch (const mflab::ConfigError& e) {
    return report(e, kExitConfig);
  } catch (const mflab::DivergenceError& e) {
    return report(e, kExitDivergence);
  } catch (const mflab::Error& e) {
    return report(e, kExitConfig);
  }
}
