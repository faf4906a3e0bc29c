#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "sparsegain/experiments.hpp"

using namespace sparsegain;

namespace {

ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return ExperimentConfig{};
  return load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sparse mixed H2/H-infinity output-feedback synthesis on networked "
      "benchmarks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode_str, plant_path, results_dir;
  int s_value = -1;
  int parallelism = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config");
    cmd->add_option("--out", out_dir,
                    "output directory (default $SPARSEGAIN_OUT or ./out)");
    cmd->add_option("--seed", seed, "network RNG seed override")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* mk = app.add_subcommand("make-benchmark",
                                    "generate the network benchmark plant");
  add_common(mk);

  CLI::App* solve_cmd =
      app.add_subcommand("solve", "run one solve at a fixed sparsity budget");
  add_common(solve_cmd);
  solve_cmd->add_option("--s", s_value, "sparsity budget")->required();
  solve_cmd->add_option("--mode", mode_str, "central|game|potential");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run the configured s-grid sweep");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--mode", mode_str, "central|game|potential");
  sweep_cmd->add_option("--parallelism", parallelism, "worker threads");

  CLI::App* report_cmd =
      app.add_subcommand("report", "summarize and re-verify a sweep directory");
  report_cmd->add_option("--dir", results_dir, "sweep output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) {
      std::cout << report(results_dir);
      return 0;
    }

    ExperimentConfig cfg = load_or_default(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.network.seed = seed;
    if (!mode_str.empty()) cfg.mode = mode_from_string(mode_str);
    if (parallelism > 0) cfg.parallelism = parallelism;

    if (mk->parsed()) {
      BenchmarkFiles files = make_benchmark(cfg);
      std::cout << "wrote " << files.plant_path << "\n"
                << "wrote " << files.meta_path << "\n";
      return 0;
    }
    if (solve_cmd->parsed()) cfg.s_grid = {s_value};

    SweepResult res = run_sweep(cfg);
    std::cout << "wrote " << res.out_dir << "/results.csv ("
              << res.records.size() << " records)\n";
    for (const auto& r : res.records)
      std::cout << "  " << to_string(r.mode) << " s=" << r.s
                << (r.player >= 0 ? " player=" + std::to_string(r.player) : "")
                << " J=" << r.j << " Tinf=" << r.tinf << " card=" << r.card
                << " " << r.status << "\n";
    return res.all_completed ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
