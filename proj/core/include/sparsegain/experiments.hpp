#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sparsegain/game.hpp"
#include "sparsegain/palm.hpp"
#include "sparsegain/plant.hpp"

namespace sparsegain {

enum class Mode { Central, Game, Potential };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct ExperimentConfig {
  NetworkConfig network;
  PalmSettings solver;
  int rounds_max = 60;  // best-response rounds (game modes)
  double eta = 1.0;     // residual-proxy scale
  Mode mode = Mode::Central;
  std::vector<int> s_grid = {15, 20, 25, 30, 35, 40, 45, 50};
  std::string out_dir;  // empty -> $SPARSEGAIN_OUT or ./out
  int parallelism = 1;

  std::string resolved_out_dir() const;
  GameSettings game_settings() const;
};

/// JSON config file; unknown keys are errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

/// The benchmark's two-player split: player 1 runs the inputs of nodes 1
/// and 3 with relative-state weights, player 2 runs nodes 2, 4, 5.
std::vector<PlayerSpec> two_player_preset(const Plant& plant);

struct RunRecord {
  Mode mode = Mode::Central;
  int s = 0;
  int player = -1;  // -1 for the global (centralized) record
  double j = 0.0;
  double tinf = 0.0;
  std::string status;
  int iterations = 0;
  double wall_seconds = 0.0;  // kept out of results.csv (not reproducible)
  int card = 0;
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::string out_dir;
  bool all_completed = true;
};

/// Columns: mode,s,player,J,Tinf,status,iterations,card.
void write_results_csv(const std::vector<RunRecord>& records, std::ostream& os);
std::vector<RunRecord> read_results_csv(std::istream& is);

/// Runs the configured mode over the s-grid; writes results.csv, per-run
/// trace CSVs and gains, and the SVG plots. Per-run failures are recorded
/// in-row and the sweep continues.
SweepResult run_sweep(const ExperimentConfig& config);

struct BenchmarkFiles {
  std::string plant_path;
  std::string meta_path;
};

/// Writes plant.json plus provenance metadata (seed, samples, worst index).
BenchmarkFiles make_benchmark(const ExperimentConfig& config);

/// Human-readable summary of a completed sweep directory; re-verifies every
/// persisted gain (exact cardinality, T_inf to 1e-6).
std::string report(const std::string& results_dir);

}  // namespace sparsegain
