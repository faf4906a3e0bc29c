#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sparsegain/experiments.hpp"

using namespace sparsegain;
namespace fs = std::filesystem;

TEST_CASE("config: json round-trip and unknown-key rejection") {
  ExperimentConfig cfg;
  cfg.mode = Mode::Game;
  cfg.s_grid = {5, 9};
  cfg.network.seed = 42;
  cfg.solver.rho = 123.0;
  cfg.rounds_max = 7;
  ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.mode == Mode::Game);
  CHECK(back.s_grid == cfg.s_grid);
  CHECK(back.network.seed == 42);
  CHECK(back.solver.rho == 123.0);
  CHECK(back.rounds_max == 7);

  CHECK_THROWS_AS(config_from_json("{\"nodes\": 5}"), Error);
  CHECK_THROWS_AS(config_from_json("{\"network\": {\"n\": 5}}"), Error);
  CHECK_THROWS_AS(config_from_json("{\"mode\": \"fancy\"}"), Error);
}

TEST_CASE("two_player_preset: weights implement the node split") {
  NetworkConfig net;
  NetworkBenchmark bench = build_network(net);
  auto players = two_player_preset(bench.plant);
  REQUIRE(players.size() == 2);
  CHECK(players[0].rows == std::vector<int>{0, 2});
  CHECK(players[1].rows == std::vector<int>{1, 3, 4});

  // Player 1 penalizes relative states of nodes 1 and 3.
  Vector x = Vector::Zero(10);
  x[0] = 1.0;
  x[4] = 1.0;  // equal positions: zero relative penalty
  CHECK(x.dot(players[0].q * x) == doctest::Approx(0.0));
  x[4] = -1.0;
  CHECK(x.dot(players[0].q * x) == doctest::Approx(400.0));
  // Player 2 penalizes absolute states of nodes 2, 4, 5.
  Vector y = Vector::Zero(10);
  y[2] = 1.0;
  CHECK(y.dot(players[1].q * y) == doctest::Approx(100.0));
  y[2] = 0.0;
  y[0] = 1.0;  // node 1 is not player 2's concern
  CHECK(y.dot(players[1].q * y) == doctest::Approx(0.0));

  validate_players(bench.plant, players);
}

TEST_CASE("results csv: round-trip parse equality") {
  std::vector<RunRecord> recs;
  RunRecord a;
  a.mode = Mode::Central;
  a.s = 15;
  a.player = -1;
  a.j = 123.456789012345;
  a.tinf = 0.987654321;
  a.status = "Converged-Coupled";
  a.iterations = 42;
  a.card = 15;
  recs.push_back(a);
  RunRecord b = a;
  b.mode = Mode::Game;
  b.player = 2;
  b.s = 20;
  recs.push_back(b);

  std::stringstream ss;
  write_results_csv(recs, ss);
  auto back = read_results_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].mode == Mode::Central);
  CHECK(back[0].j == a.j);
  CHECK(back[0].tinf == a.tinf);
  CHECK(back[1].player == 2);
  CHECK(back[1].status == "Converged-Coupled");
}

TEST_CASE("make_benchmark writes plant and provenance metadata") {
  ExperimentConfig cfg;
  cfg.network.samples = 3;
  cfg.out_dir = "test_out_bench";
  BenchmarkFiles files = make_benchmark(cfg);
  CHECK(fs::exists(files.plant_path));
  CHECK(fs::exists(files.meta_path));
  Plant p = load_plant(files.plant_path);
  CHECK(p.n() == 10);
  std::ifstream meta(files.meta_path);
  std::string text((std::istreambuf_iterator<char>(meta)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("worst_sample_index") != std::string::npos);
  CHECK(text.find("\"decentralized_card\": 10") != std::string::npos);
  CHECK(text.find("\"dense_card\": 50") != std::string::npos);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("run_sweep: small central sweep, artifacts, and determinism") {
  ExperimentConfig cfg;
  cfg.network.nodes = 3;
  cfg.network.samples = 10;
  cfg.network.seed = 5;
  cfg.mode = Mode::Central;
  cfg.s_grid = {8, 18};
  cfg.solver.k_max = 40;
  cfg.solver.inner_max = 60;
  cfg.out_dir = "test_out_sweep_a";

  SweepResult r1 = run_sweep(cfg);
  CHECK(r1.records.size() == 2);
  CHECK(fs::exists(cfg.out_dir + "/results.csv"));
  CHECK(fs::exists(cfg.out_dir + "/plant.json"));
  CHECK(fs::exists(cfg.out_dir + "/j_vs_s.svg"));
  CHECK(fs::exists(cfg.out_dir + "/tinf_vs_s.svg"));
  CHECK(fs::exists(cfg.out_dir + "/convergence.svg"));
  CHECK(fs::exists(cfg.out_dir + "/central_s8/trace.csv"));
  CHECK(fs::exists(cfg.out_dir + "/central_s8/gain_K.json"));
  CHECK(fs::exists(cfg.out_dir + "/central_s8/run.json"));

  // Report reloads gains and re-verifies them.
  std::string rep = report(cfg.out_dir);
  CHECK(rep.find("central") != std::string::npos);
  CHECK(rep.find("MISMATCH") == std::string::npos);

  // Same seed, fresh directory: byte-identical results.csv.
  ExperimentConfig cfg2 = cfg;
  cfg2.out_dir = "test_out_sweep_b";
  run_sweep(cfg2);
  std::ifstream f1(cfg.out_dir + "/results.csv"), f2(cfg2.out_dir + "/results.csv");
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.find("nan") == std::string::npos);

  fs::remove_all(cfg.out_dir);
  fs::remove_all(cfg2.out_dir);
}

TEST_CASE("report: missing directory raises MissingData") {
  CHECK_THROWS_AS(report("definitely_not_here"), MissingData);
}
