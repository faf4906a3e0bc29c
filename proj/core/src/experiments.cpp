#include "sparsegain/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "sparsegain/analysis.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace sparsegain {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Central: return "central";
    case Mode::Game: return "game";
    case Mode::Potential: return "potential";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "central") return Mode::Central;
  if (s == "game") return Mode::Game;
  if (s == "potential") return Mode::Potential;
  throw Error("unknown mode '" + s + "' (central|game|potential)");
}

std::string ExperimentConfig::resolved_out_dir() const {
  if (!out_dir.empty()) return out_dir;
  if (const char* env = std::getenv("SPARSEGAIN_OUT")) return env;
  return "out";
}

GameSettings ExperimentConfig::game_settings() const {
  GameSettings gs;
  gs.palm = solver;
  if (gs.palm.gamma_margin <= 0.0) gs.palm.gamma_margin = 0.01;
  gs.rounds_max = rounds_max;
  gs.eta = eta;
  return gs;
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw Error(std::string("config: unknown key '") + it.key() + "' in " +
                  where);
  }
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = j.at(0).size();
  Matrix m(rows, cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  check_keys(j, "the top level",
             {"network", "solver", "mode", "s_grid", "out_dir", "parallelism",
              "rounds_max", "eta"});
  if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("s_grid")) cfg.s_grid = j["s_grid"].get<std::vector<int>>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("parallelism")) cfg.parallelism = j["parallelism"].get<int>();
  if (j.contains("rounds_max")) cfg.rounds_max = j["rounds_max"].get<int>();
  if (j.contains("eta")) cfg.eta = j["eta"].get<double>();

  if (j.contains("network")) {
    const json& n = j["network"];
    check_keys(n, "network",
               {"nodes", "area", "uncertainty", "samples", "seed",
                "node_dynamics", "q_scale", "r_scale", "min_distance"});
    auto& net = cfg.network;
    if (n.contains("nodes")) net.nodes = n["nodes"].get<int>();
    if (n.contains("area")) net.area = n["area"].get<double>();
    if (n.contains("uncertainty")) net.uncertainty = n["uncertainty"].get<double>();
    if (n.contains("samples")) net.samples = n["samples"].get<int>();
    if (n.contains("seed")) net.seed = n["seed"].get<std::uint64_t>();
    if (n.contains("node_dynamics"))
      net.node_dynamics = matrix_from_json(n["node_dynamics"]);
    if (n.contains("q_scale")) net.q_scale = n["q_scale"].get<double>();
    if (n.contains("r_scale")) net.r_scale = n["r_scale"].get<double>();
    if (n.contains("min_distance")) net.min_distance = n["min_distance"].get<double>();
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver",
               {"rho", "gamma1", "gamma2", "eps1", "eps2", "eps3", "k_max",
                "inner_max", "theta", "armijo_c", "armijo_shrink",
                "couple_tol", "gamma_margin"});
    auto& p = cfg.solver;
    if (s.contains("rho")) p.rho = s["rho"].get<double>();
    if (s.contains("gamma1")) p.gamma1 = s["gamma1"].get<double>();
    if (s.contains("gamma2")) p.gamma2 = s["gamma2"].get<double>();
    if (s.contains("eps1")) p.eps1 = s["eps1"].get<double>();
    if (s.contains("eps2")) p.eps2 = s["eps2"].get<double>();
    if (s.contains("eps3")) p.eps3 = s["eps3"].get<double>();
    if (s.contains("k_max")) p.k_max = s["k_max"].get<int>();
    if (s.contains("inner_max")) p.inner_max = s["inner_max"].get<int>();
    if (s.contains("theta")) p.theta = s["theta"].get<double>();
    if (s.contains("armijo_c")) p.armijo_c = s["armijo_c"].get<double>();
    if (s.contains("armijo_shrink")) p.armijo_shrink = s["armijo_shrink"].get<double>();
    if (s.contains("couple_tol")) p.couple_tol = s["couple_tol"].get<double>();
    if (s.contains("gamma_margin")) p.gamma_margin = s["gamma_margin"].get<double>();
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("load_config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json n;
  n["nodes"] = cfg.network.nodes;
  n["area"] = cfg.network.area;
  n["uncertainty"] = cfg.network.uncertainty;
  n["samples"] = cfg.network.samples;
  n["seed"] = cfg.network.seed;
  n["node_dynamics"] = {{cfg.network.node_dynamics(0, 0), cfg.network.node_dynamics(0, 1)},
                        {cfg.network.node_dynamics(1, 0), cfg.network.node_dynamics(1, 1)}};
  n["q_scale"] = cfg.network.q_scale;
  n["r_scale"] = cfg.network.r_scale;
  n["min_distance"] = cfg.network.min_distance;

  json s;
  s["rho"] = cfg.solver.rho;
  s["gamma1"] = cfg.solver.gamma1;
  s["gamma2"] = cfg.solver.gamma2;
  s["eps1"] = cfg.solver.eps1;
  s["eps2"] = cfg.solver.eps2;
  s["eps3"] = cfg.solver.eps3;
  s["k_max"] = cfg.solver.k_max;
  s["inner_max"] = cfg.solver.inner_max;
  s["theta"] = cfg.solver.theta;
  s["armijo_c"] = cfg.solver.armijo_c;
  s["armijo_shrink"] = cfg.solver.armijo_shrink;
  s["couple_tol"] = cfg.solver.couple_tol;
  s["gamma_margin"] = cfg.solver.gamma_margin;

  json j;
  j["network"] = n;
  j["solver"] = s;
  j["mode"] = to_string(cfg.mode);
  j["s_grid"] = cfg.s_grid;
  j["out_dir"] = cfg.out_dir;
  j["parallelism"] = cfg.parallelism;
  j["rounds_max"] = cfg.rounds_max;
  j["eta"] = cfg.eta;
  return j.dump(2);
}

std::vector<PlayerSpec> two_player_preset(const Plant& plant) {
  const int n = plant.n();
  require(n == 10 && plant.m() == 5,
          "two_player_preset: expects the 5-node benchmark (n=10, m=5)");
  // State indices: node j (1-based) owns states 2(j-1) and 2(j-1)+1.
  auto e = [&](int idx) { return Matrix::Identity(n, n).col(idx); };

  PlayerSpec p1;
  p1.id = 1;
  p1.rows = {0, 2};  // inputs of nodes 1 and 3
  Matrix d02 = e(0) - e(4);  // x_{11} - x_{13}
  Matrix d13 = e(1) - e(5);  // x_{21} - x_{23}
  p1.q = 100.0 * (d02 * d02.transpose() + d13 * d13.transpose());
  p1.r = Matrix::Identity(2, 2);

  PlayerSpec p2;
  p2.id = 2;
  p2.rows = {1, 3, 4};  // inputs of nodes 2, 4, 5
  p2.q = Matrix::Zero(n, n);
  for (int node : {2, 4, 5}) {
    const int base = 2 * (node - 1);
    p2.q(base, base) = 100.0;
    p2.q(base + 1, base + 1) = 100.0;
  }
  p2.r = Matrix::Identity(3, 3);
  return {p1, p2};
}

namespace {

void put_csv_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

int cardinality(const Matrix& m) {
  int c = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) ++c;
  return c;
}

}  // namespace

void write_results_csv(const std::vector<RunRecord>& records,
                       std::ostream& os) {
  os << "mode,s,player,J,Tinf,status,iterations,card\n";
  for (const auto& r : records) {
    os << to_string(r.mode) << ',' << r.s << ',' << r.player << ',';
    put_csv_double(os, r.j);
    os << ',';
    put_csv_double(os, r.tinf);
    os << ',' << r.status << ',' << r.iterations << ',' << r.card << '\n';
  }
}

std::vector<RunRecord> read_results_csv(std::istream& is) {
  std::vector<RunRecord> out;
  std::string line;
  if (!std::getline(is, line)) throw MissingData("results.csv is empty");
  if (line != "mode,s,player,J,Tinf,status,iterations,card")
    throw MissingData("results.csv has an unexpected header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    RunRecord r;
    std::getline(ss, field, ',');
    r.mode = mode_from_string(field);
    std::getline(ss, field, ',');
    r.s = std::stoi(field);
    std::getline(ss, field, ',');
    r.player = std::stoi(field);
    std::getline(ss, field, ',');
    r.j = std::stod(field);
    std::getline(ss, field, ',');
    r.tinf = std::stod(field);
    std::getline(ss, r.status, ',');
    std::getline(ss, field, ',');
    r.iterations = std::stoi(field);
    std::getline(ss, field, ',');
    r.card = std::stoi(field);
    out.push_back(r);
  }
  return out;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

struct SingleOutcome {
  std::vector<RunRecord> records;
  bool completed = true;
};

SingleOutcome run_single(const Plant& plant, const ExperimentConfig& cfg,
                         int s, const Matrix& k0, const std::string& dir) {
  fs::create_directories(dir);
  SingleOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  nlohmann::json meta;
  meta["mode"] = to_string(cfg.mode);
  meta["s"] = s;

  try {
    if (cfg.mode == Mode::Central) {
      PalmSettings ps = cfg.solver;
      ps.sparsity = s;
      PalmResult res = palm_solve(plant, ps, k0, k0);

      std::ofstream tr(dir + "/trace.csv");
      write_trace_csv(res.trace, tr);
      save_gain(res.gains.k, dir + "/gain_K.json");
      save_gain(res.gains.f, dir + "/gain_F.json");

      const Matrix& ctrl = res.controller();
      RunRecord rec;
      rec.mode = cfg.mode;
      rec.s = s;
      rec.player = -1;
      rec.status = to_string(res.status);
      rec.iterations = res.iterations;
      rec.card = cardinality(ctrl);
      try {
        rec.j = h2_cost(plant, ctrl).j;
        rec.tinf = hinf_norm(plant, ctrl).norm;
      } catch (const Unstable&) {
        rec.j = std::nan("");
        rec.tinf = std::nan("");
        rec.status += "+UnstableController";
        out.completed = false;
      }
      rec.wall_seconds = wall();
      meta["status"] = rec.status;
      meta["stop"] = to_string(res.stop);
      meta["iterations"] = res.iterations;
      meta["rho"] = res.rho;
      meta["coupling"] = (res.gains.k - res.gains.f).squaredNorm();
      meta["J"] = rec.j;
      meta["Tinf"] = rec.tinf;
      meta["card"] = rec.card;
      meta["wall_seconds"] = rec.wall_seconds;
      out.records.push_back(rec);
    } else {
      std::vector<PlayerSpec> players = two_player_preset(plant);
      if (cfg.mode == Mode::Potential) players = potential_mode(plant, players);
      GameSettings gs = cfg.game_settings();
      gs.palm.sparsity = s;
      GameResult res = gne_solve_from(plant, players, gs, k0, k0);

      std::ofstream tr(dir + "/trace.csv");
      write_game_trace_csv(res.trace, tr);
      save_gain(res.state.k, dir + "/gain_K.json");
      save_gain(res.k_gne, dir + "/gain_F.json");

      double tinf = std::nan("");
      bool gne_ok = true;
      try {
        tinf = hinf_norm(plant, res.k_gne).norm;
      } catch (const Unstable&) {
        gne_ok = false;
        out.completed = false;
      }
      const int card = cardinality(res.k_gne);
      meta["status"] = to_string(res.status);
      meta["rounds"] = res.rounds;
      meta["coupling"] = (res.state.k - res.k_gne).squaredNorm();
      meta["Tinf"] = tinf;
      meta["card"] = card;
      meta["residuals"] = res.residuals;

      for (size_t i = 0; i < players.size(); ++i) {
        RunRecord rec;
        rec.mode = cfg.mode;
        rec.s = s;
        rec.player = players[i].id;
        rec.status = to_string(res.status);
        if (!gne_ok) rec.status += "+UnstableController";
        rec.iterations = res.rounds;
        rec.card = card;
        rec.tinf = tinf;
        rec.j = gne_ok ? player_h2_cost(plant, players, static_cast<int>(i),
                                        res.k_gne)
                       : std::nan("");
        rec.wall_seconds = wall();
        out.records.push_back(rec);
      }
      meta["wall_seconds"] = wall();
    }
  } catch (const std::exception& e) {
    RunRecord rec;
    rec.mode = cfg.mode;
    rec.s = s;
    rec.player = -1;
    rec.status = std::string("Failed:") + e.what();
    rec.j = std::nan("");
    rec.tinf = std::nan("");
    rec.wall_seconds = wall();
    out.records.push_back(rec);
    out.completed = false;
    meta["status"] = rec.status;
  }
  write_text(dir + "/run.json", meta.dump(2) + "\n");
  return out;
}

void write_plots(const std::vector<RunRecord>& records,
                 const ExperimentConfig& cfg, const std::string& out_dir) {
  // J vs s and Tinf vs s, one series per player (or the single global one).
  std::vector<int> players;
  for (const auto& r : records)
    if (std::find(players.begin(), players.end(), r.player) == players.end())
      players.push_back(r.player);
  std::sort(players.begin(), players.end());

  detail::LinePlot jplot, tplot;
  jplot.title = "cost vs sparsity budget";
  jplot.xlabel = "s";
  jplot.ylabel = "J";
  tplot.title = "H-infinity norm vs sparsity budget";
  tplot.xlabel = "s";
  tplot.ylabel = "T_inf";
  for (int p : players) {
    std::vector<double> xs, js, ts;
    for (const auto& r : records) {
      if (r.player != p || std::isnan(r.j)) continue;
      xs.push_back(r.s);
      js.push_back(r.j);
      ts.push_back(r.tinf);
    }
    const std::string label = p < 0 ? "global" : "player " + std::to_string(p);
    jplot.add(label, xs, js);
    tplot.add(label, xs, ts);
  }
  write_text(out_dir + "/j_vs_s.svg", jplot.render());
  write_text(out_dir + "/tinf_vs_s.svg", tplot.render());

  // Convergence curves from the per-run traces.
  detail::LinePlot conv;
  conv.title = "iterate change vs iteration";
  conv.xlabel = cfg.mode == Mode::Central ? "k" : "round";
  conv.ylabel = "dK";
  conv.log_y = true;
  for (const auto& r : records) {
    if (r.player > 1) continue;  // one series per run
    const std::string dir =
        out_dir + "/" + to_string(cfg.mode) + "_s" + std::to_string(r.s);
    std::ifstream tr(dir + "/trace.csv");
    if (!tr) continue;
    std::string line;
    std::getline(tr, line);  // header
    std::vector<double> xs, ys;
    const bool central = cfg.mode == Mode::Central;
    while (std::getline(tr, line)) {
      std::stringstream ss(line);
      std::vector<std::string> f;
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (central && f.size() >= 5) {
        const double dk = std::stod(f[4]);
        if (dk > 0) {
          xs.push_back(std::stod(f[0]));
          ys.push_back(dk);
        }
      } else if (!central && f.size() >= 5 && f[1] == "1") {
        const double dk = std::stod(f[4]);
        if (dk > 0) {
          xs.push_back(std::stod(f[0]));
          ys.push_back(dk);
        }
      }
    }
    if (!xs.empty()) conv.add("s=" + std::to_string(r.s), xs, ys);
  }
  write_text(out_dir + "/convergence.svg", conv.render());
}

}  // namespace

BenchmarkFiles make_benchmark(const ExperimentConfig& cfg) {
  const std::string out_dir = cfg.resolved_out_dir();
  fs::create_directories(out_dir);
  NetworkBenchmark bench = build_network(cfg.network);

  BenchmarkFiles files;
  files.plant_path = out_dir + "/plant.json";
  files.meta_path = out_dir + "/benchmark_meta.json";
  save_plant(bench.plant, files.plant_path);

  nlohmann::json meta;
  meta["seed"] = cfg.network.seed;
  meta["nodes"] = cfg.network.nodes;
  meta["samples"] = cfg.network.samples;
  meta["uncertainty"] = cfg.network.uncertainty;
  meta["worst_sample_index"] = bench.worst_index;
  meta["worst_deviation_norm"] = bench.worst_norm;
  meta["decentralized_card"] = decentralized_cardinality(cfg.network);
  meta["dense_card"] = dense_cardinality(cfg.network);
  write_text(files.meta_path, meta.dump(2) + "\n");
  return files;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  require(!cfg.s_grid.empty(), "run_sweep: empty s-grid");
  const std::string out_dir = cfg.resolved_out_dir();
  fs::create_directories(out_dir);

  NetworkBenchmark bench = build_network(cfg.network);
  const Plant& plant = bench.plant;
  const int max_card = plant.m() * plant.p();
  for (int s : cfg.s_grid)
    require(s >= 1 && s <= max_card, "run_sweep: s outside [1, m*p]");
  make_benchmark(cfg);

  const double margin = cfg.mode == Mode::Central
                            ? cfg.solver.gamma_margin
                            : cfg.game_settings().palm.gamma_margin;
  const Matrix k0 =
      find_initial_gain(plant, plant.gamma - margin, cfg.solver);

  SweepResult result;
  result.out_dir = out_dir;
  std::mutex mu;
  std::atomic<size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(cfg.parallelism,
                                static_cast<int>(cfg.s_grid.size())));

  auto work = [&] {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= cfg.s_grid.size()) return;
      const int s = cfg.s_grid[idx];
      const std::string dir =
          out_dir + "/" + to_string(cfg.mode) + "_s" + std::to_string(s);
      SingleOutcome one = run_single(plant, cfg, s, k0, dir);
      std::lock_guard<std::mutex> lock(mu);
      result.all_completed = result.all_completed && one.completed;
      for (auto& r : one.records) result.records.push_back(std::move(r));
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Canonical order regardless of the pool's completion order.
  std::sort(result.records.begin(), result.records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              if (a.s != b.s) return a.s < b.s;
              return a.player < b.player;
            });
  std::ofstream rc(out_dir + "/results.csv");
  write_results_csv(result.records, rc);
  rc.close();
  write_plots(result.records, cfg, out_dir);
  return result;
}

std::string report(const std::string& results_dir) {
  std::ifstream rc(results_dir + "/results.csv");
  if (!rc) throw MissingData("report: no results.csv in " + results_dir);
  std::vector<RunRecord> records = read_results_csv(rc);
  if (records.empty()) throw MissingData("report: results.csv has no rows");

  Plant plant = load_plant(results_dir + "/plant.json");

  std::ostringstream os;
  os << "mode       s   player  J            Tinf        card  iters  status\n";
  for (const auto& r : records) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-9s %3d  %5d  %-12.6g %-11.6g %4d  %5d  %s\n",
                  to_string(r.mode).c_str(), r.s, r.player, r.j, r.tinf,
                  r.card, r.iterations, r.status.c_str());
    os << line;
  }

  // Reload and re-verify every persisted controller.
  os << "\nverification (stored vs recomputed):\n";
  std::vector<int> seen;
  for (const auto& r : records) {
    if (std::find(seen.begin(), seen.end(), r.s) != seen.end()) continue;
    seen.push_back(r.s);
    const std::string dir =
        results_dir + "/" + to_string(r.mode) + "_s" + std::to_string(r.s);
    if (!fs::exists(dir + "/gain_F.json")) continue;
    const bool coupled = r.status.find("Coupled") != std::string::npos &&
                         r.status.find("Decoupled") == std::string::npos;
    const Matrix gain = load_gain(coupled || r.mode != Mode::Central
                                      ? dir + "/gain_F.json"
                                      : dir + "/gain_K.json");
    const int card = cardinality(gain);
    double tinf = std::nan("");
    try {
      tinf = hinf_norm(plant, gain).norm;
    } catch (const Unstable&) {
    }
    const bool card_ok = card == r.card;
    const bool tinf_ok = (std::isnan(tinf) && std::isnan(r.tinf)) ||
                         std::abs(tinf - r.tinf) <= 1e-6 * std::max(1.0, tinf);
    char line[160];
    std::snprintf(line, sizeof(line), "  s=%-3d card %s  Tinf %s\n", r.s,
                  card_ok ? "ok" : "MISMATCH", tinf_ok ? "ok" : "MISMATCH");
    os << line;
    if (!card_ok || !tinf_ok)
      throw Error("report: stored gain for s=" + std::to_string(r.s) +
                  " does not re-verify");
  }
  return os.str();
}

}  // namespace sparsegain
