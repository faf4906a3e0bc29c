#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsegain/types.hpp"

namespace sparsegain {

/// Uncertain LTI plant. The uncertainty itself is never stored; only its
/// norm bound enters through gamma and the (B1, C1, D1) channel.
struct Plant {
  Matrix a;   // n x n
  Matrix b;   // n x m
  Matrix b1;  // n x m1, uncertainty input
  Matrix b2;  // n x m2, exogenous input
  Matrix c;   // p x n, measured output
  Matrix c1;  // p1 x n, uncertainty output
  Matrix d1;  // p1 x m
  Matrix c2;  // p2 x n, performance output
  Matrix d2;  // p2 x m
  Matrix q;   // n x n, state weight (= C2^1' C2^1)
  Matrix r;   // m x m, input weight (= D2^2' D2^2)
  double gamma = 1.0;

  int n() const { return static_cast<int>(a.rows()); }
  int m() const { return static_cast<int>(b.cols()); }
  int m1() const { return static_cast<int>(b1.cols()); }
  int m2() const { return static_cast<int>(b2.cols()); }
  int p() const { return static_cast<int>(c.rows()); }
  int p1() const { return static_cast<int>(c1.rows()); }
  int p2() const { return static_cast<int>(c2.rows()); }
};

/// Builds (C2, D2) from Cholesky square roots of (Q, R) so that
/// C2' C2 = Q, D2' D2 = R and C2' D2 = 0.
void attach_performance_outputs(Plant& plant);

struct ClosedLoop {
  Matrix a_cl;   // A - B K C
  Matrix c_cl1;  // C1 - D1 K C
  Matrix c_cl2;  // C2 - D2 K C
  Matrix qbar;   // Q + C'K'RKC
};

ClosedLoop closed_loop(const Plant& plant, const Matrix& k);

struct PlantDiagnostics {
  bool dims_consistent = false;
  bool controllable = false;     // (A, B) by PBH over the spectrum
  bool observable_c = false;     // (C, A)
  bool observable_c2 = false;    // (C2, A)
  bool q_psd = false;
  bool r_pd = false;
  bool c2_d2_orthogonal = false;  // C2' D2 = 0
  bool weights_match_outputs = false;  // C2'C2 = Q and D2'D2 = R
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Diagnostic only; never throws on a bad plant.
PlantDiagnostics validate(const Plant& plant, const NumericSettings& num = {});

struct NetworkConfig {
  int nodes = 5;             // N
  double area = 2.0;         // L, side of the square
  double uncertainty = 0.2;  // entrywise perturbation percentage in [0, 1)
  int samples = 200;
  std::uint64_t seed = 1;
  Matrix node_dynamics;      // 2x2 per-node block; default [[1,1],[1,2]]
  double q_scale = 100.0;
  double r_scale = 1.0;
  double min_distance = 1e-6;  // node placement resampling threshold

  NetworkConfig();
};

struct UncertaintyChannel {
  Matrix b1;
  Matrix c1;
  double gamma = 1.0;
  int worst_index = -1;
  double worst_norm = 0.0;  // sigma_max of the worst deviation
};

/// Picks the sample maximizing sigma_max(A_hat - A) and factors the
/// deviation through an SVD scaled so the resulting bound is gamma = 1.
UncertaintyChannel worst_case_uncertainty(const Matrix& nominal,
                                          const std::vector<Matrix>& samples);

struct NetworkBenchmark {
  Plant plant;
  std::vector<Matrix> samples;  // perturbed state matrices
  Matrix positions;             // nodes x 2
  int worst_index = -1;
  double worst_norm = 0.0;
};

/// Randomized network of coupled unstable second-order nodes with the
/// uncertainty channel already attached. Deterministic in the seed.
NetworkBenchmark build_network(const NetworkConfig& config);

/// Sparsity pattern cardinalities of the generated network (one input and
/// two states per node): fully decentralized and dense feedback.
int decentralized_cardinality(const NetworkConfig& config);
int dense_cardinality(const NetworkConfig& config);

// JSON serialization (named matrix fields, row-major arrays).
std::string plant_to_json(const Plant& plant);
Plant plant_from_json(const std::string& text);
void save_plant(const Plant& plant, const std::string& path);
Plant load_plant(const std::string& path);

std::string matrix_to_json(const Matrix& m);
void save_gain(const Matrix& m, const std::string& path);
Matrix load_gain(const std::string& path);

}  // namespace sparsegain
