#include "sparsegain/plant.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "sparsegain/linalg.hpp"

namespace sparsegain {

namespace {

// Deterministic uniform double in [lo, hi) from the raw 64-bit stream;
// avoids std::uniform_real_distribution, which is not pinned across
// standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi);

}  // namespace

void attach_performance_outputs(Plant& plant) {
  const int n = plant.n(), m = plant.m();
  require(plant.q.rows() == n && plant.q.cols() == n, "Q must be n x n");
  require(plant.r.rows() == m && plant.r.cols() == m, "R must be m x m");
  Eigen::LLT<Matrix> rq(Matrix(plant.q +
                               1e-14 * plant.q.norm() * Matrix::Identity(n, n)));
  // Q may be singular PSD; fall back to an eigenvalue square root.
  Matrix q_half;
  if (rq.info() == Eigen::Success) {
    q_half = Matrix(rq.matrixU());
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(plant.q);
    q_half = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  }
  Eigen::LLT<Matrix> rr(plant.r);
  if (rr.info() != Eigen::Success)
    throw Error("attach_performance_outputs: R is not positive definite");
  Matrix r_half = rr.matrixU();

  plant.c2 = Matrix::Zero(n + m, n);
  plant.c2.topRows(n) = q_half;
  plant.d2 = Matrix::Zero(n + m, m);
  plant.d2.bottomRows(m) = r_half;
}

ClosedLoop closed_loop(const Plant& plant, const Matrix& k) {
  require(k.rows() == plant.m() && k.cols() == plant.p(),
          "closed_loop: gain must be m x p");
  ClosedLoop cl;
  const Matrix kc = k * plant.c;
  cl.a_cl = plant.a - plant.b * kc;
  cl.c_cl1 = plant.c1 - plant.d1 * kc;
  cl.c_cl2 = plant.c2 - plant.d2 * kc;
  cl.qbar = plant.q + kc.transpose() * plant.r * kc;
  return cl;
}

namespace {

// PBH rank test at every eigenvalue of A.
bool pbh_controllable(const Matrix& a, const Matrix& b, double tol) {
  const auto n = a.rows();
  if (b.size() == 0 || b.norm() == 0.0) return n == 0;
  Eigenstructure eig = eigenvalues(a);
  for (Eigen::Index i = 0; i < n; ++i) {
    ComplexMatrix pencil(n, n + b.cols());
    pencil << eig.values[i] * ComplexMatrix::Identity(n, n) - a.cast<std::complex<double>>(),
        b.cast<std::complex<double>>();
    Eigen::JacobiSVD<ComplexMatrix> svd(pencil);
    const auto& s = svd.singularValues();
    if (s[s.size() - 1] <= tol * std::max(1.0, s[0])) return false;
  }
  return true;
}

bool pbh_observable(const Matrix& c, const Matrix& a, double tol) {
  return pbh_controllable(a.transpose(), c.transpose(), tol);
}

}  // namespace

PlantDiagnostics validate(const Plant& plant, const NumericSettings& num) {
  PlantDiagnostics d;
  auto flag = [&](bool ok, const std::string& msg) {
    if (!ok) d.violations.push_back(msg);
    return ok;
  };

  const int n = plant.n(), m = plant.m();
  d.dims_consistent =
      flag(plant.a.rows() == plant.a.cols() && plant.b.rows() == n &&
               plant.b1.rows() == n && plant.b2.rows() == n &&
               plant.c.cols() == n && plant.c1.cols() == n &&
               plant.c2.cols() == n && plant.d1.rows() == plant.c1.rows() &&
               plant.d1.cols() == m && plant.d2.rows() == plant.c2.rows() &&
               plant.d2.cols() == m && plant.q.rows() == n &&
               plant.q.cols() == n && plant.r.rows() == m &&
               plant.r.cols() == m && plant.gamma > 0,
           "dimension inconsistency");
  if (!d.dims_consistent) return d;

  d.controllable =
      flag(pbh_controllable(plant.a, plant.b, num.rank_rel_tol),
           "(A, B) fails the PBH controllability test");
  d.observable_c = flag(pbh_observable(plant.c, plant.a, num.rank_rel_tol),
                        "(C, A) fails the PBH observability test");
  d.observable_c2 = flag(pbh_observable(plant.c2, plant.a, num.rank_rel_tol),
                         "(C2, A) fails the PBH observability test");

  Eigen::SelfAdjointEigenSolver<Matrix> eq(plant.q, Eigen::EigenvaluesOnly);
  d.q_psd = flag(eq.eigenvalues().minCoeff() >= -1e-10 * (1.0 + plant.q.norm()),
                 "Q is not positive semidefinite");
  Eigen::SelfAdjointEigenSolver<Matrix> er(plant.r, Eigen::EigenvaluesOnly);
  d.r_pd = flag(er.eigenvalues().minCoeff() > 0.0,
                "R is not positive definite");

  d.c2_d2_orthogonal =
      flag((plant.c2.transpose() * plant.d2).norm() <=
               1e-10 * (1.0 + plant.c2.norm() * plant.d2.norm()),
           "C2' D2 is not zero");
  const double wq = (plant.c2.transpose() * plant.c2 - plant.q).norm();
  const double wr = (plant.d2.transpose() * plant.d2 - plant.r).norm();
  d.weights_match_outputs =
      flag(wq <= 1e-8 * (1.0 + plant.q.norm()) &&
               wr <= 1e-8 * (1.0 + plant.r.norm()),
           "(Q, R) do not match (C2, D2)");
  return d;
}

NetworkConfig::NetworkConfig() {
  node_dynamics.resize(2, 2);
  node_dynamics << 1, 1, 1, 2;
}

UncertaintyChannel worst_case_uncertainty(const Matrix& nominal,
                                          const std::vector<Matrix>& samples) {
  require(!samples.empty(), "worst_case_uncertainty: no samples");
  UncertaintyChannel out;
  for (size_t i = 0; i < samples.size(); ++i) {
    require(samples[i].rows() == nominal.rows() &&
                samples[i].cols() == nominal.cols(),
            "worst_case_uncertainty: sample shape mismatch");
    Eigen::JacobiSVD<Matrix> dec(samples[i] - nominal);
    const double sigma = dec.singularValues()[0];
    if (sigma > out.worst_norm) {
      out.worst_norm = sigma;
      out.worst_index = static_cast<int>(i);
    }
  }
  if (out.worst_index < 0 || out.worst_norm == 0.0)
    throw ZeroUncertainty(
        "worst_case_uncertainty: every sample equals the nominal matrix");

  Svd dec = svd(samples[out.worst_index] - nominal);
  const double scale = std::sqrt(out.worst_norm);
  out.b1 = scale * dec.u;
  out.c1 = scale * dec.v.transpose();
  out.gamma = 1.0;
  return out;
}

NetworkBenchmark build_network(const NetworkConfig& config) {
  require(config.nodes >= 2, "build_network: need at least two nodes");
  require(config.uncertainty >= 0.0 && config.uncertainty < 1.0,
          "build_network: uncertainty percentage must be in [0, 1)");
  require(config.samples >= 1, "build_network: need at least one sample");
  require(config.node_dynamics.rows() == 2 && config.node_dynamics.cols() == 2,
          "build_network: node dynamics block must be 2 x 2");

  const int nn = config.nodes;
  const int n = 2 * nn;
  std::mt19937_64 rng(config.seed);

  // Node placement on the L x L square with a minimum pairwise distance.
  Matrix pos(nn, 2);
  for (int i = 0; i < nn; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000)
        throw DegenerateGeometry("build_network: could not separate nodes");
      pos(i, 0) = uniform(rng, 0.0, config.area);
      pos(i, 1) = uniform(rng, 0.0, config.area);
      bool clear = true;
      for (int j = 0; j < i; ++j)
        if ((pos.row(i) - pos.row(j)).norm() < config.min_distance)
          clear = false;
      if (clear) break;
    }
  }

  Matrix dist = Matrix::Zero(nn, nn);
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j)
      if (i != j) dist(i, j) = (pos.row(i) - pos.row(j)).norm();

  auto assemble = [&](const std::vector<Matrix>& blocks, const Matrix& d) {
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < nn; ++i) {
      a.block(2 * i, 2 * i, 2, 2) = blocks[i];
      for (int j = 0; j < nn; ++j)
        if (i != j)
          a.block(2 * i, 2 * j, 2, 2) =
              std::exp(-d(i, j)) * Matrix::Identity(2, 2);
    }
    return a;
  };

  std::vector<Matrix> nominal_blocks(nn, config.node_dynamics);
  Matrix a_nominal = assemble(nominal_blocks, dist);

  NetworkBenchmark out;
  out.positions = pos;
  out.samples.reserve(config.samples);
  const double pct = config.uncertainty;
  for (int s = 0; s < config.samples; ++s) {
    std::vector<Matrix> blocks(nn);
    for (int i = 0; i < nn; ++i) {
      Matrix theta(2, 2);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) theta(r, c) = uniform(rng, -pct, pct);
      blocks[i] =
          config.node_dynamics + config.node_dynamics.cwiseProduct(theta);
    }
    Matrix d = dist;
    for (int i = 0; i < nn; ++i)
      for (int j = i + 1; j < nn; ++j) {
        const double delta = uniform(rng, -pct, pct);
        d(i, j) = dist(i, j) * (1.0 + delta);
        d(j, i) = d(i, j);
      }
    out.samples.push_back(assemble(blocks, d));
  }

  Plant& plant = out.plant;
  plant.a = a_nominal;
  plant.b = Matrix::Zero(n, nn);
  for (int i = 0; i < nn; ++i) plant.b(2 * i + 1, i) = 1.0;
  plant.b2 = plant.b;  // disturbance enters through the input channel
  plant.c = Matrix::Identity(n, n);
  plant.q = config.q_scale * Matrix::Identity(n, n);
  plant.r = config.r_scale * Matrix::Identity(nn, nn);
  attach_performance_outputs(plant);

  if (pct == 0.0) {
    // Degenerate but well-formed: a zero-gain uncertainty channel.
    plant.b1 = Matrix::Zero(n, 1);
    plant.c1 = Matrix::Zero(1, n);
    plant.gamma = 1.0;
    out.worst_index = 0;
    out.worst_norm = 0.0;
  } else {
    UncertaintyChannel ch = worst_case_uncertainty(a_nominal, out.samples);
    plant.b1 = ch.b1;
    plant.c1 = ch.c1;
    plant.gamma = ch.gamma;
    out.worst_index = ch.worst_index;
    out.worst_norm = ch.worst_norm;
  }
  plant.d1 = Matrix::Zero(plant.c1.rows(), plant.b.cols());
  return out;
}

int decentralized_cardinality(const NetworkConfig& config) {
  return 2 * config.nodes;  // each input sees the two states of its node
}

int dense_cardinality(const NetworkConfig& config) {
  return config.nodes * 2 * config.nodes;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = (rng() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u * (hi - lo);
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty())
    throw MissingData("matrix '" + name + "' missing or empty");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols)
      throw MissingData("matrix '" + name + "' is ragged");
    for (size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

std::string plant_to_json(const Plant& plant) {
  nlohmann::json j;
  j["A"] = matrix_json(plant.a);
  j["B"] = matrix_json(plant.b);
  j["B1"] = matrix_json(plant.b1);
  j["B2"] = matrix_json(plant.b2);
  j["C"] = matrix_json(plant.c);
  j["C1"] = matrix_json(plant.c1);
  j["D1"] = matrix_json(plant.d1);
  j["C2"] = matrix_json(plant.c2);
  j["D2"] = matrix_json(plant.d2);
  j["Q"] = matrix_json(plant.q);
  j["R"] = matrix_json(plant.r);
  j["gamma"] = plant.gamma;
  return j.dump(2);
}

Plant plant_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Plant plant;
  plant.a = matrix_from(j.at("A"), "A");
  plant.b = matrix_from(j.at("B"), "B");
  plant.b1 = matrix_from(j.at("B1"), "B1");
  plant.b2 = matrix_from(j.at("B2"), "B2");
  plant.c = matrix_from(j.at("C"), "C");
  plant.c1 = matrix_from(j.at("C1"), "C1");
  plant.d1 = matrix_from(j.at("D1"), "D1");
  plant.c2 = matrix_from(j.at("C2"), "C2");
  plant.d2 = matrix_from(j.at("D2"), "D2");
  plant.q = matrix_from(j.at("Q"), "Q");
  plant.r = matrix_from(j.at("R"), "R");
  plant.gamma = j.at("gamma").get<double>();
  return plant;
}

void save_plant(const Plant& plant, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_plant: cannot open " + path);
  out << plant_to_json(plant) << "\n";
}

Plant load_plant(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("load_plant: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return plant_from_json(text);
}

std::string matrix_to_json(const Matrix& m) {
  return matrix_json(m).dump(2);
}

void save_gain(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_gain: cannot open " + path);
  out << matrix_to_json(m) << "\n";
}

Matrix load_gain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("load_gain: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return matrix_from(j, path);
}

}  // namespace sparsegain
