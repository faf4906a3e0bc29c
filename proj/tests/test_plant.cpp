#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "sparsegain/linalg.hpp"
#include "sparsegain/plant.hpp"

using namespace sparsegain;

TEST_CASE("build_network: benchmark dimensions and parameters") {
  NetworkConfig cfg;  // defaults: N=5, L=2, 20%, 200 samples
  NetworkBenchmark bench = build_network(cfg);
  const Plant& p = bench.plant;
  CHECK(p.a.rows() == 10);
  CHECK(p.a.cols() == 10);
  CHECK(p.b.rows() == 10);
  CHECK(p.b.cols() == 5);
  CHECK(p.c.isIdentity(0.0));
  CHECK(p.gamma == 1.0);
  CHECK((p.q - 100.0 * Matrix::Identity(10, 10)).norm() == 0.0);
  CHECK((p.r - Matrix::Identity(5, 5)).norm() == 0.0);
  CHECK(bench.samples.size() == 200);
  CHECK(bench.worst_index >= 0);
  // Input pattern: one [0;1] column per node.
  for (int i = 0; i < 5; ++i) {
    CHECK(p.b(2 * i, i) == 0.0);
    CHECK(p.b(2 * i + 1, i) == 1.0);
  }
  // Open loop is unstable.
  CHECK(spectral_abscissa(p.a) > 0.0);
  CHECK(decentralized_cardinality(cfg) == 10);
  CHECK(dense_cardinality(cfg) == 50);
}

TEST_CASE("build_network: zero uncertainty reproduces the nominal matrix") {
  NetworkConfig cfg;
  cfg.uncertainty = 0.0;
  cfg.samples = 5;
  NetworkBenchmark bench = build_network(cfg);
  for (const auto& s : bench.samples) CHECK((s - bench.plant.a).norm() == 0.0);
}

TEST_CASE("build_network: determinism and structural equality across seeds") {
  NetworkConfig cfg;
  cfg.samples = 3;
  NetworkBenchmark b1 = build_network(cfg);
  NetworkBenchmark b2 = build_network(cfg);
  CHECK((b1.plant.a - b2.plant.a).norm() == 0.0);
  CHECK((b1.plant.b1 - b2.plant.b1).norm() == 0.0);

  cfg.seed = 99;
  NetworkBenchmark b3 = build_network(cfg);
  CHECK((b1.plant.a - b3.plant.a).norm() > 0.0);
  // Same coupling structure: identical nonzero pattern.
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      CHECK((b1.plant.a(i, j) != 0.0) == (b3.plant.a(i, j) != 0.0));
}

TEST_CASE("worst_case_uncertainty: scaled identity splits symmetrically") {
  const double eps = 0.25;
  std::mt19937_64 rng(1);
  Matrix a = oracles::random_matrix(rng, 4, 4, 1.0);
  std::vector<Matrix> samples = {a, a + eps * Matrix::Identity(4, 4)};
  UncertaintyChannel ch = worst_case_uncertainty(a, samples);
  CHECK(ch.gamma == 1.0);
  CHECK(ch.worst_index == 1);
  CHECK((ch.b1 * ch.c1 - eps * Matrix::Identity(4, 4)).norm() < 1e-12);
  CHECK(ch.b1.norm() == doctest::Approx(ch.c1.norm()));
}

TEST_CASE("worst_case_uncertainty: norm identity and reconstruction") {
  NetworkConfig cfg;
  NetworkBenchmark bench = build_network(cfg);
  UncertaintyChannel ch = worst_case_uncertainty(bench.plant.a, bench.samples);
  const Matrix dev = bench.samples[ch.worst_index] - bench.plant.a;
  Svd dec = svd(dev);
  // argmax property
  for (const auto& s : bench.samples) {
    Svd d = svd(Matrix(s - bench.plant.a));
    CHECK(d.s[0] <= dec.s[0] + 1e-12);
  }
  // ||B1 C1||_2 equals the worst deviation norm.
  Svd prod = svd(Matrix(ch.b1 * ch.c1));
  CHECK(std::abs(prod.s[0] - dec.s[0]) <= 1e-10 * std::max(1.0, dec.s[0]));
  // B1 (S / sigma_max) C1 rebuilds the deviation exactly.
  Matrix delta = (dec.s / dec.s[0]).asDiagonal();
  CHECK((ch.b1 * delta * ch.c1 - dev).norm() <= 1e-10 * (1.0 + dev.norm()));
}

TEST_CASE("worst_case_uncertainty: all-nominal samples are an error") {
  Matrix a = Matrix::Identity(3, 3);
  std::vector<Matrix> samples = {a, a, a};
  CHECK_THROWS_AS(worst_case_uncertainty(a, samples), ZeroUncertainty);
}

TEST_CASE("closed_loop: zero gain and identity output") {
  std::mt19937_64 rng(17);
  oracles::TestPlant tp = oracles::random_plant(rng, 4, 2);
  const Plant& p = tp.plant;
  ClosedLoop cl = closed_loop(p, Matrix::Zero(2, 4));
  CHECK((cl.a_cl - p.a).norm() == 0.0);
  CHECK((cl.c_cl1 - p.c1).norm() == 0.0);  // D1 = 0 in the test plant
  CHECK((cl.qbar - p.q).norm() == 0.0);

  Matrix k = oracles::random_matrix(rng, 2, 4, 1.0);
  cl = closed_loop(p, k);
  CHECK((cl.a_cl - (p.a - p.b * k * p.c)).norm() <= 1e-14 * p.a.norm());
  CHECK_THROWS_AS(closed_loop(p, Matrix::Zero(3, 4)), DimensionMismatch);
}

TEST_CASE("validate: benchmark plant passes, broken plants are flagged") {
  NetworkConfig cfg;
  NetworkBenchmark bench = build_network(cfg);
  PlantDiagnostics d = validate(bench.plant);
  CHECK(d.ok());
  CHECK(d.controllable);
  CHECK(d.observable_c);
  CHECK(d.observable_c2);

  Plant broken = bench.plant;
  broken.b.setZero();
  broken.b2.setZero();
  PlantDiagnostics db = validate(broken);
  CHECK_FALSE(db.controllable);

  Plant badr = bench.plant;
  badr.r(2, 2) = 0.0;
  PlantDiagnostics dr = validate(badr);
  CHECK_FALSE(dr.r_pd);
}

TEST_CASE("plant json round-trip is exact") {
  NetworkConfig cfg;
  cfg.samples = 2;
  NetworkBenchmark bench = build_network(cfg);
  const std::string path = "test_plant_roundtrip.json";
  save_plant(bench.plant, path);
  Plant back = load_plant(path);
  CHECK((back.a - bench.plant.a).norm() == 0.0);
  CHECK((back.b1 - bench.plant.b1).norm() == 0.0);
  CHECK((back.c2 - bench.plant.c2).norm() == 0.0);
  CHECK(back.gamma == bench.plant.gamma);
  std::filesystem::remove(path);
}
