#include <doctest.h>

#include <algorithm>
#include <complex>
#include <random>

#include "oracles.hpp"
#include "sparsegain/linalg.hpp"

using namespace sparsegain;

namespace {

// Multiset comparison of complex spectra.
double spectrum_distance(ComplexVector a, ComplexVector b) {
  REQUIRE(a.size() == b.size());
  std::vector<std::complex<double>> va(a.data(), a.data() + a.size());
  std::vector<std::complex<double>> vb(b.data(), b.data() + b.size());
  double worst = 0.0;
  for (const auto& x : va) {
    double best = 1e300;
    size_t arg = 0;
    for (size_t i = 0; i < vb.size(); ++i) {
      const double d = std::abs(x - vb[i]);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    worst = std::max(worst, best);
    vb.erase(vb.begin() + arg);
  }
  return worst;
}

}  // namespace

TEST_CASE("eigenvalues: rotation matrix has +-i") {
  Matrix m(2, 2);
  m << 0, 1, -1, 0;
  auto eig = eigenvalues(m);
  CHECK(spectrum_distance(eig.values, (ComplexVector(2) << std::complex<double>(0, 1),
                                       std::complex<double>(0, -1))
                                          .finished()) < 1e-12);
}

TEST_CASE("eigenvalues: diagonal") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2;
  m(1, 1) = 3;
  auto eig = eigenvalues(m);
  CHECK(spectrum_distance(eig.values, (ComplexVector(2) << 2.0, 3.0).finished()) <
        1e-14);
}

TEST_CASE("eigenvalues: companion matrix with known roots, dim 10") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    // Roots closed under conjugation, reasonably separated.
    ComplexVector roots(10);
    for (int i = 0; i < 4; ++i) {
      const double re = oracles::uniform(rng, -2.0, 2.0);
      const double im = oracles::uniform(rng, 0.3, 2.0);
      roots[2 * i] = {re, im};
      roots[2 * i + 1] = {re, -im};
    }
    roots[8] = oracles::uniform(rng, -2.0, -0.5);
    roots[9] = oracles::uniform(rng, 0.5, 2.0);
    Matrix c = oracles::companion_with_roots(roots);
    auto eig = eigenvalues(c);
    CHECK(spectrum_distance(eig.values, roots) < 1e-8);
  }
}

TEST_CASE("eigenvalues: A and A^T agree as multisets") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix m = oracles::random_matrix(rng, 6, 6, 2.0);
    CHECK(spectrum_distance(eigenvalues(m).values,
                            eigenvalues(Matrix(m.transpose())).values) < 1e-8);
  }
}

TEST_CASE("svd: identity and diagonal") {
  CHECK(svd(Matrix::Identity(3, 3)).s.isApprox(Vector::Ones(3)));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = -4;
  Vector s = svd(d).s;
  CHECK(s[0] == doctest::Approx(4.0));
  CHECK(s[1] == doctest::Approx(3.0));
}

TEST_CASE("svd: reconstruction, orthogonality, power-iteration oracle") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix m = oracles::random_matrix(rng, 10, 10, 3.0);
    Svd dec = svd(m);
    const double scale = std::max(1.0, m.norm());
    CHECK((dec.u * dec.s.asDiagonal() * dec.v.transpose() - m).norm() <=
          1e-10 * scale);
    CHECK((dec.u.transpose() * dec.u - Matrix::Identity(10, 10)).norm() <=
          1e-10 * scale);
    CHECK((dec.v.transpose() * dec.v - Matrix::Identity(10, 10)).norm() <=
          1e-10 * scale);
    for (int i = 1; i < 10; ++i) CHECK(dec.s[i - 1] >= dec.s[i]);
    CHECK(dec.s[0] ==
          doctest::Approx(oracles::power_iteration_sigma_max(m)).epsilon(1e-8));
  }
}

TEST_CASE("lyapunov: scalar and diagonal cases") {
  Matrix a(1, 1), q(1, 1);
  a << -1;
  q << 2;
  CHECK(solve_lyapunov(a, q)(0, 0) == doctest::Approx(1.0));

  Matrix a2 = -Matrix::Identity(2, 2);
  CHECK((solve_lyapunov(a2, Matrix::Identity(2, 2)) -
         0.5 * Matrix::Identity(2, 2))
            .norm() < 1e-14);
}

TEST_CASE("lyapunov: random stable 5x5 matches Kronecker oracle") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix a = oracles::random_hurwitz(rng, 5);
    Matrix q = oracles::random_psd(rng, 5);
    Matrix p = solve_lyapunov(a, q);
    CHECK((p - oracles::kron_lyapunov(a, q)).norm() <=
          1e-9 * (1.0 + q.norm()));
  }
}

TEST_CASE("lyapunov: residual and PSD property over 100 random instances") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + static_cast<int>(oracles::uniform(rng, 0.0, 8.99));
    Matrix a = oracles::random_hurwitz(rng, n);
    Matrix q = oracles::random_psd(rng, n);
    Matrix p = solve_lyapunov(a, q);
    const double res = (a.transpose() * p + p * a + q).norm();
    CHECK(res <= 1e-8 * (1.0 + q.norm()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * (1.0 + p.norm()));
  }
}

TEST_CASE("lyapunov: non-Hurwitz input throws") {
  Matrix a = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(solve_lyapunov(a, Matrix::Identity(2, 2)), NotHurwitz);
}

TEST_CASE("care: scalar cases") {
  Matrix a(1, 1), b(1, 1), q(1, 1), r(1, 1);
  a << 1;
  b << 1;
  q << 1;
  r << 1;
  CareResult res = solve_care(a, b, q, r);
  CHECK(res.p(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)));
  CHECK(res.gain(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)));

  a << -1;
  res = solve_care(a, b, q, r);
  CHECK(res.p(0, 0) == doctest::Approx(-1.0 + std::sqrt(2.0)));
}

TEST_CASE("care: random 6-state 2-input systems") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix a = oracles::random_matrix(rng, 6, 6, 1.0);
    Matrix b = oracles::random_matrix(rng, 6, 2, 1.0);
    Matrix q = oracles::random_psd(rng, 6) + 0.1 * Matrix::Identity(6, 6);
    Matrix r = oracles::random_psd(rng, 2, 0.4) + Matrix::Identity(2, 2);
    CareResult res = solve_care(a, b, q, r);
    const Matrix care_res = a.transpose() * res.p + res.p * a -
                            res.p * b * r.inverse() * b.transpose() * res.p + q;
    CHECK(care_res.norm() <= 1e-8 * (1.0 + q.norm() + res.p.norm()));
    CHECK(spectral_abscissa(a - b * res.gain) < 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(res.p, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + res.p.norm()));
  }
}

TEST_CASE("care: uncontrollable unstable mode is rejected") {
  // x1 unstable and disconnected from the input.
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -1.0;
  Matrix b(2, 1);
  b << 0, 1;
  CHECK_THROWS_AS(
      solve_care(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
      NotStabilizable);
}
