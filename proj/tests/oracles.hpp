#pragma once

// Independent test oracles. Everything here is deliberately brute force:
// these paths must not share code with the implementations they check.

#include <cstdint>
#include <random>
#include <vector>

#include "sparsegain/plant.hpp"
#include "sparsegain/types.hpp"

namespace oracles {

using sparsegain::ComplexVector;
using sparsegain::Matrix;
using sparsegain::Plant;
using sparsegain::Vector;

// Deterministic uniform in [lo, hi) straight from the 64-bit stream.
double uniform(std::mt19937_64& rng, double lo, double hi);
Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0);
Matrix random_psd(std::mt19937_64& rng, int n, double scale = 1.0);
Matrix random_hurwitz(std::mt19937_64& rng, int n, double margin = 0.5);

/// Companion matrix of the monic polynomial with the given roots (roots
/// must be closed under conjugation); expands the coefficients exactly.
Matrix companion_with_roots(const ComplexVector& roots);

/// sigma_max via power iteration on M^T M.
double power_iteration_sigma_max(const Matrix& m, int iters = 2000);

/// Lyapunov solve A'P + PA + Q = 0 by Kronecker vectorization (O(n^6)).
Matrix kron_lyapunov(const Matrix& a, const Matrix& q);

/// integral of trace(H' H) for H(t) = C e^{At} B via Simpson quadrature,
/// integrating until the propagator norm falls below 1e-10.
double impulse_response_h2(const Matrix& a, const Matrix& b, const Matrix& c);

/// max over a log grid of sigma_max(C (jw - A)^{-1} B), warm-started power
/// iteration per point.
double frequency_grid_hinf(const Matrix& a, const Matrix& b, const Matrix& c,
                           int points = 1000000);

/// Best cardinality-s approximation by trying every support (small sizes).
Matrix exhaustive_support_projection(const Matrix& z, int s);

/// Central finite differences of a scalar function of a matrix.
template <typename F>
Matrix finite_difference_gradient(F&& f, const Matrix& at, double step = 1e-6) {
  Matrix g(at.rows(), at.cols());
  for (Eigen::Index i = 0; i < at.rows(); ++i)
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      Matrix hi = at, lo = at;
      hi(i, j) += step;
      lo(i, j) -= step;
      g(i, j) = (f(hi) - f(lo)) / (2.0 * step);
    }
  return g;
}

/// Small random plant with identity C, CARE-based stabilizing gain
/// available, and a nontrivial uncertainty channel.
struct TestPlant {
  Plant plant;
  Matrix k_stabilizing;
};
TestPlant random_plant(std::mt19937_64& rng, int n, int m, int m1 = 2,
                       int m2 = 2);

/// Random output-feedback gain that keeps the loop stable (rejection
/// sampled around the CARE gain).
Matrix random_stabilizing_gain(std::mt19937_64& rng, const Plant& plant,
                               const Matrix& k_seed, double spread = 0.3);

}  // namespace oracles
