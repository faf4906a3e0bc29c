#pragma once

#include <complex>
#include <vector>

#include "sparsegain/types.hpp"

namespace sparsegain {

struct Eigenstructure {
  ComplexVector values;
  ComplexMatrix vectors;  // empty unless requested
};

/// Eigenvalues (optionally eigenvectors) of a square real matrix.
Eigenstructure eigenvalues(const Matrix& m, bool with_vectors = false);

/// Maximum real part over the spectrum.
double spectral_abscissa(const Matrix& m);

struct Svd {
  Matrix u;   // orthonormal columns
  Vector s;   // nonincreasing, nonnegative
  Matrix v;   // orthonormal columns, m = u * s.asDiagonal() * v^T
};

Svd svd(const Matrix& m);

/// Solves both continuous Lyapunov directions from one complex Schur
/// factorization of A (Bartels-Stewart). Construction throws NotHurwitz
/// when the spectral abscissa of A is nonnegative.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const Matrix& a, const NumericSettings& num = {});

  /// A^T P + P A + Q = 0 (observability direction).
  Matrix solve_obsv(const Matrix& q) const;
  /// A L + L A^T + W = 0 (controllability direction).
  Matrix solve_ctrb(const Matrix& w) const;

  double abscissa() const { return abscissa_; }

 private:
  ComplexMatrix t_, u_;
  double abscissa_ = 0.0;
};

/// A^T P + P A + Q = 0 for Hurwitz A; symmetric Q gives symmetric P.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q,
                      const NumericSettings& num = {});

struct CareResult {
  Matrix p;     // stabilizing solution, symmetric PSD
  Matrix gain;  // R^{-1} B^T P, closed loop A - B*gain Hurwitz
};

/// Continuous algebraic Riccati equation A^T P + P A - P B R^{-1} B^T P + Q = 0
/// via the stable invariant subspace of the Hamiltonian (ordered complex
/// Schur). Throws NotStabilizable when no stabilizing solution exists.
CareResult solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                      const Matrix& r, const NumericSettings& num = {});

}  // namespace sparsegain
