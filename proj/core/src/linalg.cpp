#include "sparsegain/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace sparsegain {

namespace {

void check_square_finite(const Matrix& m, const char* who) {
  require(m.rows() > 0 && m.rows() == m.cols(),
          std::string(who) + ": matrix must be square and nonempty");
  if (!m.allFinite()) throw Error(std::string(who) + ": non-finite entries");
}

}  // namespace

Eigenstructure eigenvalues(const Matrix& m, bool with_vectors) {
  check_square_finite(m, "eigenvalues");
  Eigen::EigenSolver<Matrix> es(m, with_vectors);
  if (es.info() != Eigen::Success)
    throw NonConvergence("eigenvalues: QR iteration did not converge");
  Eigenstructure out;
  out.values = es.eigenvalues();
  if (with_vectors) out.vectors = es.eigenvectors();
  return out;
}

double spectral_abscissa(const Matrix& m) {
  check_square_finite(m, "spectral_abscissa");
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success)
    throw NonConvergence("spectral_abscissa: QR iteration did not converge");
  return es.eigenvalues().real().maxCoeff();
}

Svd svd(const Matrix& m) {
  require(m.size() > 0, "svd: empty matrix");
  if (!m.allFinite()) throw Error("svd: non-finite entries");
  Eigen::JacobiSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return Svd{dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

LyapunovSolver::LyapunovSolver(const Matrix& a, const NumericSettings& num) {
  check_square_finite(a, "LyapunovSolver");
  Eigen::ComplexSchur<Matrix> schur(a, true);
  if (schur.info() != Eigen::Success)
    throw NonConvergence("LyapunovSolver: Schur iteration did not converge");
  t_ = schur.matrixT();
  u_ = schur.matrixU();
  abscissa_ = t_.diagonal().real().maxCoeff();
  if (abscissa_ >= -num.stab_margin)
    throw NotHurwitz("LyapunovSolver: spectral abscissa " +
                     std::to_string(abscissa_) + " is not negative");
}

// T^* Y + Y T = -U^* Q U, forward substitution over columns. The shifted
// matrix T^* + t_kk I is lower triangular so every column is one
// triangular solve.
Matrix LyapunovSolver::solve_obsv(const Matrix& q) const {
  const auto n = t_.rows();
  require(q.rows() == n && q.cols() == n, "solve_obsv: dimension mismatch");
  ComplexMatrix f = u_.adjoint() * q * u_;
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  ComplexMatrix tadj = t_.adjoint();  // lower triangular
  for (Eigen::Index k = 0; k < n; ++k) {
    ComplexVector rhs = -f.col(k);
    if (k > 0) rhs.noalias() -= y.leftCols(k) * t_.topRows(k).col(k);
    ComplexMatrix lhs = tadj;
    lhs.diagonal().array() += t_(k, k);
    y.col(k) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix p = (u_ * y * u_.adjoint()).real();
  return 0.5 * (p + p.transpose());
}

// T Y + Y T^* = -U^* W U, backward substitution: column k couples only to
// columns j > k through conj(T(k, j)).
Matrix LyapunovSolver::solve_ctrb(const Matrix& w) const {
  const auto n = t_.rows();
  require(w.rows() == n && w.cols() == n, "solve_ctrb: dimension mismatch");
  ComplexMatrix f = u_.adjoint() * w * u_;
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    ComplexVector rhs = -f.col(k);
    if (k < n - 1) {
      rhs.noalias() -=
          y.rightCols(n - 1 - k) * t_.row(k).tail(n - 1 - k).adjoint();
    }
    ComplexMatrix lhs = t_;
    lhs.diagonal().array() += std::conj(t_(k, k));
    y.col(k) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  Matrix l = (u_ * y * u_.adjoint()).real();
  return 0.5 * (l + l.transpose());
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q,
                      const NumericSettings& num) {
  return LyapunovSolver(a, num).solve_obsv(q);
}

namespace {

// Unitary similarity swapping adjacent diagonal entries of a complex Schur
// form; rotation derived from the in-block eigenvector of the trailing
// eigenvalue.
void swap_schur_entries(ComplexMatrix& t, ComplexMatrix& u, Eigen::Index k) {
  using Complex = std::complex<double>;
  const Complex t11 = t(k, k), t12 = t(k, k + 1), t22 = t(k + 1, k + 1);
  Complex v0 = t12, v1 = t22 - t11;
  const double nv = std::sqrt(std::norm(v0) + std::norm(v1));
  if (nv < 1e-300) return;  // equal eigenvalues, nothing to move
  v0 /= nv;
  v1 /= nv;
  Eigen::Matrix2cd g;
  g << v0, -std::conj(v1), v1, std::conj(v0);
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  u.middleCols(k, 2) = u.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
}

}  // namespace

CareResult solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                      const Matrix& r, const NumericSettings& num) {
  const auto n = a.rows();
  const auto m = b.cols();
  check_square_finite(a, "solve_care");
  require(b.rows() == n, "solve_care: B row count");
  require(q.rows() == n && q.cols() == n, "solve_care: Q dimensions");
  require(r.rows() == m && r.cols() == m, "solve_care: R dimensions");

  Eigen::LLT<Matrix> r_chol(r);
  if (r_chol.info() != Eigen::Success)
    throw Error("solve_care: R is not positive definite");

  Matrix h(2 * n, 2 * n);
  h << a, -b * r_chol.solve(b.transpose()), -q, -a.transpose();

  Eigen::ComplexSchur<Matrix> schur(h, true);
  if (schur.info() != Eigen::Success)
    throw NonConvergence("solve_care: Schur iteration did not converge");
  ComplexMatrix t = schur.matrixT();
  ComplexMatrix u = schur.matrixU();

  // Move the n strictly stable eigenvalues to the leading block.
  const auto stable = [&](Eigen::Index i) {
    return t(i, i).real() < -num.care_tie_tol;
  };
  Eigen::Index placed = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (!stable(i)) continue;
    for (Eigen::Index k = i; k > placed; --k) swap_schur_entries(t, u, k - 1);
    ++placed;
  }
  if (placed != n)
    throw NotStabilizable(
        "solve_care: Hamiltonian does not split into n stable and n "
        "antistable eigenvalues (found " +
        std::to_string(placed) + " stable of " + std::to_string(2 * n) + ")");

  ComplexMatrix x1 = u.topLeftCorner(n, n);
  ComplexMatrix x2 = u.bottomLeftCorner(n, n);
  Eigen::FullPivLU<ComplexMatrix> lu(x1);
  if (!lu.isInvertible())
    throw NotStabilizable("solve_care: stable subspace basis is singular");
  Matrix p = (x2 * lu.inverse()).real();
  p = (0.5 * (p + p.transpose())).eval();

  Matrix gain = r_chol.solve(b.transpose() * p);

  const double res =
      (a.transpose() * p + p * a - p * b * r_chol.solve(b.transpose() * p) + q)
          .norm();
  const double scale = 1.0 + q.norm() + p.norm() * a.norm();
  if (!(res <= 1e-6 * scale))
    throw NotStabilizable("solve_care: residual " + std::to_string(res) +
                          " too large");
  if (spectral_abscissa(a - b * gain) >= -num.stab_margin)
    throw NotStabilizable("solve_care: closed loop not Hurwitz");
  return CareResult{p, gain};
}

}  // namespace sparsegain
