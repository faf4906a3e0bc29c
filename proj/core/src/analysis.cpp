#include "sparsegain/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "sparsegain/linalg.hpp"

namespace sparsegain {

bool is_stabilizing(const Plant& plant, const Matrix& k,
                    const NumericSettings& num) {
  ClosedLoop cl = closed_loop(plant, k);
  return spectral_abscissa(cl.a_cl) < -num.stab_margin;
}

H2Report h2_cost(const Plant& plant, const Matrix& k,
                 const NumericSettings& num) {
  ClosedLoop cl = closed_loop(plant, k);
  H2Report rep;
  try {
    LyapunovSolver lyap(cl.a_cl, num);
    rep.p = lyap.solve_obsv(cl.qbar);
    rep.l = lyap.solve_ctrb(plant.b2 * plant.b2.transpose());
  } catch (const NotHurwitz&) {
    throw Unstable("h2_cost: closed loop is not Hurwitz");
  }
  rep.j = (plant.b2.transpose() * rep.p * plant.b2).trace();
  return rep;
}

namespace {

// No eigenvalue of the Hamiltonian on the imaginary axis <=> gamma strictly
// above the norm (A stable, zero feedthrough).
bool hamiltonian_test(const Matrix& a, const Matrix& bbt, const Matrix& ctc,
                      double gamma, const NumericSettings& num) {
  const auto n = a.rows();
  Matrix h(2 * n, 2 * n);
  h << a, bbt / gamma, -ctc / gamma, -a.transpose();
  Eigen::EigenSolver<Matrix> es(h, false);
  if (es.info() != Eigen::Success)
    throw NonConvergence("hinf: Hamiltonian eigenvalues did not converge");
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const auto lam = es.eigenvalues()[i];
    if (std::abs(lam.real()) <=
        num.hamiltonian_imag_tol * (1.0 + std::abs(lam.imag())))
      return false;
  }
  return true;
}

// sigma_max(C (jw I - A)^-1 B); used only for probe-based lower bounds.
double gain_at(const Matrix& a, const Matrix& b, const Matrix& c, double w) {
  const auto n = a.rows();
  ComplexMatrix m = std::complex<double>(0.0, w) * ComplexMatrix::Identity(n, n) -
                    a.cast<std::complex<double>>();
  ComplexMatrix g = c.cast<std::complex<double>>() *
                    m.partialPivLu().solve(b.cast<std::complex<double>>());
  Eigen::JacobiSVD<ComplexMatrix> svd(g);
  return svd.singularValues()[0];
}

}  // namespace

double hinf_norm_ss(const Matrix& a, const Matrix& b, const Matrix& c,
                    const NumericSettings& num) {
  require(a.rows() == a.cols() && b.rows() == a.rows() && c.cols() == a.cols(),
          "hinf_norm_ss: dimension mismatch");
  if (spectral_abscissa(a) >= -num.stab_margin)
    throw Unstable("hinf_norm_ss: A is not Hurwitz");
  if (b.norm() == 0.0 || c.norm() == 0.0) return 0.0;

  const Matrix bbt = b * b.transpose();
  const Matrix ctc = c.transpose() * c;

  // Lower bound from frequency probes at the resonance candidates.
  Eigenstructure eig = eigenvalues(a);
  double lo = std::max(gain_at(a, b, c, 0.0), 0.0);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double w = std::abs(eig.values[i].imag());
    if (w > 0.0) lo = std::max(lo, gain_at(a, b, c, w));
  }

  // Upper bound: grow the heuristic start until the Hamiltonian test passes.
  Svd sb = svd(b), sc = svd(c);
  double hi = std::max({2.0 * lo, sb.s[0] * sc.s[0], 1e-12});
  int guard = 0;
  while (!hamiltonian_test(a, bbt, ctc, hi, num)) {
    hi *= 2.0;
    if (++guard > 200)
      throw NonConvergence("hinf_norm_ss: no upper bound found");
  }
  lo = std::min(lo, hi);

  while (hi - lo > num.hinf_rel_tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (hamiltonian_test(a, bbt, ctc, mid, num))
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

bool hinf_below_ss(const Matrix& a, const Matrix& b, const Matrix& c,
                   double gamma, const NumericSettings& num) {
  require(gamma > 0, "hinf_below_ss: gamma must be positive");
  if (spectral_abscissa(a) >= -num.stab_margin) return false;
  if (b.norm() == 0.0 || c.norm() == 0.0) return true;
  return hamiltonian_test(a, b * b.transpose(), c.transpose() * c, gamma, num);
}

HinfReport hinf_norm(const Plant& plant, const Matrix& k, bool want_certificate,
                     const NumericSettings& num) {
  ClosedLoop cl = closed_loop(plant, k);
  if (spectral_abscissa(cl.a_cl) >= -num.stab_margin)
    throw Unstable("hinf_norm: closed loop is not Hurwitz");
  HinfReport rep;
  rep.norm = hinf_norm_ss(cl.a_cl, plant.b1, cl.c_cl1, num);
  rep.interval_width = num.hinf_rel_tol * std::max(1.0, rep.norm);
  if (want_certificate) {
    const double level = rep.norm * (1.0 + 10.0 * num.hinf_rel_tol) + 1e-12;
    rep.certificate =
        bounded_real_certificate(cl.a_cl, plant.b1, cl.c_cl1, level);
  }
  return rep;
}

bool hinf_below(const Plant& plant, const Matrix& k, double gamma,
                const NumericSettings& num) {
  ClosedLoop cl = closed_loop(plant, k);
  return hinf_below_ss(cl.a_cl, plant.b1, cl.c_cl1, gamma, num);
}

Matrix h_gradient(const Plant& plant, const Matrix& k, const Matrix& xk,
                  double b, const NumericSettings& num) {
  require(xk.rows() == k.rows() && xk.cols() == k.cols(),
          "h_gradient: proximal point shape mismatch");
  require(b >= 0.0, "h_gradient: b must be nonnegative");
  H2Report rep = h2_cost(plant, k, num);
  Matrix grad = 2.0 *
                (plant.r * k * plant.c - plant.b.transpose() * rep.p) * rep.l *
                plant.c.transpose();
  if (b > 0.0) grad += b * (k - xk);
  return grad;
}

double projected_gradient_residual(const std::vector<Matrix>& iterates,
                                   double eta) {
  require(iterates.size() >= 2,
          "projected_gradient_residual: need at least two iterates");
  require(eta > 0.0, "projected_gradient_residual: eta must be positive");
  const Matrix& last = iterates[iterates.size() - 1];
  const Matrix& prev = iterates[iterates.size() - 2];
  return (last - prev).norm() / eta;
}

LmiProblem make_bounded_real_problem(const Matrix& a_cl, const Matrix& b1,
                                     const Matrix& c_cl1, double gamma) {
  const int n = static_cast<int>(a_cl.rows());
  const int p1 = static_cast<int>(c_cl1.rows());
  require(a_cl.cols() == n && b1.rows() == n && c_cl1.cols() == n,
          "make_bounded_real_problem: dimension mismatch");
  require(gamma > 0, "make_bounded_real_problem: gamma must be positive");

  // Three norm-invariant transforms condition the LMI without changing what
  // a certificate means: time scaling (A/s, B1/sqrt(s), C1/sqrt(s)) tames
  // fast closed loops, folding gamma into C1 normalizes the level to 1, and
  // the variable substitution X = xs * Xt keeps the decision matrix near
  // unit scale (xs is the input-Gramian scale). The stored variable is Xt.
  const double ts = std::max(1.0, a_cl.norm());
  const Matrix a_s = a_cl / ts;
  const Matrix b1b1t_ts = b1 * b1.transpose() / ts;
  const double xs = std::max(b1b1t_ts.norm(), 1e-12);
  const Matrix b_term = b1b1t_ts / xs;
  const Matrix c1_s =
      std::sqrt(xs) * c_cl1 / (gamma * std::sqrt(ts));

  LmiProblem prob;
  prob.add_symmetric("X", n);
  prob.require_psd("bounded-real", n + p1,
                   [=](const VariableView& v) {
                     Matrix x = v.matrix("X");
                     Matrix m(n + p1, n + p1);
                     m.topLeftCorner(n, n) =
                         -(a_s * x + x * a_s.transpose() + b_term);
                     m.topRightCorner(n, p1) = -x * c1_s.transpose();
                     m.bottomLeftCorner(p1, n) = -c1_s * x;
                     m.bottomRightCorner(p1, p1) = Matrix::Identity(p1, p1);
                     return m;
                   },
                   /*strict=*/true);
  prob.require_psd("X-positive", n,
                   [](const VariableView& v) { return v.matrix("X"); },
                   /*strict=*/true);
  return prob;
}

double bounded_real_variable_scale(const Matrix& a_cl, const Matrix& b1) {
  const double ts = std::max(1.0, a_cl.norm());
  return std::max((b1 * b1.transpose() / ts).norm(), 1e-12);
}

std::optional<Matrix> bounded_real_certificate(const Matrix& a_cl,
                                               const Matrix& b1,
                                               const Matrix& c_cl1,
                                               double gamma,
                                               const SdpSettings& sdp) {
  LmiProblem prob = make_bounded_real_problem(a_cl, b1, c_cl1, gamma);
  FeasibilityCheck chk = check_feasible(prob, sdp);
  if (!chk.feasible) return std::nullopt;
  return bounded_real_variable_scale(a_cl, b1) *
         prob.view(chk.witness).matrix("X");
}

}  // namespace sparsegain
