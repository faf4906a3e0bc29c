#include "sparsegain/palm.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <cmath>
#include <ostream>

#include "kprox.hpp"
#include "sparsegain/linalg.hpp"

namespace sparsegain {

PalmSettings PalmSettings::resolved(const Plant& plant) const {
  PalmSettings out = *this;
  if (out.rho <= 0.0) {
    Svd sq = svd(plant.q), sr = svd(plant.r);
    out.rho = 100.0 * sq.s[0] / std::max(1.0, sr.s[0]);
  }
  require(out.gamma1 > 1.0 && out.gamma2 > 1.0,
          "PalmSettings: gamma1 and gamma2 must exceed 1");
  require(out.theta >= 0.0, "PalmSettings: theta must be nonnegative");
  require(out.eps1 > 0 && out.eps2 > 0 && out.eps3 > 0,
          "PalmSettings: tolerances must be positive");
  require(out.sparsity >= 0, "PalmSettings: sparsity must be nonnegative");
  require(out.gamma_margin >= 0.0 && out.gamma_margin < plant.gamma,
          "PalmSettings: margin must lie in [0, gamma)");
  return out;
}

void SolveTrace::append(double phi_v, double j_v, double tinf_v, double dk_v,
                        double df_v, double coupling_v, double seconds_v) {
  phi.push_back(phi_v);
  j.push_back(j_v);
  tinf.push_back(tinf_v);
  dk.push_back(dk_v);
  df.push_back(df_v);
  coupling.push_back(coupling_v);
  seconds.push_back(seconds_v);
}

namespace {

void put_csv_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_trace_csv(const SolveTrace& trace, std::ostream& os) {
  os << "k,Phi,J,Tinf,dK,dF,coupling,seconds\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << i;
    for (double v : {trace.phi[i], trace.j[i], trace.tinf[i], trace.dk[i],
                     trace.df[i], trace.coupling[i], trace.seconds[i]}) {
      os << ',';
      put_csv_double(os, v);
    }
    os << '\n';
  }
}

std::string to_string(PalmStatus s) {
  return s == PalmStatus::ConvergedCoupled ? "Converged-Coupled"
                                           : "Converged-Decoupled";
}

std::string to_string(StopReason s) {
  switch (s) {
    case StopReason::KStep: return "K-step";
    case StopReason::FStep: return "F-step";
    case StopReason::MaxIterations: return "max-iterations";
  }
  return "?";
}

double coupling(const Matrix& k, const Matrix& f, double rho) {
  require(k.rows() == f.rows() && k.cols() == f.cols(),
          "coupling: shape mismatch");
  return 0.5 * rho * (k - f).squaredNorm();
}

Matrix hard_threshold(const Matrix& z, int s) {
  require(s >= 0, "hard_threshold: s must be nonnegative");
  const auto count = z.size();
  if (s >= count) return z;
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  if (s == 0) return out;

  // (magnitude, row-major index); ties resolved by index order.
  std::vector<std::pair<double, int>> mags;
  mags.reserve(count);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      mags.emplace_back(std::abs(z(i, j)),
                        static_cast<int>(i * z.cols() + j));
  std::sort(mags.begin(), mags.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int t = 0; t < s; ++t) {
    const int idx = mags[t].second;
    const Eigen::Index i = idx / z.cols(), j = idx % z.cols();
    out(i, j) = z(i, j);
  }
  return out;
}

Matrix f_step(const Matrix& k, const Matrix& f, const PalmSettings& settings) {
  require(k.rows() == f.rows() && k.cols() == f.cols(),
          "f_step: shape mismatch");
  const Matrix z = f - (f - k) / settings.gamma1;
  return hard_threshold(z, settings.sparsity);
}

DirectionResult improving_direction(const Plant& plant, const Matrix& k_cur,
                                    const Matrix& grad, double theta,
                                    double gamma0, const NumericSettings& num,
                                    const SdpSettings& sdp) {
  require(grad.rows() == k_cur.rows() && grad.cols() == k_cur.cols(),
          "improving_direction: gradient shape mismatch");
  if (!grad.allFinite())
    throw Error("improving_direction: gradient has non-finite entries");
  detail::KproxContext ctx = detail::central_context(plant, plant.gamma);
  detail::DirectionOutcome out = detail::direction_rows(
      ctx, k_cur, grad, theta, gamma0, /*descent_row=*/true, num, sdp);
  return DirectionResult{out.z, out.k_in_rows};
}

KproxResult kprox_op(const Plant& plant, const Matrix& k_start,
                     const Matrix& xk, double b, double gamma,
                     const PalmSettings& settings, const NumericSettings& num) {
  require(xk.rows() == k_start.rows() && xk.cols() == k_start.cols(),
          "kprox_op: proximal point shape mismatch");
  if (!hinf_below(plant, k_start, gamma, num))
    throw InfeasibleStart("kprox_op: T_inf(K_start) is not below gamma");
  detail::KproxContext ctx = detail::central_context(plant, gamma);
  detail::KproxOutcome out =
      detail::kprox(ctx, k_start, xk, b, settings, num);
  return KproxResult{out.k, out.iterations, out.stalled, out.stop};
}

PalmResult palm_solve(const Plant& plant, const PalmSettings& settings_in,
                      const Matrix& k0, const Matrix& f0,
                      const NumericSettings& num) {
  const PalmSettings settings = settings_in.resolved(plant);
  const double gamma_eff = plant.gamma - settings.gamma_margin;
  const double b = settings.gamma2 * settings.rho;

  if (!hinf_below(plant, k0, gamma_eff, num))
    throw InfeasibleStart("palm_solve: T_inf(K0) is not below gamma");
  if (!is_stabilizing(plant, f0, num))
    throw InfeasibleStart("palm_solve: F0 is not stabilizing");

  detail::KproxContext ctx = detail::central_context(plant, gamma_eff);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };

  PalmResult res;
  res.rho = settings.rho;
  Matrix k = k0, f = f0;

  auto record = [&](double dk, double df) {
    const double jv = h2_cost(plant, k, num).j;
    const double tinf = hinf_norm(plant, k, false, num).norm;
    res.trace.append(jv + coupling(k, f, settings.rho), jv, tinf, dk, df,
                     (k - f).squaredNorm(), elapsed());
  };
  record(0.0, 0.0);

  res.stop = StopReason::MaxIterations;
  for (int iter = 1; iter <= settings.k_max; ++iter) {
    res.iterations = iter;
    const Matrix f_next = f_step(k, f, settings);
    const Matrix xk = k - (k - f_next) / settings.gamma2;
    detail::KproxOutcome inner =
        detail::kprox(ctx, k, xk, b, settings, num);
    res.inner_stalled = res.inner_stalled || inner.stalled;

    const double dk = (inner.k - k).norm();
    const double df = (f_next - f).norm();
    k = inner.k;
    f = f_next;
    record(dk, df);

    if (dk < settings.eps1) {
      res.stop = StopReason::KStep;
      break;
    }
    if (df < settings.eps2) {
      res.stop = StopReason::FStep;
      break;
    }
  }

  res.gains = GainPair{k, f};
  res.status = (k - f).squaredNorm() < settings.couple_tol
                   ? PalmStatus::ConvergedCoupled
                   : PalmStatus::ConvergedDecoupled;
  return res;
}

namespace {

// Convex H-infinity state-feedback synthesis at the given level: with the
// substitution Y = K X the bounded-real condition is affine in (X, Y), so
// one max-margin SDP either produces a gain with T_inf below the level or
// certifies that none was found. Needs an invertible C (K = Y X^{-1} C^{-1}).
std::optional<Matrix> synthesize_state_feedback(const Plant& plant,
                                                double gamma,
                                                const NumericSettings& num) {
  const int n = plant.n(), m = plant.m(), p1 = plant.p1();
  // Time-scaled, level-normalized data (norm-invariant congruences).
  const double ts = std::max(1.0, plant.a.norm());
  const double rts = std::sqrt(ts);
  const Matrix a_s = plant.a / ts;
  const Matrix b_s = plant.b / ts;
  const Matrix b1b1t_s = plant.b1 * plant.b1.transpose() / ts;
  const Matrix c1_s = plant.c1 / (gamma * rts);
  const Matrix d1_s = plant.d1 / (gamma * rts);

  LmiProblem prob;
  prob.add_symmetric("X", n);
  prob.add_rectangular("Y", m, n);
  prob.add_scalar("t");
  prob.maximize("t");
  prob.require_psd("synthesis", n + p1, [=](const VariableView& v) {
    const Matrix x = v.matrix("X");
    const Matrix y = v.matrix("Y");
    const Matrix top = a_s * x - b_s * y;
    const Matrix mix = c1_s * x - d1_s * y;
    Matrix g(n + p1, n + p1);
    g.topLeftCorner(n, n) = -(top + top.transpose() + b1b1t_s);
    g.topRightCorner(n, p1) = -mix.transpose();
    g.bottomLeftCorner(p1, n) = -mix;
    g.bottomRightCorner(p1, p1) = Matrix::Identity(p1, p1);
    g -= v.scalar("t") * Matrix::Identity(n + p1, n + p1);
    return g;
  });
  // Conditioning caps: an unbounded Y would trade a huge-norm gain for a
  // marginally better certificate margin.
  prob.require_psd("X-floor", n, [n](const VariableView& v) {
    return Matrix(v.matrix("X") - 1e-4 * Matrix::Identity(n, n));
  });
  prob.require_psd("X-cap", n, [n](const VariableView& v) {
    return Matrix(1e4 * Matrix::Identity(n, n) - v.matrix("X"));
  });
  prob.require_psd("Y-cap", n + m, [n, m](const VariableView& v) {
    const Matrix y = v.matrix("Y");
    Matrix g(n + m, n + m);
    g.topLeftCorner(m, m) = 1e6 * Matrix::Identity(m, m);
    g.topRightCorner(m, n) = y;
    g.bottomLeftCorner(n, m) = y.transpose();
    g.bottomRightCorner(n, n) = 1e6 * Matrix::Identity(n, n);
    return g;
  });
  prob.require_nonneg("t-cap", [](const VariableView& v) {
    return 1e4 - v.scalar("t");
  });

  SdpSolution sol = solve(prob);
  if (sol.status != SdpStatus::Optimal ||
      prob.view(sol.x).scalar("t") <= 0.0)
    return std::nullopt;
  const Matrix x = prob.view(sol.x).matrix("X");
  const Matrix y = prob.view(sol.x).matrix("Y");
  Eigen::LLT<Matrix> xf(x);
  if (xf.info() != Eigen::Success) return std::nullopt;
  Matrix k = xf.solve(y.transpose()).transpose();  // K = Y X^{-1}
  Eigen::FullPivLU<Matrix> clu(plant.c);
  if (!clu.isInvertible()) return std::nullopt;
  k = k * clu.inverse();
  if (!hinf_below(plant, k, gamma * (1.0 + 1e-9) + 1e-12, num))
    return std::nullopt;
  return k;
}

}  // namespace

Matrix find_initial_gain(const Plant& plant, double gamma,
                         const PalmSettings& settings_in,
                         const NumericSettings& num) {
  require(gamma > 0, "find_initial_gain: gamma must be positive");
  CareResult care = solve_care(plant.a, plant.b, plant.q, plant.r, num);

  Matrix k0;
  const int n = plant.n();
  const bool c_square = plant.c.rows() == plant.c.cols();
  if (c_square && (plant.c - Matrix::Identity(n, n)).norm() == 0.0) {
    k0 = care.gain;
  } else {
    // Right inverse of a full-row-rank C.
    Eigen::FullPivLU<Matrix> cct(plant.c * plant.c.transpose());
    require(cct.isInvertible(), "find_initial_gain: C must have full row rank");
    k0 = care.gain * plant.c.transpose() * cct.inverse();
  }
  if (is_stabilizing(plant, k0, num) && hinf_below(plant, k0, gamma, num))
    return k0;

  // The CARE gain is exactly cost-stationary when C is the identity, so a
  // gradient-driven push cannot leave it. Instead, walk a CARE path that
  // progressively weights the uncertainty output: higher authority on the
  // z1 channel shrinks its closed-loop norm while the gain stays LQR-sized.
  if (c_square) {
    Eigen::FullPivLU<Matrix> clu(plant.c);
    require(clu.isInvertible(), "find_initial_gain: C must be invertible");
    const Matrix c_inv = clu.inverse();
    const Matrix c1tc1 = plant.c1.transpose() * plant.c1;
    double best = std::numeric_limits<double>::infinity();
    if (is_stabilizing(plant, k0, num))
      best = hinf_norm(plant, k0, false, num).norm;
    const double base =
        svd(plant.q).s[0] / std::max(1.0, svd(Matrix(c1tc1)).s[0]);
    for (double beta = 1.0; beta <= 3e8; beta *= 4.0) {
      Matrix qb = plant.q + beta * base * c1tc1;
      CareResult boosted;
      try {
        boosted = solve_care(plant.a, plant.b, qb, plant.r, num);
      } catch (const Error&) {
        continue;
      }
      const Matrix k = boosted.gain * c_inv;
      if (hinf_below(plant, k, gamma, num)) return k;
      if (is_stabilizing(plant, k, num))
        best = std::min(best, hinf_norm(plant, k, false, num).norm);
    }
    // Last resort: one-shot bounded-real synthesis (norm-capped).
    auto k_syn = synthesize_state_feedback(plant, gamma * (1.0 - 1e-3), num);
    if (k_syn) return *k_syn;
    throw CannotReachGamma(
        "find_initial_gain: no gain found with T_inf below " +
        std::to_string(gamma) + " (best achieved " + std::to_string(best) +
        ")");
  }

  // Wide C: walk the norm down with improving feasible directions driven by
  // the cost gradient.
  if (!is_stabilizing(plant, k0, num))
    throw CannotReachGamma(
        "find_initial_gain: CARE gain does not stabilize through C");
  PalmSettings settings = settings_in;
  settings.rho = 1.0;  // only theta/armijo fields are used here
  double best = hinf_norm(plant, k0, false, num).norm;
  detail::KproxContext ctx = detail::central_context(plant, gamma);

  const int budget = 200;
  for (int iter = 0; iter < budget; ++iter) {
    const double tinf = best;
    const double gamma0 = 1.01 * tinf;
    const Matrix grad =
        h_gradient(plant, k0, Matrix::Zero(k0.rows(), k0.cols()), 0.0, num);

    bool moved = false;
    for (bool descent : {true, false}) {
      detail::DirectionOutcome dir;
      try {
        dir = detail::direction_rows(ctx, k0, grad, settings.theta, gamma0,
                                     descent, num, SdpSettings{});
      } catch (const SdpFailure&) {
        continue;
      }
      if (descent && dir.z <= 0.0) continue;
      const Matrix dk = dir.k_in_rows - k0;
      double dp = 1.0;
      while (dp >= 1e-6) {
        const Matrix k_try = k0 + dp * dk;
        if (is_stabilizing(plant, k_try, num)) {
          const double t_try = hinf_norm(plant, k_try, false, num).norm;
          if (t_try < tinf * (1.0 - 1e-6)) {
            k0 = k_try;
            best = t_try;
            moved = true;
            break;
          }
        }
        dp *= 0.5;
      }
      if (moved) break;
    }
    if (!moved)
      throw CannotReachGamma(
          "find_initial_gain: stalled at T_inf = " + std::to_string(best) +
          " for gamma = " + std::to_string(gamma));
    if (hinf_below(plant, k0, gamma, num)) return k0;
  }
  throw CannotReachGamma("find_initial_gain: budget exhausted at T_inf = " +
                         std::to_string(best));
}

KproxResult solve_dense(const Plant& plant, const PalmSettings& settings_in,
                        const Matrix& k0, const NumericSettings& num) {
  PalmSettings settings = settings_in;
  if (settings.rho <= 0.0) settings.rho = 1.0;  // unused on the b = 0 path
  return kprox_op(plant, k0, k0, 0.0, plant.gamma - settings.gamma_margin,
                  settings, num);
}

}  // namespace sparsegain
