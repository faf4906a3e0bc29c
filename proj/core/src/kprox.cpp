#include "kprox.hpp"

#include <algorithm>
#include <cmath>

#include "sparsegain/analysis.hpp"
#include "sparsegain/linalg.hpp"

namespace sparsegain::detail {

Matrix rows_of(const Matrix& k, const std::vector<int>& rows) {
  Matrix out(rows.size(), k.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = k.row(rows[i]);
  return out;
}

void set_rows(Matrix& k, const std::vector<int>& rows, const Matrix& block) {
  for (size_t i = 0; i < rows.size(); ++i) k.row(rows[i]) = block.row(i);
}

KproxContext central_context(const Plant& plant, double gamma_eff) {
  KproxContext ctx;
  ctx.plant = &plant;
  ctx.rows.resize(plant.m());
  for (int i = 0; i < plant.m(); ++i) ctx.rows[i] = i;
  ctx.gamma_eff = gamma_eff;
  ctx.r_rows = plant.r;
  ctx.b_rows = plant.b;
  ctx.q_const = plant.q;
  ctx.penalty_terms.push_back({ctx.rows, plant.r});
  return ctx;
}

namespace {

Matrix lyapunov_weight(const KproxContext& ctx, const Matrix& k) {
  const Plant& plant = *ctx.plant;
  Matrix w = ctx.q_const;
  for (const auto& [rows, r] : ctx.penalty_terms) {
    const Matrix kc = rows_of(k, rows) * plant.c;
    w += kc.transpose() * r * kc;
  }
  return w;
}

}  // namespace

CostEval eval_cost(const KproxContext& ctx, const Matrix& k,
                   const NumericSettings& num) {
  const Plant& plant = *ctx.plant;
  const Matrix a_cl = plant.a - plant.b * k * plant.c;
  CostEval out;
  try {
    LyapunovSolver lyap(a_cl, num);
    out.p = lyap.solve_obsv(lyapunov_weight(ctx, k));
    out.l = lyap.solve_ctrb(plant.b2 * plant.b2.transpose());
  } catch (const NotHurwitz&) {
    throw Unstable("eval_cost: closed loop is not Hurwitz");
  }
  out.j = (plant.b2.transpose() * out.p * plant.b2).trace();
  return out;
}

Matrix eval_gradient(const KproxContext& ctx, const Matrix& k,
                     const CostEval& at, const Matrix& xk_rows, double b) {
  const Plant& plant = *ctx.plant;
  const Matrix k_rows = rows_of(k, ctx.rows);
  Matrix grad = 2.0 *
                (ctx.r_rows * k_rows * plant.c -
                 ctx.b_rows.transpose() * at.p) *
                at.l * plant.c.transpose();
  if (b > 0.0) grad += b * (k_rows - xk_rows);
  return grad;
}

DirectionOutcome direction_rows(const KproxContext& ctx, const Matrix& k_cur,
                                const Matrix& grad_rows, double theta,
                                double gamma0, bool descent_row,
                                const NumericSettings& num,
                                const SdpSettings& sdp) {
  const Plant& plant = *ctx.plant;
  const int n = plant.n();
  const int p1 = plant.p1();
  const int p = plant.p();
  const int q = static_cast<int>(ctx.rows.size());

  const Matrix a_cl = plant.a - plant.b * k_cur * plant.c;
  const Matrix c_cl1 = plant.c1 - plant.d1 * k_cur * plant.c;
  auto x0 = bounded_real_certificate(a_cl, plant.b1, c_cl1, gamma0, sdp);
  if (!x0)
    throw SdpFailure(
        "improving direction: no bounded-real certificate at the chosen "
        "level (T_inf not strictly below gamma0?)");

  const Matrix k_cur_rows = rows_of(k_cur, ctx.rows);
  // Same normalization (time scale, unit level, Gramian-scaled variable) as
  // the certificate problem, with the certificate frozen.
  const double ts = std::max(1.0, a_cl.norm());
  const double rts = std::sqrt(ts);
  const double xs = bounded_real_variable_scale(a_cl, plant.b1);
  const Matrix x0m = *x0 / xs;
  const Matrix b_term = plant.b1 * plant.b1.transpose() / (ts * xs);

  LmiProblem prob;
  prob.add_scalar("z");
  prob.add_rectangular("Kin", q, p);
  prob.maximize("z");

  // Level-set block: affine in Kin.
  prob.require_psd(
      "level-set", n + p1,
      [&, x0m, b_term, gamma0, theta, ts, rts, xs](const VariableView& v) {
        Matrix k_full = k_cur;
        set_rows(k_full, ctx.rows, v.matrix("Kin"));
        const Matrix kc = k_full * plant.c;
        const Matrix acl_s = (plant.a - plant.b * kc) / ts;
        const Matrix ccl1_s =
            std::sqrt(xs) * (plant.c1 - plant.d1 * kc) / (gamma0 * rts);
        Matrix g(n + p1, n + p1);
        g.topLeftCorner(n, n) =
            -(acl_s * x0m + x0m * acl_s.transpose() + b_term);
        g.topRightCorner(n, p1) = -x0m * ccl1_s.transpose();
        g.bottomLeftCorner(p1, n) = -ccl1_s * x0m;
        g.bottomRightCorner(p1, p1) = Matrix::Identity(p1, p1);
        g -= theta * v.scalar("z") * Matrix::Identity(n + p1, n + p1);
        return g;
      });

  if (descent_row) {
    prob.require_nonneg("descent", [&, k_cur_rows](const VariableView& v) {
      const Matrix dk = v.matrix("Kin") - k_cur_rows;
      return -grad_rows.cwiseProduct(dk).sum() - v.scalar("z");
    });
  }
  // theta > 0 bounds z through the level block; only the degenerate case
  // needs an explicit cap to stay bounded.
  if (theta < 1e-12) {
    const double z_cap = 1e4 * (1.0 + grad_rows.norm()) * (1.0 + k_cur.norm());
    prob.require_nonneg("z-cap", [z_cap](const VariableView& v) {
      return z_cap - v.scalar("z");
    });
  }

  SdpSolution sol = solve(prob, sdp);
  if (sol.status != SdpStatus::Optimal)
    throw SdpFailure("improving direction: SDP returned " +
                     to_string(sol.status) + " (" + sol.diagnostics + ")");
  DirectionOutcome out;
  out.z = prob.view(sol.x).scalar("z");
  out.k_in_rows = prob.view(sol.x).matrix("Kin");
  return out;
}

namespace {

bool stacked_feasible(const KproxContext& ctx, const Matrix& k,
                      const NumericSettings& num) {
  const Plant& plant = *ctx.plant;
  const Matrix a_cl = plant.a - plant.b * k * plant.c;
  const Matrix c_cl1 = plant.c1 - plant.d1 * k * plant.c;
  return hinf_below_ss(a_cl, plant.b1, c_cl1, ctx.gamma_eff, num);
}

double level_for(const KproxContext& ctx, const Matrix& k,
                 const NumericSettings& num) {
  const Plant& plant = *ctx.plant;
  const Matrix a_cl = plant.a - plant.b * k * plant.c;
  const Matrix c_cl1 = plant.c1 - plant.d1 * k * plant.c;
  const double tinf = hinf_norm_ss(a_cl, plant.b1, c_cl1, num);
  // Tight level set around the iterate; fall back to the midpoint when the
  // iterate is within rounding of the bound itself.
  double g0 = std::min(ctx.gamma_eff * (1.0 - 1e-6), 1.01 * tinf);
  if (g0 <= tinf) g0 = 0.5 * (tinf + ctx.gamma_eff);
  return g0;
}

}  // namespace

KproxOutcome kprox(const KproxContext& ctx, const Matrix& k_start,
                   const Matrix& xk_rows, double b,
                   const PalmSettings& settings, const NumericSettings& num) {
  KproxOutcome out;
  out.k = k_start;

  CostEval at = eval_cost(ctx, out.k, num);
  auto h_of = [&](const CostEval& ev, const Matrix& k) {
    if (b <= 0.0) return ev.j;
    return ev.j + 0.5 * b * (rows_of(k, ctx.rows) - xk_rows).squaredNorm();
  };
  double h_cur = h_of(at, out.k);

  double d_start = 0.0;  // resolved from the first gradient
  for (int iter = 1; iter <= settings.inner_max; ++iter) {
    out.iterations = iter;
    const Matrix k_prev = out.k;

    const Matrix grad = eval_gradient(ctx, out.k, at, xk_rows, b);
    const double gnorm = grad.norm();
    if (gnorm < settings.eps3) {
      out.stop = "stationary";
      break;
    }

    if (d_start <= 0.0)
      d_start = std::min(1.0, 0.1 * (1.0 + out.k.norm()) / gnorm);

    // Interior gradient step with Armijo + feasibility backtracking.
    bool accepted = false;
    double d = d_start;
    while (d >= settings.eps2) {
      Matrix k_try = out.k;
      set_rows(k_try, ctx.rows, rows_of(out.k, ctx.rows) - d * grad);
      try {
        CostEval ev = eval_cost(ctx, k_try, num);
        const double h_try = h_of(ev, k_try);
        if (h_try <= h_cur - settings.armijo_c * d * gnorm * gnorm &&
            stacked_feasible(ctx, k_try, num)) {
          out.k = k_try;
          at = ev;
          h_cur = h_try;
          accepted = true;
          break;
        }
      } catch (const Unstable&) {
        // reject and shrink
      }
      d *= settings.armijo_shrink;
    }

    if (accepted) {
      d_start = std::min(4.0 * d, 1e6);
    } else {
      // Step collapsed: the iterate sits at the H-infinity boundary. Ask
      // the level-set LMI for an improving feasible direction.
      const double gamma0 = level_for(ctx, out.k, num);
      DirectionOutcome dir =
          direction_rows(ctx, out.k, grad, settings.theta, gamma0,
                         /*descent_row=*/true, num, SdpSettings{});
      if (dir.z <= 0.0) {
        out.stalled = true;
        out.stop = "boundary-stationary";
        break;
      }
      const Matrix dk = dir.k_in_rows - rows_of(out.k, ctx.rows);
      const double slope = grad.cwiseProduct(dk).sum();  // <= -z < 0
      bool moved = false;
      double dp = 1.0;
      while (dp >= settings.eps2) {
        Matrix k_try = out.k;
        set_rows(k_try, ctx.rows, rows_of(out.k, ctx.rows) + dp * dk);
        try {
          CostEval ev = eval_cost(ctx, k_try, num);
          const double h_try = h_of(ev, k_try);
          if (h_try <= h_cur + settings.armijo_c * dp * slope &&
              stacked_feasible(ctx, k_try, num)) {
            out.k = k_try;
            at = ev;
            h_cur = h_try;
            moved = true;
            break;
          }
        } catch (const Unstable&) {
        }
        dp *= settings.armijo_shrink;
      }
      if (!moved) {
        out.stalled = true;
        out.stop = "line-search-stall";
        break;
      }
    }

    if ((out.k - k_prev).norm() < settings.eps1) {
      out.stop = "step";
      break;
    }
  }
  if (out.stop.empty()) out.stop = "inner-max";
  return out;
}

}  // namespace sparsegain::detail
