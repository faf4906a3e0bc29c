#include "sparsegain/game.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "kprox.hpp"
#include "sparsegain/analysis.hpp"

namespace sparsegain {

void validate_players(const Plant& plant,
                      const std::vector<PlayerSpec>& players) {
  require(!players.empty(), "validate_players: no players");
  std::set<int> seen;
  for (const auto& pl : players) {
    require(!pl.rows.empty(), "validate_players: player owns no rows");
    for (int r : pl.rows) {
      require(r >= 0 && r < plant.m(), "validate_players: row out of range");
      require(seen.insert(r).second, "validate_players: row owned twice");
    }
    const int qi = static_cast<int>(pl.rows.size());
    require(pl.q.rows() == plant.n() && pl.q.cols() == plant.n(),
            "validate_players: Q_i must be n x n");
    require(pl.r.rows() == qi && pl.r.cols() == qi,
            "validate_players: R_i must match the row block");
    Eigen::SelfAdjointEigenSolver<Matrix> eq(pl.q, Eigen::EigenvaluesOnly);
    require(eq.eigenvalues().minCoeff() >= -1e-10 * (1.0 + pl.q.norm()),
            "validate_players: Q_i must be positive semidefinite");
    Eigen::SelfAdjointEigenSolver<Matrix> er(pl.r, Eigen::EigenvaluesOnly);
    require(er.eigenvalues().minCoeff() > 0.0,
            "validate_players: R_i must be positive definite");
  }
  require(static_cast<int>(seen.size()) == plant.m(),
          "validate_players: row blocks must partition all inputs");
}

namespace {

Matrix input_columns(const Plant& plant, const std::vector<int>& rows) {
  Matrix b(plant.n(), rows.size());
  for (size_t i = 0; i < rows.size(); ++i) b.col(i) = plant.b.col(rows[i]);
  return b;
}

detail::KproxContext player_context(const Plant& plant,
                                    const std::vector<PlayerSpec>& players,
                                    int i, double gamma_eff) {
  detail::KproxContext ctx;
  ctx.plant = &plant;
  ctx.rows = players[i].rows;
  ctx.gamma_eff = gamma_eff;
  if (players[i].potential) {
    // Exact potential game: the player objective IS the global cost, so the
    // gradient rows come from the global weight.
    ctx.r_rows = players[i].r;
    ctx.b_rows = input_columns(plant, players[i].rows);
    ctx.q_const = plant.q;
    std::vector<int> all(plant.m());
    std::iota(all.begin(), all.end(), 0);
    ctx.penalty_terms.push_back({all, plant.r});
  } else {
    ctx.r_rows = players[i].r;
    ctx.b_rows = input_columns(plant, players[i].rows);
    ctx.q_const = players[i].q;
    for (const auto& pl : players) ctx.penalty_terms.push_back({pl.rows, pl.r});
  }
  return ctx;
}

}  // namespace

void GameTrace::append(int round_v, int player_v, double j_v, double phi_v,
                       double dk_v, double df_v, double coupling_v,
                       double tinf_v) {
  round.push_back(round_v);
  player.push_back(player_v);
  j.push_back(j_v);
  phi.push_back(phi_v);
  dk.push_back(dk_v);
  df.push_back(df_v);
  coupling.push_back(coupling_v);
  tinf.push_back(tinf_v);
}

namespace {

void put_csv_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_game_trace_csv(const GameTrace& trace, std::ostream& os) {
  os << "round,player,Ji,Phii,dKi,dFi,coupling,Tinf\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << trace.round[i] << ',' << trace.player[i];
    for (double v : {trace.j[i], trace.phi[i], trace.dk[i], trace.df[i],
                     trace.coupling[i], trace.tinf[i]}) {
      os << ',';
      put_csv_double(os, v);
    }
    os << '\n';
  }
}

std::string to_string(GameStatus s) {
  switch (s) {
    case GameStatus::Converged: return "Converged";
    case GameStatus::Stagnated: return "Stagnated";
    case GameStatus::MaxRounds: return "MaxRounds";
  }
  return "?";
}

double player_h2_cost(const Plant& plant, const std::vector<PlayerSpec>& players,
                      int i, const Matrix& k, const NumericSettings& num) {
  require(i >= 0 && i < static_cast<int>(players.size()),
          "player_h2_cost: player index");
  if (players[i].potential) return h2_cost(plant, k, num).j;
  detail::KproxContext ctx = player_context(plant, players, i, plant.gamma);
  return detail::eval_cost(ctx, k, num).j;
}

Matrix player_gradient(const Plant& plant, const std::vector<PlayerSpec>& players,
                       int i, const Matrix& k, const Matrix& xi, double b,
                       const NumericSettings& num) {
  require(i >= 0 && i < static_cast<int>(players.size()),
          "player_gradient: player index");
  detail::KproxContext ctx = player_context(plant, players, i, plant.gamma);
  require(xi.rows() == static_cast<Eigen::Index>(ctx.rows.size()) &&
              xi.cols() == k.cols(),
          "player_gradient: proximal point must match the row block");
  detail::CostEval at = detail::eval_cost(ctx, k, num);
  return detail::eval_gradient(ctx, k, at, xi, b);
}

BestResponse best_response(const Plant& plant,
                           const std::vector<PlayerSpec>& players, int i,
                           const GameState& state, const GameSettings& settings,
                           const NumericSettings& num) {
  const PalmSettings palm = settings.palm.resolved(plant);
  const double gamma_eff = plant.gamma - palm.gamma_margin;
  const double b = palm.gamma2 * palm.rho;
  detail::KproxContext ctx = player_context(plant, players, i, gamma_eff);

  Matrix k = state.k;
  Matrix f = state.f;
  BestResponse out;
  out.iterations = 0;

  for (int iter = 1; iter <= palm.k_max; ++iter) {
    out.iterations = iter;
    // Joint F-step: all strategies are pruned together.
    const Matrix f_next = f_step(k, f, palm);
    // Per-player proximal point and K-step restricted to this row block.
    const Matrix ki = detail::rows_of(k, ctx.rows);
    const Matrix fi = detail::rows_of(f_next, ctx.rows);
    const Matrix xi = ki - (ki - fi) / palm.gamma2;
    detail::KproxOutcome inner = detail::kprox(ctx, k, xi, b, palm, num);
    out.stalled = out.stalled || inner.stalled;

    const double dki = (detail::rows_of(inner.k, ctx.rows) - ki).norm();
    const double dfn = (f_next - f).norm();
    k = inner.k;
    f = f_next;
    if (dki < palm.eps1 || dfn < palm.eps2) break;
  }

  out.k_i = detail::rows_of(k, ctx.rows);
  out.f = f;
  out.j_i = player_h2_cost(plant, players, i, k, num);
  out.phi_i = out.j_i + coupling(k, f, palm.rho);
  return out;
}

GameResult gne_solve_from(const Plant& plant,
                          const std::vector<PlayerSpec>& players,
                          const GameSettings& settings, const Matrix& k0,
                          const Matrix& f0, const NumericSettings& num) {
  validate_players(plant, players);
  const PalmSettings palm = settings.palm.resolved(plant);
  const double gamma_eff = plant.gamma - palm.gamma_margin;

  if (!hinf_below(plant, k0, gamma_eff, num))
    throw InfeasibleStart("gne_solve: T_inf(K0) is not below gamma - margin");
  if (!is_stabilizing(plant, f0, num))
    throw InfeasibleStart("gne_solve: F0 is not stabilizing");

  std::vector<int> order = settings.order;
  if (order.empty()) {
    order.resize(players.size());
    std::iota(order.begin(), order.end(), 0);
  }

  GameResult res;
  GameState st;
  st.k = k0;
  st.f = f0;
  st.last_dk.assign(players.size(), 0.0);
  st.last_df.assign(players.size(), 0.0);

  std::vector<Matrix> k_prev_round(players.size());
  res.status = GameStatus::MaxRounds;
  for (int round = 1; round <= settings.rounds_max; ++round) {
    res.rounds = round;
    st.round = round;
    const Matrix f_before = st.f;
    for (size_t t = 0; t < players.size(); ++t) {
      const int i = order[t];
      const Matrix ki_before = detail::rows_of(st.k, players[i].rows);
      const Matrix fi_before = detail::rows_of(st.f, players[i].rows);
      BestResponse br = best_response(plant, players, i, st, settings, num);
      detail::set_rows(st.k, players[i].rows, br.k_i);
      st.f = br.f;
      st.last_dk[i] = (br.k_i - ki_before).norm();
      st.last_df[i] =
          (detail::rows_of(st.f, players[i].rows) - fi_before).norm();

      const double tinf = hinf_norm(plant, st.k, false, num).norm;
      res.trace.append(round, players[i].id, br.j_i, br.phi_i, st.last_dk[i],
                       st.last_df[i], (st.k - st.f).squaredNorm(), tinf);
    }
    if ((st.f - f_before).norm() < palm.eps3) {
      // Joint sparse iterate stagnated; classify against the per-player
      // residual proxies before declaring an equilibrium.
      res.residuals.assign(players.size(), 0.0);
      bool all_small = true;
      for (size_t i = 0; i < players.size(); ++i) {
        res.residuals[i] = st.last_dk[i] / settings.eta;
        all_small = all_small && res.residuals[i] < palm.eps3;
      }
      res.status = all_small ? GameStatus::Converged : GameStatus::Stagnated;
      break;
    }
  }
  if (res.residuals.empty()) {
    res.residuals.assign(players.size(), 0.0);
    for (size_t i = 0; i < players.size(); ++i)
      res.residuals[i] = st.last_dk[i] / settings.eta;
  }
  res.k_gne = st.f;
  res.state = st;
  return res;
}

GameResult gne_solve(const Plant& plant, const std::vector<PlayerSpec>& players,
                     const GameSettings& settings, const NumericSettings& num) {
  const PalmSettings palm = settings.palm.resolved(plant);
  const Matrix k0 =
      find_initial_gain(plant, plant.gamma - palm.gamma_margin, palm, num);
  return gne_solve_from(plant, players, settings, k0, k0, num);
}

std::vector<PlayerSpec> potential_mode(const Plant& plant,
                                       const std::vector<PlayerSpec>& players) {
  validate_players(plant, players);
  // The construction needs u' R u to separate across the partition.
  for (const auto& pi : players)
    for (const auto& pj : players) {
      if (pi.id == pj.id) continue;
      for (int a : pi.rows)
        for (int bcol : pj.rows)
          if (std::abs(plant.r(a, bcol)) > 1e-12)
            throw NonSeparableR(
                "potential_mode: R couples input blocks of players " +
                std::to_string(pi.id) + " and " + std::to_string(pj.id));
    }

  std::vector<PlayerSpec> out = players;
  for (auto& pl : out) {
    pl.potential = true;
    pl.q = plant.q;
    Matrix ri(pl.rows.size(), pl.rows.size());
    for (size_t a = 0; a < pl.rows.size(); ++a)
      for (size_t b = 0; b < pl.rows.size(); ++b)
        ri(a, b) = plant.r(pl.rows[a], pl.rows[b]);
    pl.r = ri;
  }
  return out;
}

}  // namespace sparsegain
