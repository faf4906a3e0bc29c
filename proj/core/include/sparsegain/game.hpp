#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sparsegain/palm.hpp"
#include "sparsegain/plant.hpp"
#include "sparsegain/types.hpp"

namespace sparsegain {

/// One player's slice of the design: a row block of K plus its own weights.
struct PlayerSpec {
  int id = 0;
  std::vector<int> rows;  // rows of K owned (control inputs)
  Matrix q;               // n x n, >= 0
  Matrix r;               // q_i x q_i, > 0
  bool potential = false; // objective rewired to the global cost
};

/// Throws unless the row blocks partition {0..m-1} and weights are well
/// posed for the plant.
void validate_players(const Plant& plant, const std::vector<PlayerSpec>& players);

struct GameSettings {
  PalmSettings palm;   // palm.gamma_margin is the shared epsilon margin
  int rounds_max = 60;
  std::vector<int> order;  // round order; empty = ascending ids
  double eta = 1.0;        // residual-proxy scale

  GameSettings() { palm.gamma_margin = 0.01; }
};

/// Per-round, per-player rows of the game trace.
struct GameTrace {
  std::vector<int> round, player;
  std::vector<double> j, phi, dk, df, coupling, tinf;
  void append(int round_v, int player_v, double j_v, double phi_v, double dk_v,
              double df_v, double coupling_v, double tinf_v);
  std::size_t size() const { return round.size(); }
};

/// CSV column order: round,player,Ji,Phii,dKi,dFi,coupling,Tinf.
void write_game_trace_csv(const GameTrace& trace, std::ostream& os);

struct GameState {
  int round = 0;
  Matrix k;  // stacked feasible iterate
  Matrix f;  // shared sparse iterate
  std::vector<double> last_dk, last_df;  // per player, most recent round
};

enum class GameStatus { Converged, Stagnated, MaxRounds };
std::string to_string(GameStatus s);

struct GameResult {
  Matrix k_gne;  // the shared sparse gain F at exit
  GameState state;
  GameTrace trace;
  GameStatus status = GameStatus::MaxRounds;
  int rounds = 0;
  std::vector<double> residuals;  // per-player projected-gradient proxies
};

/// Individual cost of player i under the stacked gain (coupled Lyapunov
/// weight includes every player's input penalty).
double player_h2_cost(const Plant& plant, const std::vector<PlayerSpec>& players,
                      int i, const Matrix& k, const NumericSettings& num = {});

/// Gradient of J_i + (b/2)||K_i - Xi||^2 over player i's row block.
Matrix player_gradient(const Plant& plant, const std::vector<PlayerSpec>& players,
                       int i, const Matrix& k, const Matrix& xi, double b,
                       const NumericSettings& num = {});

struct BestResponse {
  Matrix k_i;      // updated row block
  Matrix f;        // updated shared sparse gain
  double phi_i;    // player objective at exit
  double j_i;
  int iterations = 0;
  bool stalled = false;
};

/// Player i's PALM best response given everyone else's strategies.
BestResponse best_response(const Plant& plant,
                           const std::vector<PlayerSpec>& players, int i,
                           const GameState& state, const GameSettings& settings,
                           const NumericSettings& num = {});

/// Round-robin best responses to an approximate generalized Nash point.
GameResult gne_solve(const Plant& plant, const std::vector<PlayerSpec>& players,
                     const GameSettings& settings,
                     const NumericSettings& num = {});

/// Same args plus explicit start; gne_solve builds its start from the
/// centralized initializer.
GameResult gne_solve_from(const Plant& plant,
                          const std::vector<PlayerSpec>& players,
                          const GameSettings& settings, const Matrix& k0,
                          const Matrix& f0, const NumericSettings& num = {});

/// Rewires every player's objective to the global cost (exact potential
/// game). Requires R block-diagonal w.r.t. the partition.
std::vector<PlayerSpec> potential_mode(const Plant& plant,
                                       const std::vector<PlayerSpec>& players);

}  // namespace sparsegain
