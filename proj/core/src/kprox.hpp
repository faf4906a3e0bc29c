#pragma once

// Shared proximal K-minimization engine. The centralized solver frees every
// row of K; the game frees one player's row block and reads its own cost.

#include <string>
#include <vector>

#include "sparsegain/palm.hpp"
#include "sparsegain/plant.hpp"
#include "sparsegain/sdp.hpp"
#include "sparsegain/types.hpp"

namespace sparsegain::detail {

struct KproxContext {
  const Plant* plant = nullptr;
  std::vector<int> rows;   // free rows of the stacked gain
  double gamma_eff = 0.0;  // H-infinity level enforced on the stacked gain
  Matrix r_rows;           // input weight acting on the free rows
  Matrix b_rows;           // input columns acting on the free rows
  // State weight of the cost, K-dependent part excluded; the engine adds
  // C' (sum_j K_j' R_j K_j) C through `penalty_terms`.
  Matrix q_const;
  // (rows, R) pairs whose input penalties enter the Lyapunov weight.
  std::vector<std::pair<std::vector<int>, Matrix>> penalty_terms;
};

KproxContext central_context(const Plant& plant, double gamma_eff);

struct CostEval {
  double j = 0.0;
  Matrix p, l;
};

/// Cost at the stacked gain; throws Unstable when the loop is not Hurwitz.
CostEval eval_cost(const KproxContext& ctx, const Matrix& k,
                   const NumericSettings& num);

/// Gradient over the free rows of h = cost + (b/2)||K_rows - xk_rows||^2.
Matrix eval_gradient(const KproxContext& ctx, const Matrix& k,
                     const CostEval& at, const Matrix& xk_rows, double b);

struct DirectionOutcome {
  double z = 0.0;
  Matrix k_in_rows;
};

/// Player-shaped improving-direction LMI at level gamma0. `descent_row`
/// false drops the gradient inequality (pure interior push).
DirectionOutcome direction_rows(const KproxContext& ctx, const Matrix& k_cur,
                                const Matrix& grad_rows, double theta,
                                double gamma0, bool descent_row,
                                const NumericSettings& num,
                                const SdpSettings& sdp);

struct KproxOutcome {
  Matrix k;  // full stacked gain
  int iterations = 0;
  bool stalled = false;
  std::string stop;
};

KproxOutcome kprox(const KproxContext& ctx, const Matrix& k_start,
                   const Matrix& xk_rows, double b,
                   const PalmSettings& settings, const NumericSettings& num);

Matrix rows_of(const Matrix& k, const std::vector<int>& rows);
void set_rows(Matrix& k, const std::vector<int>& rows, const Matrix& block);

}  // namespace sparsegain::detail
