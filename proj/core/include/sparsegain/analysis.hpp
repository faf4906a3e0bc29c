#pragma once

#include <optional>
#include <vector>

#include "sparsegain/plant.hpp"
#include "sparsegain/sdp.hpp"
#include "sparsegain/types.hpp"

namespace sparsegain {

struct H2Report {
  double j = 0.0;  // trace(B2' P B2)
  Matrix p;        // observability-type Gramian
  Matrix l;        // controllability-type Gramian
};

struct HinfReport {
  double norm = 0.0;
  double interval_width = 0.0;
  std::optional<Matrix> certificate;  // bounded-real certificate X, if asked
};

bool is_stabilizing(const Plant& plant, const Matrix& k,
                    const NumericSettings& num = {});

/// Closed-loop H2 cost with both Gramians; throws Unstable.
H2Report h2_cost(const Plant& plant, const Matrix& k,
                 const NumericSettings& num = {});

/// H-infinity norm of a stable state-space realization with zero
/// feedthrough, by bisection on the Hamiltonian imaginary-axis test.
double hinf_norm_ss(const Matrix& a, const Matrix& b, const Matrix& c,
                    const NumericSettings& num = {});

/// True iff the realization is stable and its norm is strictly below gamma
/// (single Hamiltonian test; no bisection).
bool hinf_below_ss(const Matrix& a, const Matrix& b, const Matrix& c,
                   double gamma, const NumericSettings& num = {});

/// Norm of the closed-loop uncertainty channel w1 -> z1; throws Unstable.
HinfReport hinf_norm(const Plant& plant, const Matrix& k,
                     bool want_certificate = false,
                     const NumericSettings& num = {});

bool hinf_below(const Plant& plant, const Matrix& k, double gamma,
                const NumericSettings& num = {});

/// Gradient of h(K) = J(K) + (b/2)||K - Xk||_F^2:
/// 2 (R K C - B' P) L C' + b (K - Xk). b = 0 gives the plain cost gradient.
Matrix h_gradient(const Plant& plant, const Matrix& k, const Matrix& xk,
                  double b, const NumericSettings& num = {});

/// ||K_last - K_prev||_F / eta over the two most recent iterates.
double projected_gradient_residual(const std::vector<Matrix>& iterates,
                                   double eta = 1.0);

/// Bounded-real LMI for the channel (a_cl, b1, c_cl1) at level gamma:
/// variables X (symmetric), feasible iff the norm is below gamma. The
/// stored variable is normalized; multiply by bounded_real_variable_scale
/// to recover the certificate.
LmiProblem make_bounded_real_problem(const Matrix& a_cl, const Matrix& b1,
                                     const Matrix& c_cl1, double gamma);
double bounded_real_variable_scale(const Matrix& a_cl, const Matrix& b1);

/// Maximum-margin certificate X for the bounded-real LMI, or nullopt when
/// the level set does not contain the closed loop.
std::optional<Matrix> bounded_real_certificate(const Matrix& a_cl,
                                               const Matrix& b1,
                                               const Matrix& c_cl1,
                                               double gamma,
                                               const SdpSettings& sdp = {});

}  // namespace sparsegain
