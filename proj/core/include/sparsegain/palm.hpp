#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sparsegain/analysis.hpp"
#include "sparsegain/plant.hpp"
#include "sparsegain/types.hpp"

namespace sparsegain {

struct PalmSettings {
  int sparsity = 0;       // s, cardinality budget for F
  double rho = 0.0;       // penalty weight; <= 0 selects the plant-scaled default
  double gamma1 = 1.1;    // a = gamma1 * rho
  double gamma2 = 1.1;    // b = gamma2 * rho
  double eps1 = 1e-4;     // outer K-change tolerance
  double eps2 = 1e-6;     // step-size floor / outer F-change tolerance
  double eps3 = 1e-4;     // stationarity tolerance
  int k_max = 500;
  int inner_max = 200;
  double theta = 0.1;     // LMI push factor
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double couple_tol = 1e-4;    // ||K - F||_F^2 threshold for a coupled exit
  double gamma_margin = 0.0;   // epsilon shrink of gamma (game mode)

  /// Fills rho from the plant scale when unset and checks invariants.
  PalmSettings resolved(const Plant& plant) const;
};

struct GainPair {
  Matrix k;  // H-infinity feasible iterate
  Matrix f;  // sparse iterate
};

/// Per-iteration solve record; every convergence figure reads from this.
struct SolveTrace {
  std::vector<double> phi, j, tinf, dk, df, coupling, seconds;
  void append(double phi_v, double j_v, double tinf_v, double dk_v,
              double df_v, double coupling_v, double seconds_v);
  std::size_t size() const { return phi.size(); }
};

/// CSV rows in the documented column order: k,Phi,J,Tinf,dK,dF,coupling,seconds.
void write_trace_csv(const SolveTrace& trace, std::ostream& os);

enum class PalmStatus { ConvergedCoupled, ConvergedDecoupled };
enum class StopReason { KStep, FStep, MaxIterations };

std::string to_string(PalmStatus s);
std::string to_string(StopReason s);

struct PalmResult {
  GainPair gains;
  SolveTrace trace;
  PalmStatus status = PalmStatus::ConvergedDecoupled;
  StopReason stop = StopReason::MaxIterations;
  int iterations = 0;
  bool inner_stalled = false;  // some K-step ended on the boundary path
  double rho = 0.0;            // penalty weight actually used
  /// Controller of record: F when coupled, K otherwise.
  const Matrix& controller() const {
    return status == PalmStatus::ConvergedCoupled ? gains.f : gains.k;
  }
};

/// Coupling penalty H(K, F) = (rho/2) ||K - F||_F^2.
double coupling(const Matrix& k, const Matrix& f, double rho);

/// Keeps the s largest-magnitude entries (row-major order breaks ties).
Matrix hard_threshold(const Matrix& z, int s);

/// One proximal F-step: threshold of F - (1/gamma1)(F - K).
Matrix f_step(const Matrix& k, const Matrix& f, const PalmSettings& settings);

struct DirectionResult {
  double z = 0.0;  // positive iff an improving feasible direction exists
  Matrix k_in;
};

/// Maximum-z feasible-direction LMI around K_cur at level gamma0. The level
/// set is convexified by freezing a maximum-margin bounded-real certificate
/// at K_cur. Requires T_inf(K_cur) < gamma0.
DirectionResult improving_direction(const Plant& plant, const Matrix& k_cur,
                                    const Matrix& grad, double theta,
                                    double gamma0,
                                    const NumericSettings& num = {},
                                    const SdpSettings& sdp = {});

struct KproxResult {
  Matrix k;
  int iterations = 0;
  bool stalled = false;  // boundary path could not move
  std::string stop;      // criterion that ended the loop
};

/// Feasible-direction minimization of h(K) = J(K) + (b/2)||K - Xk||_F^2
/// inside T_inf(K) < gamma. Never returns a K with larger h than K_start.
KproxResult kprox_op(const Plant& plant, const Matrix& k_start,
                     const Matrix& xk, double b, double gamma,
                     const PalmSettings& settings,
                     const NumericSettings& num = {});

/// Alternating proximal solve for the sparsity-constrained mixed design.
PalmResult palm_solve(const Plant& plant, const PalmSettings& settings,
                      const Matrix& k0, const Matrix& f0,
                      const NumericSettings& num = {});

/// Stabilizing gain with T_inf strictly below gamma, built from the CARE
/// gain and, when needed, interior-pushing LMI steps.
Matrix find_initial_gain(const Plant& plant, double gamma,
                         const PalmSettings& settings = {},
                         const NumericSettings& num = {});

/// Dense mixed baseline: the b -> 0 path (pure cost descent inside the
/// H-infinity level set), starting from k0.
KproxResult solve_dense(const Plant& plant, const PalmSettings& settings,
                        const Matrix& k0, const NumericSettings& num = {});

}  // namespace sparsegain
