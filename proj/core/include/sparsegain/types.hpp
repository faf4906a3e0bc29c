#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sparsegain {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Tolerances shared across the library. Every solver reads its defaults
/// from one of these records so the numerics are pinned in a single place.
struct NumericSettings {
  // Lyapunov / Riccati
  double lyapunov_rel_residual = 1e-8;
  double care_tie_tol = 1e-9;  // real-part tolerance splitting stable/unstable
  // Stability
  double stab_margin = 1e-9;  // spectral abscissa must be < -stab_margin
  // H-infinity bisection
  double hinf_rel_tol = 1e-6;
  double hamiltonian_imag_tol = 1e-8;  // |Re| <= tol*(1+|Im|) counts as on-axis
  // Rank decisions (PBH tests)
  double rank_rel_tol = 1e-10;
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonConvergence : Error {
  using Error::Error;
};
struct NotHurwitz : Error {
  using Error::Error;
};
struct NotStabilizable : Error {
  using Error::Error;
};
struct Unstable : Error {
  using Error::Error;
};
struct DegenerateGeometry : Error {
  using Error::Error;
};
struct ZeroUncertainty : Error {
  using Error::Error;
};
struct SdpFailure : Error {
  using Error::Error;
};
struct InfeasibleStart : Error {
  using Error::Error;
};
struct CannotReachGamma : Error {
  using Error::Error;
};
struct NonSeparableR : Error {
  using Error::Error;
};
struct MissingData : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionMismatch(what);
}

}  // namespace sparsegain
