#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparsegain/types.hpp"

namespace sparsegain {

enum class VarKind { Scalar, Symmetric, Rectangular };

struct LmiVariable {
  std::string name;
  VarKind kind;
  int rows = 1;
  int cols = 1;
  int offset = 0;  // first index in the packed decision vector
  int size() const {
    switch (kind) {
      case VarKind::Scalar: return 1;
      case VarKind::Symmetric: return rows * (rows + 1) / 2;
      case VarKind::Rectangular: return rows * cols;
    }
    return 0;
  }
};

/// Read-only view of a packed decision vector as named variables.
class VariableView {
 public:
  VariableView(const std::vector<LmiVariable>& vars, const Vector& x)
      : vars_(&vars), x_(&x) {}
  double scalar(const std::string& name) const;
  /// Symmetric variables come back expanded to full square form.
  Matrix matrix(const std::string& name) const;

 private:
  const LmiVariable& find(const std::string& name) const;
  const std::vector<LmiVariable>* vars_;
  const Vector* x_;
};

/// Maximize a linear functional of the variables subject to affine
/// symmetric matrix expressions being positive semidefinite (strict blocks
/// are shrunk by a data-scaled margin) plus scalar linear inequalities.
class LmiProblem {
 public:
  void add_scalar(const std::string& name);
  void add_symmetric(const std::string& name, int n);
  void add_rectangular(const std::string& name, int rows, int cols);

  /// Adds weight * value to the (maximized) objective.
  void maximize(const std::string& name, double weight = 1.0);
  /// Adds <weight, value> for a matrix variable.
  void maximize(const std::string& name, const Matrix& weight);

  /// expr must be affine in the variables and symmetric dim x dim.
  void require_psd(const std::string& label, int dim,
                   std::function<Matrix(const VariableView&)> expr,
                   bool strict = false);
  /// Affine scalar expr(x) >= 0.
  void require_nonneg(const std::string& label,
                      std::function<double(const VariableView&)> expr);

  int scalar_dimension() const { return dim_; }
  const std::vector<LmiVariable>& variables() const { return vars_; }
  VariableView view(const Vector& x) const { return VariableView(vars_, x); }

  struct BlockSpec {
    std::string label;
    int dim;
    std::function<Matrix(const VariableView&)> expr;
    bool strict;
  };
  const std::vector<BlockSpec>& blocks() const { return blocks_; }
  const std::vector<std::pair<std::string, Matrix>>& objective() const {
    return objective_;
  }

 private:
  const LmiVariable& find(const std::string& name) const;
  std::vector<LmiVariable> vars_;
  std::vector<BlockSpec> blocks_;
  std::vector<std::pair<std::string, Matrix>> objective_;
  int dim_ = 0;
};

struct SdpSettings {
  int max_iterations = 100;
  double feas_tol = 1e-7;
  double duality_tol = 1e-7;
  double strict_margin = 1e-9;  // scaled by (1 + ||data||)
  double step_fraction = 0.98;
  int max_total_scalars = 2000;
  int max_block_dim = 200;
};

enum class SdpStatus { Optimal, Infeasible, MaxIterations };

std::string to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::MaxIterations;
  Vector x;                  // packed decision variables
  double objective = 0.0;    // value of the maximized functional at x
  double dual_bound = 0.0;   // objective <= dual_bound + tol at Optimal
  double worst_violation = 0.0;  // min over blocks of lambda_min(block(x))
  int iterations = 0;
  std::string diagnostics;
};

/// Primal-dual interior point method with Nesterov-Todd scaling.
SdpSolution solve(const LmiProblem& problem, const SdpSettings& settings = {});

struct FeasibilityCheck {
  bool feasible = false;
  Vector witness;  // packed variables achieving the reported margin
  double margin = 0.0;
};

/// Phase-1 style check: maximizes the common slack margin over all blocks.
FeasibilityCheck check_feasible(const LmiProblem& problem,
                                const SdpSettings& settings = {});

/// Plain-text dump (dimension header plus row-major coefficient matrices).
void dump(const LmiProblem& problem, std::ostream& os);

}  // namespace sparsegain
