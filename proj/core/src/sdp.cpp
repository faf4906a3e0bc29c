#include "sparsegain/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>

namespace sparsegain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void unpack_into(const LmiVariable& v, const Vector& x, Matrix& out) {
  out.resize(v.rows, v.cols);
  switch (v.kind) {
    case VarKind::Scalar:
      out(0, 0) = x[v.offset];
      break;
    case VarKind::Symmetric: {
      int k = v.offset;
      for (int i = 0; i < v.rows; ++i)
        for (int j = i; j < v.cols; ++j, ++k) {
          out(i, j) = x[k];
          out(j, i) = x[k];
        }
      break;
    }
    case VarKind::Rectangular: {
      int k = v.offset;
      for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j, ++k) out(i, j) = x[k];
      break;
    }
  }
}

}  // namespace

const LmiVariable& VariableView::find(const std::string& name) const {
  for (const auto& v : *vars_)
    if (v.name == name) return v;
  throw DimensionMismatch("unknown LMI variable '" + name + "'");
}

double VariableView::scalar(const std::string& name) const {
  const auto& v = find(name);
  require(v.kind == VarKind::Scalar, "variable '" + name + "' is not scalar");
  return (*x_)[v.offset];
}

Matrix VariableView::matrix(const std::string& name) const {
  const auto& v = find(name);
  Matrix out;
  unpack_into(v, *x_, out);
  return out;
}

const LmiVariable& LmiProblem::find(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return v;
  throw DimensionMismatch("unknown LMI variable '" + name + "'");
}

void LmiProblem::add_scalar(const std::string& name) {
  vars_.push_back({name, VarKind::Scalar, 1, 1, dim_});
  dim_ += 1;
}

void LmiProblem::add_symmetric(const std::string& name, int n) {
  require(n > 0, "add_symmetric: dimension must be positive");
  vars_.push_back({name, VarKind::Symmetric, n, n, dim_});
  dim_ += vars_.back().size();
}

void LmiProblem::add_rectangular(const std::string& name, int rows, int cols) {
  require(rows > 0 && cols > 0, "add_rectangular: dimensions must be positive");
  vars_.push_back({name, VarKind::Rectangular, rows, cols, dim_});
  dim_ += vars_.back().size();
}

void LmiProblem::maximize(const std::string& name, double weight) {
  const auto& v = find(name);
  require(v.kind == VarKind::Scalar,
          "maximize(name, double) needs a scalar variable");
  objective_.emplace_back(name, Matrix::Constant(1, 1, weight));
}

void LmiProblem::maximize(const std::string& name, const Matrix& weight) {
  const auto& v = find(name);
  require(weight.rows() == v.rows && weight.cols() == v.cols,
          "maximize: weight shape mismatch for '" + name + "'");
  objective_.emplace_back(name, weight);
}

void LmiProblem::require_psd(const std::string& label, int dim,
                             std::function<Matrix(const VariableView&)> expr,
                             bool strict) {
  require(dim > 0, "require_psd: block dimension must be positive");
  blocks_.push_back({label, dim, std::move(expr), strict});
}

void LmiProblem::require_nonneg(
    const std::string& label,
    std::function<double(const VariableView&)> expr) {
  auto wrapped = [fn = std::move(expr)](const VariableView& v) {
    return Matrix::Constant(1, 1, fn(v));
  };
  blocks_.push_back({label, 1, std::move(wrapped), false});
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::Infeasible: return "Infeasible";
    case SdpStatus::MaxIterations: return "MaxIterations";
  }
  return "?";
}

namespace {

// Coefficient form of one PSD block: F0 + sum_i x_i F_i >= 0.
struct CompiledBlock {
  std::string label;
  int dim = 0;
  Matrix f0;
  std::vector<int> support;    // variable indices with nonzero coefficient
  std::vector<Matrix> coeff;   // parallel to support
};

struct Compiled {
  int nvars = 0;
  Vector c;  // maximize c^T x
  std::vector<CompiledBlock> blocks;
  double data_norm = 0.0;
};

Matrix symmetrized(const Matrix& m, const std::string& label) {
  const double skew = (m - m.transpose()).norm();
  if (!(skew <= 1e-10 * (1.0 + m.norm())))
    throw Error("LMI block '" + label + "' is not symmetric (skew " +
                std::to_string(skew) + ")");
  return 0.5 * (m + m.transpose());
}

Compiled compile(const LmiProblem& p, const SdpSettings& settings) {
  Compiled out;
  out.nvars = p.scalar_dimension();
  require(out.nvars > 0, "LMI problem has no decision variables");
  require(out.nvars <= settings.max_total_scalars,
          "LMI problem exceeds the scalar decision dimension cap");
  require(!p.blocks().empty(), "LMI problem has no constraints");

  // Objective from declared weights.
  out.c = Vector::Zero(out.nvars);
  for (const auto& [name, w] : p.objective()) {
    for (const auto& v : p.variables()) {
      if (v.name != name) continue;
      int k = v.offset;
      switch (v.kind) {
        case VarKind::Scalar:
          out.c[k] += w(0, 0);
          break;
        case VarKind::Symmetric:
          for (int i = 0; i < v.rows; ++i)
            for (int j = i; j < v.cols; ++j, ++k)
              out.c[k] += (i == j) ? w(i, i) : w(i, j) + w(j, i);
          break;
        case VarKind::Rectangular:
          for (int i = 0; i < v.rows; ++i)
            for (int j = 0; j < v.cols; ++j, ++k) out.c[k] += w(i, j);
          break;
      }
    }
  }

  // Sample every affine block into coefficient form.
  Vector zero = Vector::Zero(out.nvars);
  Vector probe(out.nvars);
  for (int i = 0; i < out.nvars; ++i) probe[i] = 0.3 * std::sin(i + 1.0) + 0.1;

  for (const auto& b : p.blocks()) {
    require(b.dim <= settings.max_block_dim,
            "LMI block '" + b.label + "' exceeds the block dimension cap");
    CompiledBlock cb;
    cb.label = b.label;
    cb.dim = b.dim;
    Matrix f0 = symmetrized(b.expr(p.view(zero)), b.label);
    require(f0.rows() == b.dim && f0.cols() == b.dim,
            "LMI block '" + b.label + "' has wrong dimensions");
    double bnorm = f0.norm();
    Matrix probe_sum = f0;
    Vector e = Vector::Zero(out.nvars);
    for (int i = 0; i < out.nvars; ++i) {
      e[i] = 1.0;
      Matrix fi = symmetrized(b.expr(p.view(e)), b.label) - f0;
      e[i] = 0.0;
      if (fi.norm() > 0.0) {
        cb.support.push_back(i);
        cb.coeff.push_back(fi);
        bnorm = std::max(bnorm, fi.norm());
        probe_sum += probe[i] * fi;
      }
    }
    // Affinity guard: a quadratic expression would slip through coefficient
    // sampling silently, so compare against one generic point.
    Matrix at_probe = symmetrized(b.expr(p.view(probe)), b.label);
    if (!((at_probe - probe_sum).norm() <= 1e-8 * (1.0 + at_probe.norm())))
      throw Error("LMI block '" + b.label + "' is not affine in the variables");
    cb.f0 = f0;
    out.data_norm = std::max(out.data_norm, bnorm);
    out.blocks.push_back(std::move(cb));
  }

  // Strict blocks shrink by a data-scaled margin after norms are known.
  for (size_t k = 0; k < out.blocks.size(); ++k) {
    if (p.blocks()[k].strict) {
      const double margin = settings.strict_margin * (1.0 + out.data_norm);
      out.blocks[k].f0 -=
          margin * Matrix::Identity(out.blocks[k].dim, out.blocks[k].dim);
    }
  }
  return out;
}

// Largest alpha with X + alpha*D still PSD (X assumed PD).
double step_length(const Matrix& x, const Matrix& d) {
  Eigen::LLT<Matrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Matrix l = llt.matrixL();
  Matrix t = l.triangularView<Eigen::Lower>().solve(d);
  Matrix tt = t.transpose();
  t = l.triangularView<Eigen::Lower>().solve(tt);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (t + t.transpose()),
                                           Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= -1e-14 ? kInf : -1.0 / lmin;
}

Matrix sym_sqrt(const Matrix& m, bool inverse) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  // Relative floor: keeps the scaling finite when an iterate grazes the
  // cone boundary.
  const double floor = std::max(es.eigenvalues().maxCoeff(), 1e-300) * 1e-14;
  Vector ev = es.eigenvalues().cwiseMax(floor);
  Vector d(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    d[i] = inverse ? 1.0 / std::sqrt(ev[i]) : std::sqrt(ev[i]);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// Pulls a numerically indefinite iterate back inside the cone.
bool restore_cone(Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmax <= 0.0) return false;
  if (lmin <= 0.0)
    m.diagonal().array() += -lmin + 1e-12 * lmax;
  return true;
}

struct IpmState {
  std::vector<Matrix> x, s;
  Vector y;
};

SdpSolution run_ipm(const Compiled& prob, const SdpSettings& settings) {
  const int nv = prob.nvars;
  const int nb = static_cast<int>(prob.blocks.size());
  double ntot = 0.0;
  for (const auto& b : prob.blocks) ntot += b.dim;

  IpmState st;
  st.y = Vector::Zero(nv);
  for (const auto& b : prob.blocks) {
    const double eta = 1.0 + b.f0.norm();
    st.x.push_back(eta * Matrix::Identity(b.dim, b.dim));
    st.s.push_back(eta * Matrix::Identity(b.dim, b.dim));
  }

  SdpSolution best;
  double best_merit = kInf;
  const double cnorm = 1.0 + prob.c.norm();
  const double dscale = 1.0 + prob.data_norm;

  auto record = [&](int iter, double pinf, double dinf, double relgap) {
    const double merit = std::max({pinf, dinf, relgap});
    if (merit < best_merit) {
      best_merit = merit;
      best.x = st.y;
      best.iterations = iter;
      best.objective = prob.c.dot(st.y);
      double pobj = 0.0;
      for (int j = 0; j < nb; ++j)
        pobj += prob.blocks[j].f0.cwiseProduct(st.x[j]).sum();
      best.dual_bound = pobj;
    }
  };

  std::vector<Matrix> rd(nb), w(nb), sinv(nb);
  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    // Residuals.
    Vector rp = -prob.c;
    for (int j = 0; j < nb; ++j) {
      const auto& b = prob.blocks[j];
      Matrix sy = b.f0;
      for (size_t t = 0; t < b.support.size(); ++t)
        sy += st.y[b.support[t]] * b.coeff[t];
      rd[j] = sy - st.s[j];
      for (size_t t = 0; t < b.support.size(); ++t)
        rp[b.support[t]] -= b.coeff[t].cwiseProduct(st.x[j]).sum();
    }
    double gap = 0.0, pobj = 0.0;
    for (int j = 0; j < nb; ++j) {
      gap += st.x[j].cwiseProduct(st.s[j]).sum();
      pobj += prob.blocks[j].f0.cwiseProduct(st.x[j]).sum();
    }
    const double dobj = prob.c.dot(st.y);
    const double pinf = rp.norm() / cnorm;
    double dinf = 0.0;
    for (int j = 0; j < nb; ++j) dinf = std::max(dinf, rd[j].norm());
    dinf /= dscale;
    const double relgap =
        std::abs(gap) / (1.0 + std::abs(pobj) + std::abs(dobj));

    record(iter, pinf, dinf, relgap);
    if (std::getenv("SPARSEGAIN_SDP_TRACE"))
      std::fprintf(stderr,
                   "ipm %3d pinf %.3e dinf %.3e gap %.3e mu %.3e obj %.6f\n",
                   iter, pinf, dinf, relgap, gap / ntot, dobj);
    if (pinf <= settings.feas_tol && dinf <= settings.feas_tol &&
        relgap <= settings.duality_tol) {
      best.status = SdpStatus::Optimal;
      best.x = st.y;
      best.objective = dobj;
      best.dual_bound = pobj;
      best.iterations = iter;
      return best;
    }
    double magnitude = st.y.norm();
    for (int j = 0; j < nb; ++j)
      magnitude = std::max({magnitude, st.x[j].norm(), st.s[j].norm()});
    if (!std::isfinite(magnitude) || magnitude > 1e14 * dscale) {
      best.diagnostics = "iterates diverged (problem may be unbounded)";
      break;
    }

    const double mu = gap / ntot;

    // Nesterov-Todd scaling point per block.
    bool breakdown = false;
    for (int j = 0; j < nb; ++j) {
      if (!restore_cone(st.x[j]) || !restore_cone(st.s[j])) {
        breakdown = true;
        break;
      }
      Matrix xh = sym_sqrt(st.x[j], false);
      Matrix mid = sym_sqrt(xh * st.s[j] * xh, true);
      w[j] = xh * mid * xh;
      Eigen::LLT<Matrix> slt(st.s[j]);
      if (slt.info() != Eigen::Success) {
        breakdown = true;
        break;
      }
      sinv[j] = slt.solve(Matrix::Identity(prob.blocks[j].dim,
                                           prob.blocks[j].dim));
    }
    if (breakdown) {
      best.diagnostics = "scaling breakdown (iterate left the cone)";
      break;
    }

    // Schur complement M_ik = sum_j <F_ji, W_j F_jk W_j>.
    Matrix m = Matrix::Zero(nv, nv);
    std::vector<std::vector<Matrix>> wfw(nb);
    for (int j = 0; j < nb; ++j) {
      const auto& b = prob.blocks[j];
      wfw[j].resize(b.support.size());
      for (size_t t = 0; t < b.support.size(); ++t)
        wfw[j][t] = w[j] * b.coeff[t] * w[j];
      for (size_t t = 0; t < b.support.size(); ++t)
        for (size_t u = t; u < b.support.size(); ++u) {
          const double v = b.coeff[t].cwiseProduct(wfw[j][u]).sum();
          m(b.support[t], b.support[u]) += v;
          if (t != u) m(b.support[u], b.support[t]) += v;
        }
    }
    m.diagonal().array() += 1e-13 * (1.0 + m.trace() / nv);
    Eigen::LDLT<Matrix> mfac(m);
    if (mfac.info() != Eigen::Success) {
      best.diagnostics = "Schur complement factorization failed";
      break;
    }

    auto newton_step = [&](double sigma, Vector& dy, std::vector<Matrix>& dx,
                 std::vector<Matrix>& ds) {
      Vector d = -rp;
      for (int j = 0; j < nb; ++j) {
        const auto& b = prob.blocks[j];
        Matrix e = -st.x[j];
        if (sigma > 0.0) e += sigma * mu * sinv[j];
        Matrix g = e - w[j] * rd[j] * w[j];
        for (size_t t = 0; t < b.support.size(); ++t)
          d[b.support[t]] += b.coeff[t].cwiseProduct(g).sum();
      }
      dy = mfac.solve(d);
      dx.resize(nb);
      ds.resize(nb);
      for (int j = 0; j < nb; ++j) {
        const auto& b = prob.blocks[j];
        ds[j] = rd[j];
        for (size_t t = 0; t < b.support.size(); ++t)
          ds[j] += dy[b.support[t]] * b.coeff[t];
        Matrix e = -st.x[j];
        if (sigma > 0.0) e += sigma * mu * sinv[j];
        dx[j] = e - w[j] * ds[j] * w[j];
        dx[j] = (0.5 * (dx[j] + dx[j].transpose())).eval();
      }
    };

    // Predictor fixes the centering weight, corrector takes the step.
    Vector dy;
    std::vector<Matrix> dx, ds;
    newton_step(0.0, dy, dx, ds);
    double alpha_aff = 1.0;
    for (int j = 0; j < nb; ++j) {
      alpha_aff = std::min(alpha_aff, step_length(st.x[j], dx[j]));
      alpha_aff = std::min(alpha_aff, step_length(st.s[j], ds[j]));
    }
    double gap_aff = 0.0;
    for (int j = 0; j < nb; ++j)
      gap_aff += (st.x[j] + alpha_aff * dx[j])
                     .cwiseProduct(st.s[j] + alpha_aff * ds[j])
                     .sum();
    gap_aff = std::max(gap_aff, 0.0);
    double sigma = std::pow(gap_aff / std::max(gap, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-6, 0.99);

    newton_step(sigma, dy, dx, ds);
    double ap = 1.0, ad = 1.0;
    for (int j = 0; j < nb; ++j) {
      ap = std::min(ap, settings.step_fraction * step_length(st.x[j], dx[j]));
      ad = std::min(ad, settings.step_fraction * step_length(st.s[j], ds[j]));
    }
    if (std::getenv("SPARSEGAIN_SDP_TRACE")) {
      double xmin = kInf, smin = kInf;
      for (int j = 0; j < nb; ++j) {
        Eigen::SelfAdjointEigenSolver<Matrix> ex(st.x[j], Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Matrix> es2(st.s[j], Eigen::EigenvaluesOnly);
        xmin = std::min(xmin, ex.eigenvalues().minCoeff());
        smin = std::min(smin, es2.eigenvalues().minCoeff());
      }
      std::fprintf(stderr,
                   "    aff %.3e sigma %.3e ap %.3e ad %.3e xmin %.3e smin %.3e dxn %.3e\n",
                   alpha_aff, sigma, ap, ad, xmin, smin, dx[0].norm());
    }
    if (ap <= 1e-12 && ad <= 1e-12) {
      best.diagnostics = "step length collapsed";
      break;
    }
    for (int j = 0; j < nb; ++j) {
      st.x[j] += ap * dx[j];
      st.x[j] = (0.5 * (st.x[j] + st.x[j].transpose())).eval();
      st.s[j] += ad * ds[j];
      st.s[j] = (0.5 * (st.s[j] + st.s[j].transpose())).eval();
    }
    st.y += ad * dy;
  }

  best.status = SdpStatus::MaxIterations;
  if (best.diagnostics.empty())
    best.diagnostics = "no convergence within the iteration budget";
  return best;
}

double worst_block_violation(const Compiled& prob, const Vector& x) {
  double worst = kInf;
  for (const auto& b : prob.blocks) {
    Matrix s = b.f0;
    for (size_t t = 0; t < b.support.size(); ++t)
      s += x[b.support[t]] * b.coeff[t];
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  return worst;
}

// Phase-1: maximize the common slack t over all blocks (t bounded above so
// the subproblem is always solvable).
Compiled make_phase1(const Compiled& prob) {
  Compiled ph = prob;
  const int t_index = ph.nvars;
  ph.nvars += 1;
  ph.c = Vector::Zero(ph.nvars);
  ph.c[t_index] = 1.0;
  for (auto& b : ph.blocks) {
    b.support.push_back(t_index);
    b.coeff.push_back(-Matrix::Identity(b.dim, b.dim));
  }
  CompiledBlock cap;
  cap.label = "phase1-cap";
  cap.dim = 1;
  cap.f0 = Matrix::Constant(1, 1, 1.0 + prob.data_norm);
  cap.support = {t_index};
  cap.coeff = {-Matrix::Identity(1, 1)};
  ph.blocks.push_back(std::move(cap));
  return ph;
}

}  // namespace

SdpSolution solve(const LmiProblem& problem, const SdpSettings& settings) {
  Compiled prob = compile(problem, settings);
  SdpSolution sol = run_ipm(prob, settings);
  sol.worst_violation = worst_block_violation(prob, sol.x);
  if (sol.status == SdpStatus::Optimal) return sol;

  // Distinguish "hard problem" from "no strictly feasible point".
  Compiled ph = make_phase1(prob);
  SdpSolution p1 = run_ipm(ph, settings);
  if (p1.status == SdpStatus::Optimal &&
      p1.objective < settings.strict_margin * (1.0 + prob.data_norm)) {
    sol.status = SdpStatus::Infeasible;
    sol.diagnostics = "phase-1 margin " + std::to_string(p1.objective);
  }
  return sol;
}

FeasibilityCheck check_feasible(const LmiProblem& problem,
                                const SdpSettings& settings) {
  Compiled prob = compile(problem, settings);
  Compiled ph = make_phase1(prob);
  SdpSolution sol = run_ipm(ph, settings);
  if (sol.status != SdpStatus::Optimal)
    throw SdpFailure("check_feasible: phase-1 did not converge (" +
                     sol.diagnostics + ")");
  FeasibilityCheck out;
  out.margin = sol.objective;
  out.witness = sol.x.head(prob.nvars);
  out.feasible =
      sol.objective >= settings.strict_margin * (1.0 + prob.data_norm);
  return out;
}

void dump(const LmiProblem& problem, std::ostream& os) {
  SdpSettings settings;
  settings.max_total_scalars = std::numeric_limits<int>::max();
  settings.max_block_dim = std::numeric_limits<int>::max();
  Compiled prob = compile(problem, settings);
  os << "lmi-problem vars " << prob.nvars << " blocks " << prob.blocks.size()
     << "\n";
  os << "objective";
  for (int i = 0; i < prob.nvars; ++i) os << ' ' << prob.c[i];
  os << "\n";
  for (const auto& b : prob.blocks) {
    os << "block " << b.label << " dim " << b.dim << " terms "
       << b.support.size() + 1 << "\n";
    auto put = [&](const Matrix& m) {
      for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j)
          os << (j ? " " : "") << m(i, j);
        os << "\n";
      }
    };
    os << "const\n";
    put(b.f0);
    for (size_t t = 0; t < b.support.size(); ++t) {
      os << "var " << b.support[t] << "\n";
      put(b.coeff[t]);
    }
  }
}

}  // namespace sparsegain
