#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "emgrid/qp.hpp"

namespace emgrid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Triplet = Eigen::Triplet<double>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using LdltNatural = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool same_values(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  for (int k = 0; k < a.outerSize(); ++k) {
    SparseMatrix::InnerIterator ia(a, k), ib(b, k);
    for (; ia && ib; ++ia, ++ib) {
      if (ia.index() != ib.index() || ia.value() != ib.value()) return false;
    }
    if (ia || ib) return false;
  }
  return true;
}

}  // namespace

double QuadProgram::objective(const Vector& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + constant;
}

double QuadCap::value(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + constant; }

void validate(const QuadProgram& qp) {
  const int n = qp.num_vars();
  if (qp.P.rows() != n || qp.P.cols() != n) throw std::invalid_argument("P has wrong dimensions");
  if (qp.lower.size() != n || qp.upper.size() != n) {
    throw std::invalid_argument("bound vectors have wrong dimensions");
  }
  if (qp.A_eq.cols() != n || qp.A_eq.rows() != qp.num_eq()) {
    throw std::invalid_argument("A_eq has wrong dimensions");
  }
  for (int i = 0; i < n; ++i) {
    if (qp.lower[i] > qp.upper[i]) {
      throw std::invalid_argument("lower bound exceeds upper bound at variable " + std::to_string(i));
    }
  }
  SparseMatrix Pt = qp.P.transpose();
  if (SparseMatrix(SparseMatrix(Pt - qp.P).pruned(1e-12, 1.0)).nonZeros() != 0) {
    throw std::invalid_argument("P is not symmetric");
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  const double scale = 1.0 + (qp.P.nonZeros() ? qp.P.coeffs().cwiseAbs().maxCoeff() : 0.0);
  for (int probe = 0; probe < 16; ++probe) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    if (v.dot(qp.P * v) < -1e-10 * scale * v.squaredNorm()) {
      throw std::invalid_argument("P is not positive semidefinite");
    }
  }
}

std::string to_string(SolveStatus::Code code) {
  switch (code) {
    case SolveStatus::Code::optimal: return "optimal";
    case SolveStatus::Code::infeasible: return "infeasible";
    case SolveStatus::Code::max_iterations: return "max-iterations";
  }
  return "unknown";
}

double KktResiduals::max() const { return std::max({primal, dual, complementarity}); }

KktResiduals kkt_residuals(const QuadProgram& qp, const Vector& x, const Vector& y_eq,
                           const Vector& y_box) {
  KktResiduals r;
  const Vector ax = qp.A_eq * x;
  double viol = qp.num_eq() ? inf_norm(ax - qp.b_eq) : 0.0;
  for (int i = 0; i < x.size(); ++i) {
    viol = std::max({viol, qp.lower[i] - x[i], x[i] - qp.upper[i]});
  }
  const double pscale = std::max({inf_norm(ax), inf_norm(qp.b_eq), inf_norm(x)});
  r.primal = viol / (1.0 + pscale);

  const Vector px = qp.P * x;
  const Vector aty = qp.A_eq.transpose() * y_eq;
  const Vector stat = px + qp.q + aty + y_box;
  const double dscale =
      std::max({inf_norm(px), inf_norm(qp.q), inf_norm(aty), inf_norm(y_box)});
  r.dual = inf_norm(stat) / (1.0 + dscale);

  double comp = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double y = y_box[i];
    if (y > 0.0) comp = std::max(comp, y * std::min(qp.upper[i] - x[i], 1.0));
    if (y < 0.0) comp = std::max(comp, -y * std::min(x[i] - qp.lower[i], 1.0));
  }
  r.complementarity = comp / (1.0 + inf_norm(y_box));
  return r;
}

// ---------------------------------------------------------------------------
// Workspace: scaled problem data and factorisations.
// Scaled problem: Pbar = c D P D, qbar = c D q, Abar = E A D over the stacked
// constraint rows [A_eq; I_box], x = D xbar, z = E^-1 zbar, y = E ybar / c.

struct QpSolver::Workspace {
  int n = 0;
  int m_eq = 0;
  std::vector<int> box_var;  // variable of each box row
  SparseMatrix P_src, A_src;  // unscaled inputs for cache comparison
  Vector box_pattern;         // finiteness of bounds, for cache comparison

  SparseMatrix P;      // scaled
  SparseMatrix A;      // scaled stacked rows
  SparseMatrix A_eq;   // scaled equality rows
  Vector D, E;         // E spans all stacked rows
  double c = 1.0;

  Vector rho;
  double rho_base = 0.1;
  std::vector<bool> eq_row;
  Ldlt kkt;
  // elimination rank of every variable and equality row in the full
  // [P A'; A 0] system; reduced polish systems inherit it
  std::vector<int> polish_order;
  bool analyzed = false;  // the KKT pattern does not depend on rho
  bool factored = false;

  int rows() const { return m_eq + static_cast<int>(box_var.size()); }
};

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}
QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

namespace {

Vector box_pattern_of(const QuadProgram& qp) {
  Vector pat(qp.num_vars());
  for (int i = 0; i < qp.num_vars(); ++i) {
    pat[i] = (std::isfinite(qp.lower[i]) ? 1.0 : 0.0) + (std::isfinite(qp.upper[i]) ? 2.0 : 0.0);
  }
  return pat;
}

SparseMatrix stacked_rows(const SparseMatrix& A_eq, const std::vector<int>& box_var, int n) {
  std::vector<Triplet> t;
  t.reserve(A_eq.nonZeros() + box_var.size());
  for (int k = 0; k < A_eq.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A_eq, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  const int m_eq = static_cast<int>(A_eq.rows());
  for (size_t r = 0; r < box_var.size(); ++r) t.emplace_back(m_eq + static_cast<int>(r), box_var[r], 1.0);
  SparseMatrix A(m_eq + static_cast<int>(box_var.size()), n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

Vector col_inf_norms(const SparseMatrix& M) {
  Vector out = Vector::Zero(M.cols());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) out[k] = std::max(out[k], std::abs(it.value()));
  }
  return out;
}

Vector row_inf_norms(const SparseMatrix& M) {
  Vector out = Vector::Zero(M.rows());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
    }
  }
  return out;
}

double clip_norm(double v) {
  if (v < 1e-4) return 1.0;
  return std::min(v, 1e4);
}

// Builds [P + sigma I, A'; A, -diag(1/rho)] (lower triangle).
SparseMatrix admm_kkt(const SparseMatrix& P, const SparseMatrix& A, double sigma, const Vector& rho) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(A.rows());
  std::vector<Triplet> t;
  t.reserve(P.nonZeros() + A.nonZeros() + n + m);
  for (int k = 0; k < P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(P, k); it; ++it) {
      if (it.row() >= it.col()) t.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, sigma);
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) t.emplace_back(n + it.row(), it.col(), it.value());
  }
  for (int r = 0; r < m; ++r) t.emplace_back(n + r, n + r, -1.0 / rho[r]);
  SparseMatrix K(n + m, n + m);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

struct PolishResult {
  bool ok = false;
  Vector x, y_eq, y_box;
  KktResiduals kkt;
};

}  // namespace

// ---------------------------------------------------------------------------

namespace {

void setup_workspace(QpSolver::Workspace& ws, const QuadProgram& qp, const QpSettings& s);

}  // namespace

namespace detail {

// Active-set refinement on the scaled problem. `lower_active`/`upper_active`
// hold the initial guess; fixed variables (lower == upper) are always active.
PolishResult polish(const QpSolver::Workspace& ws, const QuadProgram& qp, const Vector& qbar,
                    std::vector<signed char> state, double tol);

}  // namespace detail

namespace {

void setup_workspace(QpSolver::Workspace& ws, const QuadProgram& qp, const QpSettings& s) {
  ws.n = qp.num_vars();
  ws.m_eq = qp.num_eq();
  ws.P_src = qp.P;
  ws.A_src = qp.A_eq;
  ws.box_pattern = box_pattern_of(qp);
  ws.box_var.clear();
  for (int i = 0; i < ws.n; ++i) {
    if (std::isfinite(qp.lower[i]) || std::isfinite(qp.upper[i])) ws.box_var.push_back(i);
  }

  SparseMatrix P = qp.P;
  SparseMatrix A = stacked_rows(qp.A_eq, ws.box_var, ws.n);
  const int m = static_cast<int>(A.rows());
  ws.D = Vector::Ones(ws.n);
  ws.E = Vector::Ones(m);
  ws.c = 1.0;
  Vector q = qp.q;
  for (int it = 0; it < s.scaling_iters; ++it) {
    Vector dcol = col_inf_norms(P).cwiseMax(col_inf_norms(A));
    Vector erow = row_inf_norms(A);
    for (int i = 0; i < ws.n; ++i) dcol[i] = 1.0 / std::sqrt(clip_norm(dcol[i]));
    for (int r = 0; r < m; ++r) erow[r] = 1.0 / std::sqrt(clip_norm(erow[r]));
    P = dcol.asDiagonal() * P * dcol.asDiagonal();
    A = erow.asDiagonal() * A * dcol.asDiagonal();
    q = dcol.asDiagonal() * q;
    ws.D = ws.D.cwiseProduct(dcol);
    ws.E = ws.E.cwiseProduct(erow);

    const Vector pc = col_inf_norms(P);
    double cost = std::max(ws.n ? pc.mean() : 0.0, inf_norm(q));
    cost = 1.0 / clip_norm(cost);
    P *= cost;
    q *= cost;
    ws.c *= cost;
  }
  ws.P = P;
  ws.A = A;
  ws.A_eq = A.topRows(ws.m_eq);
  ws.rho_base = s.rho;
  {
    std::vector<Triplet> t;
    for (int k = 0; k < ws.P.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(ws.P, k); it; ++it) t.emplace_back(it.row(), it.col(), 1.0);
    for (int k = 0; k < ws.A_eq.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(ws.A_eq, k); it; ++it) {
        t.emplace_back(ws.n + it.row(), k, 1.0);
        t.emplace_back(k, ws.n + it.row(), 1.0);
      }
    const int dim = ws.n + ws.m_eq;
    for (int i = 0; i < dim; ++i) t.emplace_back(i, i, 1.0);
    SparseMatrix K(dim, dim);
    K.setFromTriplets(t.begin(), t.end());
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    Eigen::AMDOrdering<int>()(K, pinv);
    ws.polish_order.assign(pinv.indices().data(), pinv.indices().data() + dim);
  }
  ws.analyzed = false;
  ws.factored = false;
}

}  // namespace

namespace detail {

PolishResult polish(const QpSolver::Workspace& ws, const QuadProgram& qp, const Vector& qbar,
                    std::vector<signed char> state, double tol) {
  // state: 0 free, -1 at lower, +1 at upper, 2 fixed (lower == upper)
  const int n = ws.n;
  Vector lb(n), ub(n);
  for (int i = 0; i < n; ++i) {
    lb[i] = qp.lower[i] / ws.D[i];
    ub[i] = qp.upper[i] / ws.D[i];
  }
  const Vector Eeq = ws.E.head(ws.m_eq);
  const Vector beq = Eeq.cwiseProduct(qp.b_eq);
  const SparseMatrix AeqT = ws.A_eq.transpose();
  constexpr double delta = 1e-7;

  PolishResult out;
  for (int round = 0; round < 12; ++round) {
    std::vector<int> free_index(n, -1);
    std::vector<int> free_vars;
    Vector xfix = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) {
        free_index[i] = static_cast<int>(free_vars.size());
        free_vars.push_back(i);
      } else {
        xfix[i] = state[i] == 1 ? ub[i] : lb[i];
      }
    }
    const int nf = static_cast<int>(free_vars.size());
    // equality rows touching at least one free variable
    std::vector<int> row_index(ws.m_eq, -1);
    std::vector<int> rows;
    for (int k = 0; k < ws.A_eq.outerSize(); ++k) {
      if (free_index[k] < 0) continue;
      for (SparseMatrix::InnerIterator it(ws.A_eq, k); it; ++it) {
        if (row_index[it.row()] < 0 && it.value() != 0.0) {
          row_index[it.row()] = 0;
        }
      }
    }
    for (int r = 0; r < ws.m_eq; ++r) {
      if (row_index[r] == 0) {
        row_index[r] = static_cast<int>(rows.size());
        rows.push_back(r);
      }
    }
    const int mr = static_cast<int>(rows.size());
    const int dim = nf + mr;

    // reduced index -> position in elimination order
    std::vector<int> pos(dim);
    {
      int next = 0;
      for (int full : ws.polish_order) {
        int i = -1;
        if (full < n) i = free_index[full];
        else if (row_index[full - n] >= 0) i = nf + row_index[full - n];
        if (i >= 0) pos[i] = next++;
      }
    }
    auto lower = [](std::vector<Triplet>& t, int r, int c, double v) {
      if (r >= c) t.emplace_back(r, c, v);
      else t.emplace_back(c, r, v);
    };

    std::vector<Triplet> t0;  // reduced KKT, permuted, lower triangle
    for (int k = 0; k < ws.P.outerSize(); ++k) {
      const int fk = free_index[k];
      if (fk < 0) continue;
      for (SparseMatrix::InnerIterator it(ws.P, k); it; ++it) {
        const int fr = free_index[it.row()];
        if (fr >= 0 && fr >= fk) lower(t0, pos[fr], pos[fk], it.value());
      }
    }
    for (int k = 0; k < ws.A_eq.outerSize(); ++k) {
      const int fk = free_index[k];
      if (fk < 0) continue;
      for (SparseMatrix::InnerIterator it(ws.A_eq, k); it; ++it) {
        const int rr = row_index[it.row()];
        if (rr >= 0) lower(t0, pos[nf + rr], pos[fk], it.value());
      }
    }
    Vector reg(dim);
    for (int i = 0; i < nf; ++i) reg[pos[i]] = delta;
    for (int r = 0; r < mr; ++r) reg[pos[nf + r]] = -delta;
    for (int i = 0; i < dim; ++i) t0.emplace_back(i, i, reg[i]);
    SparseMatrix Kd(dim, dim);
    Kd.setFromTriplets(t0.begin(), t0.end());
    LdltNatural ldlt(Kd);
    if (ldlt.info() != Eigen::Success) return out;

    const Vector pfix = ws.P * xfix;
    const Vector afix = ws.A_eq * xfix;
    Vector rhs(dim);
    for (int i = 0; i < nf; ++i) rhs[pos[i]] = -qbar[free_vars[i]] - pfix[free_vars[i]];
    for (int r = 0; r < mr; ++r) rhs[pos[nf + r]] = beq[rows[r]] - afix[rows[r]];

    Vector psol = ldlt.solve(rhs);
    for (int ref = 0; ref < 25; ++ref) {
      // residual of the unregularised system
      const Vector res = rhs - Kd.selfadjointView<Eigen::Lower>() * psol + reg.cwiseProduct(psol);
      if (inf_norm(res) <= 1e-14 * (1.0 + inf_norm(rhs))) break;
      psol += ldlt.solve(res);
    }
    Vector sol(dim);
    for (int i = 0; i < dim; ++i) sol[i] = psol[pos[i]];

    Vector x = xfix;
    for (int i = 0; i < nf; ++i) x[free_vars[i]] = sol[i];
    Vector yeq = Vector::Zero(ws.m_eq);
    for (int r = 0; r < mr; ++r) yeq[rows[r]] = sol[nf + r];
    Vector w = -(ws.P * x + qbar + AeqT * yeq);  // multipliers of the bounds
    for (int i : free_vars) w[i] = 0.0;

    const double wscale = 1e-9 * (1.0 + inf_norm(w));
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) {
        const double slack = 1e-11 * (1.0 + std::abs(x[i]));
        if (x[i] < lb[i] - slack) {
          state[i] = -1;
          changed = true;
        } else if (x[i] > ub[i] + slack) {
          state[i] = 1;
          changed = true;
        }
      } else if (state[i] == -1 && w[i] > wscale) {
        state[i] = 0;
        changed = true;
      } else if (state[i] == 1 && w[i] < -wscale) {
        state[i] = 0;
        changed = true;
      }
    }
    if (changed) continue;

    for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], lb[i], ub[i]);
    out.x = ws.D.cwiseProduct(x);
    out.y_eq = Eeq.cwiseProduct(yeq) / ws.c;
    out.y_box = w.cwiseQuotient(ws.D) / ws.c;
    out.kkt = kkt_residuals(qp, out.x, out.y_eq, out.y_box);
    out.ok = out.kkt.max() <= tol;
    return out;
  }
  return out;
}

}  // namespace detail

QpSolution QpSolver::solve(const QuadProgram& qp, const WarmStart* warm) {
  const QpSettings& s = settings_;
  const int n = qp.num_vars();
  if (!ws_) ws_ = std::make_unique<Workspace>();
  Workspace& ws = *ws_;
  const bool reuse = ws.n == n && ws.m_eq == qp.num_eq() && ws.box_pattern.size() == n &&
                     ws.box_pattern == box_pattern_of(qp) && same_values(ws.P_src, qp.P) &&
                     same_values(ws.A_src, qp.A_eq);
  if (!reuse) setup_workspace(ws, qp, s);

  const int m = ws.rows();
  Vector l(m), u(m);
  for (int r = 0; r < ws.m_eq; ++r) l[r] = u[r] = qp.b_eq[r];
  for (size_t r = 0; r < ws.box_var.size(); ++r) {
    l[ws.m_eq + r] = qp.lower[ws.box_var[r]];
    u[ws.m_eq + r] = qp.upper[ws.box_var[r]];
  }
  const Vector lbar = ws.E.cwiseProduct(l);
  const Vector ubar = ws.E.cwiseProduct(u);
  const Vector qbar = ws.c * ws.D.cwiseProduct(qp.q);

  std::vector<bool> eq_row(m);
  for (int r = 0; r < m; ++r) eq_row[r] = l[r] == u[r];
  auto refactor = [&](double rho_base) {
    ws.rho_base = rho_base;
    ws.rho.resize(m);
    for (int r = 0; r < m; ++r) ws.rho[r] = eq_row[r] ? 1e3 * rho_base : rho_base;
    const SparseMatrix K = admm_kkt(ws.P, ws.A, s.sigma, ws.rho);
    if (!ws.analyzed) {
      ws.kkt.analyzePattern(K);
      ws.analyzed = true;
    }
    ws.kkt.factorize(K);
    ws.factored = ws.kkt.info() == Eigen::Success;
    ws.eq_row = eq_row;
  };

  Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
  if (warm != nullptr && warm->x.size() == n) {
    x = warm->x.cwiseQuotient(ws.D);
    if (warm->y_eq.size() == ws.m_eq && warm->y_box.size() == n) {
      for (int r = 0; r < ws.m_eq; ++r) y[r] = ws.c * warm->y_eq[r] / ws.E[r];
      for (size_t r = 0; r < ws.box_var.size(); ++r) {
        const int row = ws.m_eq + static_cast<int>(r);
        // box row entry is E_r D_i, so ybar_r = c * D_i * y_i / (E_r D_i)
        y[row] = ws.c * warm->y_box[ws.box_var[r]] / ws.E[row];
      }
    }
    z = (ws.A * x).cwiseMax(lbar).cwiseMin(ubar);
  }

  QpSolution sol;
  auto finish_from_iterate = [&](SolveStatus::Code code, int iters) {
    sol.x = ws.D.cwiseProduct(x);
    for (int i = 0; i < n; ++i) sol.x[i] = std::clamp(sol.x[i], qp.lower[i], qp.upper[i]);
    sol.y_eq = ws.E.head(ws.m_eq).cwiseProduct(y.head(ws.m_eq)) / ws.c;
    sol.y_box = Vector::Zero(n);
    for (size_t r = 0; r < ws.box_var.size(); ++r) {
      const int row = ws.m_eq + static_cast<int>(r);
      sol.y_box[ws.box_var[r]] = ws.E[row] * y[row] / ws.c;
    }
    const KktResiduals kkt = kkt_residuals(qp, sol.x, sol.y_eq, sol.y_box);
    sol.status.code = code;
    sol.status.iterations = iters;
    sol.status.primal_residual = kkt.primal;
    sol.status.dual_residual = std::max(kkt.dual, kkt.complementarity);
    sol.status.polished = false;
    sol.objective = qp.objective(sol.x);
  };

  auto polish_from = [&](std::vector<signed char> state, int iters) -> bool {
    PolishResult pr = detail::polish(ws, qp, qbar, std::move(state), s.tol);
    if (!pr.ok) return false;
    sol.x = pr.x;
    sol.y_eq = pr.y_eq;
    sol.y_box = pr.y_box;
    sol.status.code = SolveStatus::Code::optimal;
    sol.status.iterations = iters;
    sol.status.primal_residual = pr.kkt.primal;
    sol.status.dual_residual = std::max(pr.kkt.dual, pr.kkt.complementarity);
    sol.status.polished = true;
    sol.objective = qp.objective(sol.x);
    return true;
  };

  auto try_polish = [&](int iters) -> bool {
    if (!s.polish) return false;
    std::vector<signed char> state(n, 0);
    for (int i = 0; i < n; ++i) {
      if (qp.lower[i] == qp.upper[i]) state[i] = 2;
    }
    for (size_t r = 0; r < ws.box_var.size(); ++r) {
      const int row = ws.m_eq + static_cast<int>(r);
      const int i = ws.box_var[r];
      if (state[i] == 2) continue;
      if (z[row] - lbar[row] < -y[row]) state[i] = -1;
      else if (ubar[row] - z[row] < y[row]) state[i] = 1;
    }
    return polish_from(std::move(state), iters);
  };

  // A warm start with multipliers (e.g. the parent of a branch-and-bound
  // node) usually carries the right active set; try it before iterating.
  if (s.polish && warm != nullptr && warm->x.size() == n && warm->y_box.size() == n) {
    std::vector<signed char> state(n, 0);
    for (int i = 0; i < n; ++i) {
      const double lo = qp.lower[i], hi = qp.upper[i];
      if (lo == hi) state[i] = 2;
      else if (warm->y_box[i] < 0.0 && warm->x[i] <= lo + 1e-9 * (1.0 + std::abs(lo))) state[i] = -1;
      else if (warm->y_box[i] > 0.0 && warm->x[i] >= hi - 1e-9 * (1.0 + std::abs(hi))) state[i] = 1;
    }
    if (polish_from(std::move(state), 0)) return sol;
    // the start is far off (often an infeasible child); iterating from it
    // delays the infeasibility certificate, so start from zero
    x.setZero();
    z.setZero();
    y.setZero();
  }

  // factorised only once the iterations are needed
  if (!ws.factored || ws.eq_row != eq_row) refactor(ws.rho_base);
  if (!ws.factored) throw std::runtime_error("KKT factorisation failed");

  Vector rhs(n + m), xt(n), zt(m), y_prev = y;
  double polish_level = 1e-3;
  const double alpha = s.alpha;
  for (int iter = 1; iter <= s.max_iter; ++iter) {
    y_prev = y;
    rhs.head(n) = s.sigma * x - qbar;
    rhs.tail(m) = z - y.cwiseQuotient(ws.rho);
    const Vector kk = ws.kkt.solve(rhs);
    xt = kk.head(n);
    zt = z + (kk.tail(m) - y).cwiseQuotient(ws.rho);
    x = alpha * xt + (1.0 - alpha) * x;
    const Vector zr = alpha * zt + (1.0 - alpha) * z;
    z = (zr + y.cwiseQuotient(ws.rho)).cwiseMax(lbar).cwiseMin(ubar);
    y += ws.rho.cwiseProduct(zr - z);

    if (iter % s.check_every != 0 && iter != s.max_iter) continue;

    // residuals of the unscaled problem
    const Vector ax_s = ws.A * x;
    const Vector ax = ax_s.cwiseQuotient(ws.E);
    const Vector zu = z.cwiseQuotient(ws.E);
    const double r_prim = inf_norm(ax - zu);
    const double p_scale = std::max(inf_norm(ax), inf_norm(zu));
    const Vector px = (ws.P * x).cwiseQuotient(ws.D) / ws.c;
    const Vector aty = (ws.A.transpose() * y).cwiseQuotient(ws.D) / ws.c;
    const Vector qu = qbar.cwiseQuotient(ws.D) / ws.c;
    const double r_dual = inf_norm(px + qu + aty);
    const double d_scale = std::max({inf_norm(px), inf_norm(aty), inf_norm(qu)});
    const double rel_p = r_prim / (1.0 + p_scale);
    const double rel_d = r_dual / (1.0 + d_scale);

    if (rel_p <= s.tol && rel_d <= s.tol) {
      // prefer the exact active-set solution; callers compare objective
      // values across solves and need them free of iterate noise
      if (try_polish(iter)) return sol;
      finish_from_iterate(SolveStatus::Code::optimal, iter);
      if (sol.status.primal_residual <= s.tol && sol.status.dual_residual <= s.tol) return sol;
    } else if (rel_p <= polish_level && rel_d <= polish_level) {
      if (try_polish(iter)) return sol;
      polish_level = std::max(polish_level * 0.1, s.tol);
    }

    // primal infeasibility certificate
    Vector dy = y - y_prev;
    for (int r = 0; r < m; ++r) {
      if (!std::isfinite(ubar[r])) dy[r] = std::min(dy[r], 0.0);
      if (!std::isfinite(lbar[r])) dy[r] = std::max(dy[r], 0.0);
    }
    const double dy_norm = inf_norm(ws.E.cwiseProduct(dy));
    if (dy_norm > 1e-12) {
      const double aty_dy = inf_norm((ws.A.transpose() * dy).cwiseQuotient(ws.D));
      double support = 0.0;
      for (int r = 0; r < m; ++r) {
        if (dy[r] > 0.0) support += ubar[r] * dy[r];
        else if (dy[r] < 0.0) support += lbar[r] * dy[r];
      }
      if (aty_dy <= s.infeasibility_tol * dy_norm && support < -s.infeasibility_tol * dy_norm) {
        finish_from_iterate(SolveStatus::Code::infeasible, iter);
        return sol;
      }
    }

    if (s.adaptive_rho && iter % (5 * s.check_every) == 0) {
      const double pr = r_prim / (p_scale + 1e-10);
      const double dr = r_dual / (d_scale + 1e-10);
      double rho_new = ws.rho_base * std::sqrt(pr / (dr + 1e-30));
      rho_new = std::clamp(rho_new, 1e-6, 1e6);
      if (rho_new > 5.0 * ws.rho_base || rho_new < 0.2 * ws.rho_base) {
        refactor(rho_new);
        if (!ws.factored) throw std::runtime_error("KKT factorisation failed");
      }
    }
  }
  if (try_polish(s.max_iter)) return sol;
  finish_from_iterate(SolveStatus::Code::max_iterations, s.max_iter);
  return sol;
}

QpSolution solve_qp(const QuadProgram& qp, double tol, int max_iter) {
  QpSettings s;
  s.tol = tol;
  s.max_iter = max_iter;
  QpSolver solver(s);
  return solver.solve(qp);
}

}  // namespace emgrid
