#pragma once

// Convex quadratic programs
//
//   minimize    1/2 x'Px + q'x + constant
//   subject to  A_eq x = b_eq,   lower <= x <= upper
//
// solved by an operator-splitting iteration with over-relaxation. Once the
// iterate is accurate enough to guess the active bounds, the reduced KKT
// system is solved directly ("polishing") so that returned solutions carry
// KKT residuals at the requested tolerance.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emgrid {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vector = Eigen::VectorXd;

struct QuadProgram {
  SparseMatrix P;  // symmetric, both triangles stored
  Vector q;
  SparseMatrix A_eq;
  Vector b_eq;
  Vector lower;  // -inf allowed
  Vector upper;  // +inf allowed
  double constant = 0.0;

  int num_vars() const { return static_cast<int>(q.size()); }
  int num_eq() const { return static_cast<int>(b_eq.size()); }
  double objective(const Vector& x) const;
};

/// Throws std::invalid_argument describing the first broken invariant:
/// dimension mismatch, asymmetric P, lower > upper, or a negative
/// curvature probe v'Pv < 0 (deterministic random probes).
void validate(const QuadProgram& qp);

/// Convex quadratic form 1/2 x'Px + q'x + constant used as the constraint
/// value(x) <= level.
struct QuadCap {
  SparseMatrix P;
  Vector q;
  double constant = 0.0;
  double level = 0.0;

  double value(const Vector& x) const;
};

struct SolveStatus {
  enum class Code { optimal, infeasible, max_iterations };
  Code code = Code::max_iterations;
  int iterations = 0;
  double primal_residual = 0.0;  // relative, see kkt_residuals
  double dual_residual = 0.0;
  bool polished = false;

  bool ok() const { return code == Code::optimal; }
};

std::string to_string(SolveStatus::Code code);

struct QpSolution {
  Vector x;
  Vector y_eq;   // multipliers of A_eq x = b_eq
  Vector y_box;  // > 0 at active upper bounds, < 0 at active lower bounds
  SolveStatus status;
  double objective = 0.0;
};

struct KktResiduals {
  double primal = 0.0;           // max(|A_eq x - b|, bound violation) / (1 + scale)
  double dual = 0.0;             // |Px + q + A_eq'y_eq + y_box| / (1 + scale)
  double complementarity = 0.0;  // bound-distance weighted multiplier violations
  double max() const;
};

/// Relative KKT residuals of a primal-dual pair. Used both by the solver to
/// accept polished points and by tests as an independent check.
KktResiduals kkt_residuals(const QuadProgram& qp, const Vector& x, const Vector& y_eq,
                           const Vector& y_box);

struct QpSettings {
  double tol = 1e-8;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int scaling_iters = 10;
  bool polish = true;
  bool adaptive_rho = true;
  int check_every = 10;
  double infeasibility_tol = 1e-6;
};

struct WarmStart {
  Vector x;
  Vector y_eq;
  Vector y_box;
};

/// Reusable solver workspace. The scaling and factorisation are cached and
/// reused while P and A_eq keep their values; q, b_eq and bounds may change
/// freely between calls. Not thread-safe; use one instance per worker.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {});
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  QpSolution solve(const QuadProgram& qp, const WarmStart* warm = nullptr);

  const QpSettings& settings() const { return settings_; }
  QpSettings& settings() { return settings_; }

  struct Workspace;  // opaque

 private:
  QpSettings settings_;
  std::unique_ptr<Workspace> ws_;
};

QpSolution solve_qp(const QuadProgram& qp, double tol = 1e-8, int max_iter = 50000);

struct CapSettings {
  double tol = 1e-8;       // absolute tolerance on the cap value
  double mu_max = 1e8;
  int max_steps = 100;
};

struct CappedSolution {
  QpSolution qp;
  double mu = 0.0;
  double cap_value = 0.0;
  int qp_solves = 0;
};

class CapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves min f s.t. QP constraints and cap(x) <= level by a bracketed
/// search on the scalar multiplier mu of the cap: the QP with objective
/// f + mu * cap is solved for each trial mu. Throws CapError when no mu in
/// [0, mu_max] satisfies the cap.
CappedSolution solve_qp_with_cap(QpSolver& solver, const QuadProgram& qp, const QuadCap& cap,
                                 const CapSettings& settings = {}, double mu_hint = 0.0,
                                 const WarmStart* warm = nullptr);

CappedSolution solve_qp_with_cap(const QuadProgram& qp, const QuadCap& cap,
                                 const CapSettings& settings = {});

struct MultiCapSettings {
  CapSettings cap;
  int max_passes = 50;
};

struct MultiCapSolution {
  QpSolution qp;
  std::vector<double> mu;
  std::vector<double> cap_value;
  int passes = 0;
  int qp_solves = 0;
  bool converged = false;
};

/// Several caps at once: cyclic passes of the scalar search over each
/// multiplier while holding the others fixed.
MultiCapSolution solve_qp_with_caps(QpSolver& solver, const QuadProgram& qp,
                                    const std::vector<QuadCap>& caps,
                                    const MultiCapSettings& settings = {},
                                    std::vector<double> mu_start = {});

/// Objective f + sum_i mu_i cap_i (cap levels are ignored).
QuadProgram with_cap_penalty(const QuadProgram& qp, const std::vector<const QuadCap*>& caps,
                             const std::vector<double>& mu);

}  // namespace emgrid
