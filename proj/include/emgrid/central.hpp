#pragma once

// Centralised reference solvers for the interconnected problem.

#include <vector>

#include "emgrid/horizon_qp.hpp"
#include "emgrid/islanded.hpp"

namespace emgrid {

/// Everything needed for one MPC instant of the whole network.
struct StepInstance {
  GridGraph graph;
  std::vector<MgInstance> mgs;
  double gamma = 1.0;
  double ts = 0.5;

  int steps() const { return mgs.empty() ? 0 : static_cast<int>(mgs[0].forecast.size()); }
};

struct CentralSolution {
  std::vector<Trajectory> trajectories;   // own_angle filled, pcc from angles
  std::vector<std::vector<double>> theta;  // [h][node], theta[h][0] = 0
  std::vector<std::vector<double>> flow;   // [h][line], oriented a -> b
  std::vector<double> mg_cost;             // V_j
  double transmission_cost = 0.0;          // discounted
  double total_cost = 0.0;
  std::vector<double> mu;  // cap multipliers
  SolveStatus status;
  int qp_solves = 0;
  bool caps_converged = true;
  Vector x;
};

struct CentralOptions {
  QpSettings qp;
  MultiCapSettings caps;
};

/// Interconnected convex problem with switches fixed to the Stage I
/// schedules and each V_j capped by its islanded cost. Throws SolverError
/// if the program is reported infeasible (cannot happen for valid Stage I
/// results, since the islanded point is feasible).
CentralSolution solve_central_convex(const StepInstance& inst,
                                     const std::vector<IslandedSolution>& islanded,
                                     const CentralOptions& opt = {}, QpSolver* solver = nullptr,
                                     std::vector<double> mu_start = {});

/// Same program without caps, for an arbitrary fixed joint schedule.
CentralSolution solve_central_fixed(const StepInstance& inst,
                                    const std::vector<std::vector<SwitchState>>& schedules,
                                    const CentralOptions& opt = {}, QpSolver* solver = nullptr);

struct CentralMiqpSolution {
  CentralSolution solution;
  std::vector<std::vector<SwitchState>> schedules;  // [mg][h][c]
  long combinations = 0;
};

/// Joint switching optimum by exhaustive enumeration. Refuses instances with
/// more than `limit` binary combinations (InputError). Ties keep the
/// lexicographically smallest schedule.
CentralMiqpSolution solve_central_miqp_small(const StepInstance& inst, long limit = 4096,
                                             const CentralOptions& opt = {});

/// Primal vector of the central program built from the islanded plans with
/// all angles and flows at zero.
Vector stacked_islanded_point(const HorizonProblem& central,
                              const std::vector<IslandedSolution>& islanded);

struct PointCheck {
  double equality = 0.0;  // max |A x - b|
  double bounds = 0.0;    // max bound violation
  std::vector<double> cap_excess;  // V_j(x) - V*_j
};

/// Feasibility of the stacked islanded point for the capped central program.
PointCheck check_islanded_point(const StepInstance& inst,
                                const std::vector<IslandedSolution>& islanded);

HorizonProblem build_capped_central(const StepInstance& inst,
                                    const std::vector<IslandedSolution>& islanded,
                                    std::vector<QuadCap>& caps);

}  // namespace emgrid
