#pragma once

// Stage I: islanded MPC with binary generator switching, solved by
// best-first branch and bound over the switch schedule.

#include <vector>

#include "emgrid/horizon_qp.hpp"

namespace emgrid {

struct StageOptions {
  double gamma = 1.0;
  double ts = 0.5;
  QpSettings qp;
};

struct FixedBinaryResult {
  Trajectory traj;
  double cost = 0.0;  // discounted horizon cost V_j
  SolveStatus status;
  Vector x;
};

/// Islanded program with the switch schedule fixed. Check status.code for
/// infeasibility; the trajectory is only meaningful when status.ok().
FixedBinaryResult solve_fixed_binary(const MgInstance& mg, const std::vector<SwitchState>& delta,
                                     const StageOptions& opt = {}, QpSolver* solver = nullptr);

struct BnbNode {
  SwitchBounds bounds;
  double bound = 0.0;  // relaxed cost
};

struct IslandedSolution {
  std::vector<SwitchState> delta_star;  // [h][c]
  Trajectory z_star;
  double v_star = 0.0;
  int nodes = 0;                 // relaxations solved
  std::vector<BnbNode> explored;  // filled when requested
};

struct IslandedOptions : StageOptions {
  double integrality_tol = 1e-6;
  bool record_nodes = false;
};

/// Throws SolverError when even the relaxation with every generator
/// available is infeasible.
IslandedSolution solve_islanded(const MgInstance& mg, const IslandedOptions& opt = {});

/// Stage I for all microgrids, in parallel over microgrids.
std::vector<IslandedSolution> solve_islanded_all(const std::vector<MgInstance>& mgs,
                                                 const IslandedOptions& opt = {});

}  // namespace emgrid
