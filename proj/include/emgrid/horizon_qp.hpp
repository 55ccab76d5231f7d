#pragma once

// Assembly of the finite-horizon MPC programs as QuadPrograms.
//
// Every microgrid contributes, per step h = 0..H, its unit powers, storage
// energies x(h+1) linked by the storage dynamics, and the power balance. Its
// discounted cost V_j is added to the objective and also recorded as a
// QuadCap over the same variables so that callers can bound it.

#include <optional>
#include <vector>

#include "emgrid/model.hpp"
#include "emgrid/qp.hpp"

namespace emgrid {

/// Switch bounds per step and conventional unit. Entries with lo == hi are
/// fixed; others are relaxed to [lo, hi]. With keep_layout, fixed entries
/// still get their switch variable, so every node of a branch-and-bound
/// tree has the same program layout.
struct SwitchBounds {
  std::vector<std::vector<double>> lo;  // [h][c]
  std::vector<std::vector<double>> hi;
  bool keep_layout = false;

  static SwitchBounds fixed(const std::vector<SwitchState>& schedule);
  static SwitchBounds relaxed(int steps, int units);
};

/// Variable indices of one microgrid; -1 where a quantity is not a variable.
struct MgLayout {
  std::vector<std::vector<int>> conv, storage, res, delta;  // [h][unit]
  std::vector<std::vector<int>> energy;                    // [h][s], state after step h
  std::vector<int> pcc_pos, pcc_neg;                       // [h]
  SwitchBounds switches;
  std::vector<double> x0;
};

/// Angles and line flows of the whole network, indexed [h][node] / [h][line].
struct CentralNetLayout {
  std::vector<std::vector<int>> theta;
  std::vector<std::vector<int>> flow;
};

/// Angles seen by one agent: its own angle, one replica per neighbour and the
/// flow on each incident line, all indexed [neighbour][h] except `own`.
struct LocalNetLayout {
  std::vector<int> own;
  std::vector<std::vector<int>> replica;
  std::vector<std::vector<int>> flow;
};

struct HorizonProblem {
  QuadProgram qp;
  std::vector<MgLayout> mgs;
  std::vector<QuadCap> costs;  // V_j as a quadratic form, level unset
  std::optional<CentralNetLayout> central;
  std::optional<LocalNetLayout> local;
  int steps = 0;  // H + 1
};

/// Data of one microgrid for one MPC instant.
struct MgInstance {
  MicrogridSpec spec;
  MgForecast forecast;     // H+1 entries
  std::vector<double> x0;  // per storage unit
};

double discount_power(double gamma, int h);

/// Problem 1 style: one microgrid, PCC fixed to zero.
HorizonProblem build_islanded_problem(const MgInstance& mg, const SwitchBounds& switches,
                                      double gamma, double ts);

/// Problem 3 style: every microgrid plus the DC network, switches fixed.
/// Node 0 carries the angle reference (theta = 0).
HorizonProblem build_central_problem(const GridGraph& graph, const std::vector<MgInstance>& mgs,
                                     const std::vector<SwitchBounds>& switches, double gamma,
                                     double ts);

/// Local view of agent j: its microgrid, own angle, neighbour replicas,
/// incident line flows and the local transmission cost a_jm p_jm^2.
/// Without neighbours the own angle is pinned to zero.
HorizonProblem build_local_problem(const GridGraph& graph, int j, const MgInstance& mg,
                                   const SwitchBounds& switches, double gamma, double ts);

/// Reads one microgrid's plan out of a primal vector. Switch states of
/// relaxed entries are rounded.
Trajectory extract_trajectory(const HorizonProblem& prob, int mg, const Vector& x);

/// Relaxed switch values [h][c] (fixed entries return their bound).
std::vector<std::vector<double>> switch_values(const HorizonProblem& prob, int mg, const Vector& x);

}  // namespace emgrid
