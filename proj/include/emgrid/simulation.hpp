#pragma once

// Closed-loop receding-horizon simulation over a disturbance trace.
//
// Step s (0-based) is the sampling instant k = s + 1: the controller sees the
// measurements of time index k - 1 and the storage state, plans over H + 1
// steps, and the first planned step is applied against the realized
// disturbance at time index k.

#include <functional>
#include <string>
#include <vector>

#include "emgrid/distributed.hpp"
#include "emgrid/scenario.hpp"

namespace emgrid {

enum class Controller { islanded, central, distributed, dd };

std::string to_string(Controller c);
/// Throws InputError for unknown names.
Controller parse_controller(const std::string& name);

/// Persistence forecast: every one of the horizon + 1 entries equals the
/// last measurement series[k - 1][j]. Throws InputError without history.
MgForecast persistence_forecast(const DisturbanceSeries& series, int j, int k, int horizon);

struct PlantStep {
  UnitPowers realized;
  std::vector<double> energy;  // storage energies after the step
  double imbalance = 0.0;      // power the storage could not absorb; > 0 is a shortfall
};

/// Applies one planned step. Renewable infeed is min(planned, available,
/// rating); the power mismatch this and the load deviation cause is moved
/// onto the storage units in order, within their power and energy limits.
/// The PCC power stays at its planned value.
PlantStep apply_plant_step(const MicrogridSpec& mg, const UnitPowers& planned,
                           const std::vector<double>& energy, const MgDisturbance& realized,
                           double ts);

struct StepRecord {
  int step = 0;
  std::vector<UnitPowers> planned;   // per MG
  std::vector<UnitPowers> realized;  // per MG
  std::vector<SwitchState> delta;
  std::vector<std::vector<double>> energy;  // per MG, after the step
  std::vector<double> imbalance;
  std::vector<double> cost;          // realized stage cost + local transmission share
  std::vector<double> res_used;      // sum of realized renewable infeed
  std::vector<double> res_available;
  std::vector<double> plan_cost;      // horizon cost V_j of the applied plan
  std::vector<double> islanded_cost;  // V*_j of Stage I
  double kkt_residual = 0.0;          // central QP, relative; 0 for the others
  int iterations = 0;  // consensus rounds (0 for islanded and central)
  bool converged = true;
  long messages = 0;
  std::vector<TraceRow> trace;
};

struct ClosedLoopResult {
  Controller controller = Controller::islanded;
  std::vector<StepRecord> steps;
  std::vector<double> mg_cost;  // undiscounted sum over steps
  double total_cost = 0.0;

  bool all_converged() const;
};

struct ClosedLoopSettings {
  Controller controller = Controller::distributed;
  int steps = 336;
  bool perfect_foresight = false;  // forecast = realized future instead of persistence
  bool keep_traces = false;
  int workers = 0;
  QpSettings qp;
  /// Called with the plans of every step before the first entry is applied.
  std::function<void(int, std::vector<Trajectory>&)> plan_filter;
};

/// Plans of one MPC instant, before any of it is applied.
struct StepPlan {
  std::vector<Trajectory> plans;
  std::vector<IslandedSolution> islanded;
  std::vector<std::vector<double>> theta;  // [h][node]; zero for islanded
  std::vector<double> mg_cost;             // V_j of the plans
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = true;
  long messages = 0;
  std::vector<TraceRow> trace;
};

/// Runs Stage I and the selected Stage II at instant k from the storage
/// state `energy`. `ctx` carries consensus warm starts between instants and
/// may be null. Throws SolverError naming the instant when a stage fails.
StepPlan plan_step(const Scenario& scenario, const DisturbanceSeries& series, int k,
                   const std::vector<std::vector<double>>& energy,
                   const ClosedLoopSettings& settings, ConsensusContext* ctx = nullptr);

/// Throws SolverError naming the failing step when a stage fails.
ClosedLoopResult closed_loop_run(const Scenario& scenario, const DisturbanceSeries& series,
                                 const ClosedLoopSettings& settings);

/// 100 * used / available renewable energy; mg = -1 for the whole network.
/// Defined as 100 when nothing was available.
double kpi_renewable(const ClosedLoopResult& result, int mg = -1);

}  // namespace emgrid
