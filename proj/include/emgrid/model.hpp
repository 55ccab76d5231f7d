#pragma once

// Domain model for a network of interconnected microgrids.
//
// Units used throughout the library: power in kW, energy in kWh, time in
// hours, phase angles in radians. Line susceptances are expressed in kW/rad
// so that y * (theta_j - theta_m) is a power in kW.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emgrid {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage failed (infeasible subproblem, inner solver failure).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConventionalGenSpec {
  double p_min = 0.0;
  double p_max = 0.0;
  double a_on = 0.0;    // cost per step while switched on
  double a_lin = 0.0;   // linear fuel weight
  double a_quad = 0.0;  // quadratic fuel weight
  bool operator==(const ConventionalGenSpec&) const = default;
};

struct StorageSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  double p_min = 0.0;  // negative: charging
  double p_max = 0.0;
  double a_wear = 0.0;
  bool operator==(const StorageSpec&) const = default;
};

struct ResSpec {
  double p_max = 0.0;
  double a_curtail = 0.0;
  bool operator==(const ResSpec&) const = default;
};

struct PccSpec {
  double a_price = 0.0;  // selling/buying price
  double a_fee = 0.0;    // trading fee on |p_pcc|
  bool operator==(const PccSpec&) const = default;
};

struct MicrogridSpec {
  int id = 0;
  std::vector<ConventionalGenSpec> conv;
  std::vector<StorageSpec> storage;
  std::vector<ResSpec> res;
  int loads = 0;
  PccSpec pcc;

  int num_units() const { return static_cast<int>(conv.size() + storage.size() + res.size()); }
  bool operator==(const MicrogridSpec&) const = default;
};

/// Undirected line {a, b}. p_min/p_max bound the flow in the a -> b direction.
struct Line {
  int a = 0;
  int b = 0;
  double susceptance = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_weight = 0.0;
  bool operator==(const Line&) const = default;
};

/// One incident line seen from a node. Flow limits are oriented from the
/// viewing node towards `node`.
struct Neighbor {
  int node = 0;
  int line = 0;
  double susceptance = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_weight = 0.0;
};

class GridGraph {
 public:
  GridGraph() = default;
  /// Nodes are 0-based. Throws InputError on out-of-range endpoints or
  /// self-loops; other invariants are reported by validate_scenario.
  GridGraph(int num_nodes, std::vector<Line> lines);

  int num_nodes() const { return num_nodes_; }
  const std::vector<Line>& lines() const { return lines_; }
  /// Neighbours of j, sorted by node index.
  std::span<const Neighbor> neighbors(int j) const;
  int degree(int j) const { return static_cast<int>(neighbors(j).size()); }
  bool connected() const;

  bool operator==(const GridGraph& other) const {
    return num_nodes_ == other.num_nodes_ && lines_ == other.lines_;
  }

 private:
  int num_nodes_ = 0;
  std::vector<Line> lines_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Exogenous inputs of one microgrid at one time step: available renewable
/// power per RES unit (>= 0) and load power per load channel (<= 0).
struct MgDisturbance {
  std::vector<double> res;
  std::vector<double> load;
  bool operator==(const MgDisturbance&) const = default;
};

/// Forecast of one microgrid over a horizon, one entry per predicted step.
using MgForecast = std::vector<MgDisturbance>;

/// Unit power set points of one microgrid at one step (z_j in the model):
/// conventional, storage and renewable powers, then PCC power.
/// A positive PCC power is consumed from the network.
struct UnitPowers {
  std::vector<double> conv;
  std::vector<double> storage;
  std::vector<double> res;
  double pcc = 0.0;
  bool operator==(const UnitPowers&) const = default;
};

/// Switch state per conventional generator; values are 0 or 1.
using SwitchState = std::vector<int>;

/// Planned decisions of one microgrid over steps h = 0..H.
struct Trajectory {
  std::vector<UnitPowers> power;            // H+1
  std::vector<SwitchState> delta;           // H+1
  std::vector<std::vector<double>> energy;  // H+2, energy[0] is the measured state
  std::vector<double> own_angle;            // H+1, empty for islanded plans
  std::vector<std::vector<double>> replica_angle;  // per neighbour, H+1 each

  int horizon() const { return static_cast<int>(power.size()) - 1; }
};

/// x(k+1) = x(k) - ts * p. Positive p discharges.
double storage_step(double energy, double power, double ts);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Linear description of the feasible power set of one microgrid at one
/// step: box bounds per entry of z = [conv..., storage..., res..., pcc] and
/// the balance equality sum(z) = balance_rhs.
struct PowerSet {
  std::vector<Interval> bounds;
  double balance_rhs = 0.0;

  bool contains(const UnitPowers& z, double tol) const;
};

PowerSet feasible_power_set(const MicrogridSpec& mg, const MgDisturbance& w_hat,
                            std::span<const int> delta);

/// Stage cost l_j of one microgrid. Switching cost a_on * delta, fuel
/// a_lin * p + a_quad * p^2 (the linear fuel term is read as a_lin * p),
/// curtailment a_curtail * (p_r - w_r)^2, wear a_wear * p_s^2 and PCC trade
/// a_price * p_pcc + a_fee * |p_pcc|.
double mg_stage_cost(const MicrogridSpec& mg, const UnitPowers& z, std::span<const int> delta,
                     const MgDisturbance& w_hat);

/// Gradient of mg_stage_cost with respect to z (d|p|/dp taken as sign(p)).
UnitPowers mg_stage_cost_gradient(const MicrogridSpec& mg, const UnitPowers& z,
                                  const MgDisturbance& w_hat);

/// DC line flow y * (theta_j - theta_m).
double line_power(double susceptance, double theta_j, double theta_m);

/// Power exchanged by node j through its PCC, sum over neighbours of the
/// line flows leaving j.
double pcc_from_angles(const GridGraph& graph, int j, std::span<const double> theta);

/// Network transmission cost sum_j sum_{m in N_j} a_jm p_jm^2. Every line
/// contributes once per direction.
double transmission_cost(const GridGraph& graph, std::span<const double> theta);
std::vector<double> transmission_cost_gradient(const GridGraph& graph,
                                               std::span<const double> theta);

/// Discounted horizon cost V_j = sum_h gamma^h l_j of a planned trajectory.
double horizon_cost(const MicrogridSpec& mg, const Trajectory& traj, const MgForecast& forecast,
                    double gamma);

}  // namespace emgrid
