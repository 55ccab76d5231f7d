#pragma once

// Consensus on phase angles between microgrid agents.
//
// Each agent owns its angle trajectory theta_jj and keeps a replica theta_jm
// of every neighbour's angle. The local program couples them only through
// its own lines; consensus theta_jm = theta_mm is reached by an augmented
// Lagrangian iteration (or, as a baseline, by dual decomposition) with one
// message per directed edge and round.

#include <deque>
#include <map>
#include <memory>
#include <vector>

#include "emgrid/central.hpp"

namespace emgrid {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConsensusMessage {
  int sender = 0;
  int receiver = 0;
  int round = 0;
  std::vector<double> own_angle;              // sender's theta_jj
  std::vector<double> replica_of_receiver;    // sender's theta_jm, m = receiver
};

/// In-process bus with one FIFO queue per directed edge.
class MessageBus {
 public:
  explicit MessageBus(const GridGraph& graph);

  /// Throws ProtocolError for non-edges, non-finite payloads or a round that
  /// does not increase on its edge.
  void send(ConsensusMessage msg);
  /// Throws ProtocolError naming the edge when no message for `round` waits.
  ConsensusMessage receive(int receiver, int sender, int round);

  long sent() const { return sent_; }

 private:
  std::map<std::pair<int, int>, std::deque<ConsensusMessage>> queues_;
  std::map<std::pair<int, int>, int> last_round_;
  long sent_ = 0;
};

/// Consensus state of one agent. Vectors over neighbours follow the order of
/// GridGraph::neighbors(id).
struct AgentState {
  int id = 0;
  std::vector<int> neighbors;
  std::vector<double> own;                         // theta_jj
  std::vector<std::vector<double>> replica;        // theta_jm
  std::vector<std::vector<double>> snap_own;       // received theta_mm
  std::vector<std::vector<double>> snap_replica;   // received theta_mj
  std::vector<std::vector<double>> lambda;         // multipliers of theta_jm = theta_mm
  std::vector<double> lambda_own;                  // aggregated multiplier of theta_jj
  int round = 0;

  /// Zero angles, zero multipliers, zero snapshots.
  static AgentState zero(const GridGraph& graph, int id, int steps);
};

struct LocalResult {
  Trajectory plan;                          // unit powers of the local solve
  std::vector<double> own;                  // solved theta_jj
  std::vector<std::vector<double>> replica;  // solved theta_jm
  double objective = 0.0;                    // V_j + local transmission cost
  double cost = 0.0;                         // V_j
  double mu = 0.0;                           // cap multiplier
  SolveStatus status;
  int qp_solves = 0;
};

/// Local program of one agent plus its solver workspace. The structure is
/// fixed per MPC instant; only the linear terms change between rounds.
class Agent {
 public:
  Agent(const StepInstance& inst, int j, const IslandedSolution& islanded, QpSettings qp = {});

  /// Refreshes forecasts, initial storage and switches for a new MPC
  /// instant, keeping the solver workspace.
  void reset_problem(const StepInstance& inst, const IslandedSolution& islanded);

  /// min f_j + <lambda_j, theta_jc> - <lambda_jj, theta_jj>
  ///      + rho/2 sum_m |theta_jm - snap_own_m|^2 + rho/2 sum_m |theta_jj - snap_replica_m|^2
  ///      + prox/2 |theta - theta_current|^2
  /// subject to the microgrid, local network and cost-cap constraints.
  LocalResult solve_local(const AgentState& state, double rho, double prox = 0.0);

  const HorizonProblem& problem() const { return prob_; }
  const QuadCap& cap() const { return cap_; }
  int id() const { return id_; }

 private:
  int id_;
  double gamma_;
  MgForecast forecast_;
  MicrogridSpec spec_;
  HorizonProblem prob_;
  QuadCap cap_;
  QpSolver solver_;
  double mu_ = 0.0;
  std::optional<WarmStart> warm_;
};

/// Builds the local AL program for agent j and solves it once.
LocalResult local_al_subproblem(const StepInstance& inst, int j, const AgentState& state,
                                const IslandedSolution& islanded, double rho);

struct AgentResidual {
  double primal = 0.0;  // |theta_bar - theta|, Euclidean over own and replica angles
  double dual = 0.0;    // |theta_jc - theta_jj| consensus violation, Euclidean
  double eps = 0.0;     // max of both
  double objective = 0.0;
};

struct RoundReport {
  int round = 0;
  std::vector<AgentResidual> agents;
  long messages = 0;
  double wall_seconds = 0.0;
  double max_eps() const;
};

struct AlSettings {
  double rho = 1e3;
  double tau = 0.3;
  double eps_term = 1e-5;
  int nu_max = 5000;
  int workers = 0;  // 0: worker_count()
};

/// One synchronous round of the accelerated AL method over all agents:
/// parallel local solves, relaxation theta += tau (theta_bar - theta),
/// exchange, multiplier updates with step rho*tau. Throws
/// std::invalid_argument unless 0 < tau < 0.5 and rho > 0.
RoundReport al_round(std::vector<Agent>& agents, std::vector<AgentState>& states,
                     MessageBus& bus, double rho, double tau, int workers = 0,
                     std::vector<LocalResult>* last = nullptr);

struct TraceRow {
  int iteration = 0;
  int agent = 0;
  double primal = 0.0;
  double dual = 0.0;
  double objective = 0.0;
};

struct ConsensusResult {
  std::vector<Trajectory> trajectories;   // own_angle / replica_angle collapsed onto owners
  std::vector<std::vector<double>> theta;  // [h][node]
  std::vector<double> mg_cost;             // V_j of the collapsed plans
  double transmission_cost = 0.0;
  double total_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  long messages = 0;
  long messages_per_round = 0;
  std::vector<TraceRow> trace;
  std::vector<AgentState> final_states;
  std::vector<double> cap_mu;
};

/// Persistent agents and their last states, reused across MPC instants.
struct ConsensusContext {
  std::vector<Agent> agents;
  std::vector<AgentState> states;
  bool warm = false;
};

/// Shifts every trajectory in the states one step ahead, repeating the last.
void shift_states(std::vector<AgentState>& states);

ConsensusResult run_consensus_al(const StepInstance& inst,
                                 const std::vector<IslandedSolution>& islanded,
                                 const AlSettings& settings, ConsensusContext* ctx = nullptr,
                                 QpSettings qp = {});

struct DdSettings {
  double alpha0 = 5e3;  // tuned once on the bundled instances, see notes
  double prox = 3e3;    // proximal weight keeping the rho = 0 subproblems bounded
  double eps_term = 1e-5;
  int nu_max = 5000;
  int workers = 0;
};

/// Dual decomposition baseline: unaugmented local programs (plus the fixed
/// proximal term), full step, multiplier step alpha0 / sqrt(nu). The
/// termination residual is the consensus violation only.
ConsensusResult run_dual_decomposition(const StepInstance& inst,
                                       const std::vector<IslandedSolution>& islanded,
                                       const DdSettings& settings, ConsensusContext* ctx = nullptr,
                                       QpSettings qp = {});

}  // namespace emgrid
