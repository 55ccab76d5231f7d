#include "emgrid/distributed.hpp"

#include <chrono>
#include <cmath>

#include "consensus_internal.hpp"
#include "emgrid/parallel.hpp"

namespace emgrid {

MessageBus::MessageBus(const GridGraph& graph) {
  for (int j = 0; j < graph.num_nodes(); ++j) {
    for (const Neighbor& nb : graph.neighbors(j)) queues_[{j, nb.node}];
  }
}

void MessageBus::send(ConsensusMessage msg) {
  const std::pair<int, int> edge{msg.sender, msg.receiver};
  auto it = queues_.find(edge);
  const std::string tag = std::to_string(msg.sender + 1) + "->" + std::to_string(msg.receiver + 1);
  if (it == queues_.end()) throw ProtocolError("no line for message " + tag);
  for (double v : msg.own_angle) {
    if (!std::isfinite(v)) throw ProtocolError("non-finite payload on " + tag);
  }
  for (double v : msg.replica_of_receiver) {
    if (!std::isfinite(v)) throw ProtocolError("non-finite payload on " + tag);
  }
  auto last = last_round_.find(edge);
  if (last != last_round_.end() && msg.round <= last->second) {
    throw ProtocolError("round not increasing on " + tag);
  }
  last_round_[edge] = msg.round;
  it->second.push_back(std::move(msg));
  ++sent_;
}

ConsensusMessage MessageBus::receive(int receiver, int sender, int round) {
  auto it = queues_.find({sender, receiver});
  const std::string tag = std::to_string(sender + 1) + "->" + std::to_string(receiver + 1);
  if (it == queues_.end()) throw ProtocolError("no line for message " + tag);
  auto& q = it->second;
  if (q.empty() || q.front().round != round) {
    throw ProtocolError("missing message for round " + std::to_string(round) + " on " + tag);
  }
  ConsensusMessage m = std::move(q.front());
  q.pop_front();
  return m;
}

AgentState AgentState::zero(const GridGraph& graph, int id, int steps) {
  AgentState s;
  s.id = id;
  for (const Neighbor& nb : graph.neighbors(id)) s.neighbors.push_back(nb.node);
  const size_t k = s.neighbors.size();
  const std::vector<double> z(steps, 0.0);
  s.own = z;
  s.lambda_own = z;
  s.replica.assign(k, z);
  s.snap_own.assign(k, z);
  s.snap_replica.assign(k, z);
  s.lambda.assign(k, z);
  return s;
}

double RoundReport::max_eps() const {
  double m = 0.0;
  for (const auto& a : agents) m = std::max(m, a.eps);
  return m;
}

Agent::Agent(const StepInstance& inst, int j, const IslandedSolution& islanded, QpSettings qp)
    : id_(j), gamma_(inst.gamma), solver_(qp) {
  reset_problem(inst, islanded);
}

void Agent::reset_problem(const StepInstance& inst, const IslandedSolution& islanded) {
  gamma_ = inst.gamma;
  spec_ = inst.mgs[id_].spec;
  forecast_ = inst.mgs[id_].forecast;
  prob_ = build_local_problem(inst.graph, id_, inst.mgs[id_], SwitchBounds::fixed(islanded.delta_star),
                              inst.gamma, inst.ts);
  cap_ = prob_.costs[0];
  cap_.level = islanded.v_star;
  mu_ = 0.0;
  // a warm start from the previous instant has the same layout
  if (warm_ && warm_->x.size() != prob_.qp.num_vars()) warm_.reset();
}

LocalResult Agent::solve_local(const AgentState& st, double rho, double prox) {
  const LocalNetLayout& net = *prob_.local;
  const int steps = prob_.steps;
  QuadProgram qp = prob_.qp;
  std::vector<Eigen::Triplet<double>> diag;
  const size_t k = net.replica.size();
  if (k > 0) {
    for (int h = 0; h < steps; ++h) {
      const int o = net.own[h];
      double p_own = rho * k + prox;
      double q_own = -st.lambda_own[h] - prox * st.own[h];
      for (size_t m = 0; m < k; ++m) {
        q_own -= rho * st.snap_replica[m][h];
        const int r = net.replica[m][h];
        diag.emplace_back(r, r, rho + prox);
        qp.q[r] += st.lambda[m][h] - rho * st.snap_own[m][h] - prox * st.replica[m][h];
      }
      diag.emplace_back(o, o, p_own);
      qp.q[o] += q_own;
    }
    SparseMatrix add(qp.num_vars(), qp.num_vars());
    add.setFromTriplets(diag.begin(), diag.end());
    qp.P += add;
  }

  CappedSolution cs;
  try {
    cs = solve_qp_with_cap(solver_, qp, cap_, CapSettings{}, mu_, warm_ ? &*warm_ : nullptr);
  } catch (const CapError& e) {
    throw SolverError("agent " + std::to_string(id_ + 1) + ": " + e.what());
  }
  if (cs.qp.status.code == SolveStatus::Code::infeasible) {
    throw SolverError("agent " + std::to_string(id_ + 1) + ": local program infeasible");
  }
  mu_ = cs.mu;
  warm_ = WarmStart{cs.qp.x, cs.qp.y_eq, cs.qp.y_box};

  const Vector& x = cs.qp.x;
  LocalResult out;
  out.plan = extract_trajectory(prob_, 0, x);
  for (int h = 0; h < steps; ++h) out.own.push_back(x[net.own[h]]);
  for (size_t m = 0; m < k; ++m) {
    std::vector<double> r;
    for (int h = 0; h < steps; ++h) r.push_back(x[net.replica[m][h]]);
    out.replica.push_back(std::move(r));
  }
  out.cost = cap_.value(x);
  out.objective = prob_.qp.objective(x);
  out.mu = cs.mu;
  out.status = cs.qp.status;
  out.qp_solves = cs.qp_solves;
  return out;
}

LocalResult local_al_subproblem(const StepInstance& inst, int j, const AgentState& state,
                                const IslandedSolution& islanded, double rho) {
  Agent agent(inst, j, islanded);
  return agent.solve_local(state, rho);
}

namespace {

double sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m += (a[i] - b[i]) * (a[i] - b[i]);
  return m;
}

template <class T>
void shift_one(std::vector<T>& v) {
  if (v.size() < 2) return;
  for (size_t i = 0; i + 1 < v.size(); ++i) v[i] = v[i + 1];
}

}  // namespace

void shift_states(std::vector<AgentState>& states) {
  for (auto& s : states) {
    shift_one(s.own);
    shift_one(s.lambda_own);
    for (auto& v : s.replica) shift_one(v);
    for (auto& v : s.snap_own) shift_one(v);
    for (auto& v : s.snap_replica) shift_one(v);
    for (auto& v : s.lambda) shift_one(v);
  }
}

namespace detail {

RoundReport consensus_round(std::vector<Agent>& agents, std::vector<AgentState>& states,
                            MessageBus& bus, const RoundRule& rule, int workers,
                            std::vector<LocalResult>& last) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(agents.size());
  last.resize(n);
  parallel_for(
      n, [&](int j) { last[j] = agents[j].solve_local(states[j], rule.rho, rule.prox); },
      workers > 0 ? workers : worker_count());

  RoundReport rep;
  rep.agents.resize(n);
  const long sent_before = bus.sent();
  for (int j = 0; j < n; ++j) {
    AgentState& s = states[j];
    const LocalResult& r = last[j];
    double primal = sq_diff(r.own, s.own);
    for (size_t m = 0; m < s.replica.size(); ++m) primal += sq_diff(r.replica[m], s.replica[m]);
    for (size_t h = 0; h < s.own.size(); ++h) s.own[h] += rule.relax * (r.own[h] - s.own[h]);
    for (size_t m = 0; m < s.replica.size(); ++m) {
      for (size_t h = 0; h < s.own.size(); ++h) {
        s.replica[m][h] += rule.relax * (r.replica[m][h] - s.replica[m][h]);
      }
    }
    ++s.round;
    rep.agents[j].primal = std::sqrt(primal);
    rep.agents[j].objective = r.objective;
  }
  for (int j = 0; j < n; ++j) {
    const AgentState& s = states[j];
    for (size_t m = 0; m < s.neighbors.size(); ++m) {
      bus.send({j, s.neighbors[m], s.round, s.own, s.replica[m]});
    }
  }
  for (int j = 0; j < n; ++j) {
    AgentState& s = states[j];
    for (size_t m = 0; m < s.neighbors.size(); ++m) {
      ConsensusMessage msg = bus.receive(j, s.neighbors[m], s.round);
      s.snap_own[m] = std::move(msg.own_angle);
      s.snap_replica[m] = std::move(msg.replica_of_receiver);
    }
  }
  // Multiplier updates use the relaxed angles theta^{nu+1} as printed in the
  // method; the unrelaxed theta_bar would be the alternative reading.
  for (int j = 0; j < n; ++j) {
    AgentState& s = states[j];
    double dual = 0.0;
    for (size_t m = 0; m < s.neighbors.size(); ++m) {
      for (size_t h = 0; h < s.own.size(); ++h) {
        const double gap = s.replica[m][h] - s.snap_own[m][h];
        s.lambda[m][h] += rule.dual_step * gap;
        s.lambda_own[h] += rule.dual_step * (s.snap_replica[m][h] - s.own[h]);
        dual += gap * gap;
      }
    }
    AgentResidual& a = rep.agents[j];
    a.dual = std::sqrt(dual);
    a.eps = rule.dual_only ? a.dual : std::max(a.primal, a.dual);
  }
  rep.round = states.empty() ? 0 : states[0].round;
  rep.messages = bus.sent() - sent_before;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void prepare_context(ConsensusContext& ctx, const StepInstance& inst,
                     const std::vector<IslandedSolution>& islanded, const QpSettings& qp) {
  const int n = static_cast<int>(inst.mgs.size());
  if (static_cast<int>(islanded.size()) != n) throw InputError("one islanded solution per microgrid required");
  if (static_cast<int>(ctx.agents.size()) != n) {
    ctx.agents.clear();
    ctx.agents.reserve(n);
    for (int j = 0; j < n; ++j) ctx.agents.emplace_back(inst, j, islanded[j], qp);
  } else {
    for (int j = 0; j < n; ++j) ctx.agents[j].reset_problem(inst, islanded[j]);
  }
  const bool usable = ctx.warm && static_cast<int>(ctx.states.size()) == n &&
                      static_cast<int>(ctx.states[0].own.size()) == inst.steps();
  if (usable) {
    shift_states(ctx.states);
  } else {
    ctx.states.clear();
    for (int j = 0; j < n; ++j) ctx.states.push_back(AgentState::zero(inst.graph, j, inst.steps()));
  }
}

ConsensusResult collapse(const StepInstance& inst, const std::vector<AgentState>& states,
                         const std::vector<LocalResult>& last) {
  ConsensusResult out;
  const int n = static_cast<int>(states.size());
  const int steps = inst.steps();
  out.theta.assign(steps, std::vector<double>(n, 0.0));
  for (int h = 0; h < steps; ++h)
    for (int j = 0; j < n; ++j) out.theta[h][j] = states[j].own[h];
  for (int j = 0; j < n; ++j) {
    Trajectory t = last[j].plan;
    t.own_angle = states[j].own;
    for (int m : states[j].neighbors) t.replica_angle.push_back(states[m].own);
    for (int h = 0; h < steps; ++h) t.power[h].pcc = pcc_from_angles(inst.graph, j, out.theta[h]);
    out.mg_cost.push_back(horizon_cost(inst.mgs[j].spec, t, inst.mgs[j].forecast, inst.gamma));
    out.trajectories.push_back(std::move(t));
    out.cap_mu.push_back(last[j].mu);
  }
  for (int h = 0; h < steps; ++h) {
    out.transmission_cost += discount_power(inst.gamma, h) * transmission_cost(inst.graph, out.theta[h]);
  }
  out.total_cost = out.transmission_cost;
  for (double v : out.mg_cost) out.total_cost += v;
  return out;
}

}  // namespace detail

RoundReport al_round(std::vector<Agent>& agents, std::vector<AgentState>& states, MessageBus& bus,
                     double rho, double tau, int workers, std::vector<LocalResult>* last) {
  if (!(tau > 0.0 && tau < 0.5)) throw std::invalid_argument("tau must lie in (0, 0.5)");
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  detail::RoundRule rule;
  rule.rho = rho;
  rule.relax = tau;
  rule.dual_step = rho * tau;
  std::vector<LocalResult> local;
  return detail::consensus_round(agents, states, bus, rule, workers, last ? *last : local);
}

ConsensusResult run_consensus_al(const StepInstance& inst,
                                 const std::vector<IslandedSolution>& islanded,
                                 const AlSettings& settings, ConsensusContext* ctx, QpSettings qp) {
  if (!(settings.tau > 0.0 && settings.tau < 0.5)) throw std::invalid_argument("tau must lie in (0, 0.5)");
  if (!(settings.rho > 0.0)) throw std::invalid_argument("rho must be positive");
  ConsensusContext local;
  ConsensusContext& c = ctx ? *ctx : local;
  detail::prepare_context(c, inst, islanded, qp);
  MessageBus bus(inst.graph);
  std::vector<LocalResult> last;
  std::vector<TraceRow> trace;
  bool converged = false;
  int nu = 0;
  long per_round = 0;
  while (nu < settings.nu_max) {
    ++nu;
    RoundReport rep = al_round(c.agents, c.states, bus, settings.rho, settings.tau, settings.workers, &last);
    per_round = rep.messages;
    for (size_t j = 0; j < rep.agents.size(); ++j) {
      const auto& a = rep.agents[j];
      trace.push_back({nu, static_cast<int>(j), a.primal, a.dual, a.objective});
    }
    if (rep.max_eps() <= settings.eps_term) {
      converged = true;
      break;
    }
  }
  ConsensusResult out = detail::collapse(inst, c.states, last);
  out.iterations = nu;
  out.converged = converged;
  out.messages = bus.sent();
  out.messages_per_round = per_round;
  out.trace = std::move(trace);
  out.final_states = c.states;
  c.warm = true;
  return out;
}

}  // namespace emgrid
