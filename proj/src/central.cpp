#include "emgrid/central.hpp"

#include <cmath>

namespace emgrid {

namespace {

CentralSolution extract_central(const StepInstance& inst, const HorizonProblem& prob,
                                const QpSolution& sol) {
  CentralSolution out;
  const auto& net = *prob.central;
  const int n = inst.graph.num_nodes();
  for (int h = 0; h < prob.steps; ++h) {
    std::vector<double> th(n), fl(net.flow[h].size());
    for (int j = 0; j < n; ++j) th[j] = sol.x[net.theta[h][j]];
    for (size_t e = 0; e < fl.size(); ++e) fl[e] = sol.x[net.flow[h][e]];
    out.theta.push_back(std::move(th));
    out.flow.push_back(std::move(fl));
  }
  for (int j = 0; j < n; ++j) {
    Trajectory t = extract_trajectory(prob, j, sol.x);
    for (int h = 0; h < prob.steps; ++h) {
      t.own_angle.push_back(out.theta[h][j]);
      t.power[h].pcc = pcc_from_angles(inst.graph, j, out.theta[h]);
    }
    out.trajectories.push_back(std::move(t));
    out.mg_cost.push_back(prob.costs[j].value(sol.x));
  }
  for (int h = 0; h < prob.steps; ++h) {
    out.transmission_cost += discount_power(inst.gamma, h) * transmission_cost(inst.graph, out.theta[h]);
  }
  out.total_cost = out.transmission_cost;
  for (double v : out.mg_cost) out.total_cost += v;
  out.status = sol.status;
  out.x = sol.x;
  return out;
}

}  // namespace

HorizonProblem build_capped_central(const StepInstance& inst,
                                    const std::vector<IslandedSolution>& islanded,
                                    std::vector<QuadCap>& caps) {
  if (islanded.size() != inst.mgs.size()) {
    throw InputError("one islanded solution per microgrid required");
  }
  std::vector<SwitchBounds> sw;
  for (const auto& s : islanded) sw.push_back(SwitchBounds::fixed(s.delta_star));
  HorizonProblem prob = build_central_problem(inst.graph, inst.mgs, sw, inst.gamma, inst.ts);
  caps = prob.costs;
  for (size_t j = 0; j < caps.size(); ++j) caps[j].level = islanded[j].v_star;
  return prob;
}

CentralSolution solve_central_convex(const StepInstance& inst,
                                     const std::vector<IslandedSolution>& islanded,
                                     const CentralOptions& opt, QpSolver* solver,
                                     std::vector<double> mu_start) {
  std::vector<QuadCap> caps;
  const HorizonProblem prob = build_capped_central(inst, islanded, caps);
  QpSolver local(opt.qp);
  QpSolver& s = solver ? *solver : local;
  MultiCapSolution mc;
  try {
    mc = solve_qp_with_caps(s, prob.qp, caps, opt.caps, std::move(mu_start));
  } catch (const CapError& e) {
    throw SolverError(std::string("internal error: capped central program failed: ") + e.what());
  }
  if (mc.qp.status.code == SolveStatus::Code::infeasible) {
    throw SolverError("internal error: central program reported infeasible");
  }
  CentralSolution out = extract_central(inst, prob, mc.qp);
  out.mu = mc.mu;
  out.qp_solves = mc.qp_solves;
  out.caps_converged = mc.converged;
  return out;
}

CentralSolution solve_central_fixed(const StepInstance& inst,
                                    const std::vector<std::vector<SwitchState>>& schedules,
                                    const CentralOptions& opt, QpSolver* solver) {
  std::vector<SwitchBounds> sw;
  for (const auto& s : schedules) sw.push_back(SwitchBounds::fixed(s));
  const HorizonProblem prob = build_central_problem(inst.graph, inst.mgs, sw, inst.gamma, inst.ts);
  QpSolver local(opt.qp);
  QpSolver& s = solver ? *solver : local;
  const QpSolution sol = s.solve(prob.qp);
  CentralSolution out;
  if (sol.status.code == SolveStatus::Code::infeasible) {
    out.status = sol.status;
    return out;
  }
  out = extract_central(inst, prob, sol);
  out.qp_solves = 1;
  return out;
}

CentralMiqpSolution solve_central_miqp_small(const StepInstance& inst, long limit,
                                             const CentralOptions& opt) {
  const int steps = inst.steps();
  int bits = 0;
  for (const auto& m : inst.mgs) bits += steps * static_cast<int>(m.spec.conv.size());
  if (bits > 62 || (1L << bits) > limit) {
    throw InputError("instance too large for enumeration: 2^" + std::to_string(bits) +
                     " switch combinations exceed the limit of " + std::to_string(limit));
  }
  const long total = 1L << bits;
  CentralMiqpSolution best;
  best.combinations = total;
  bool found = false;
  QpSolver solver(opt.qp);
  for (long code = 0; code < total; ++code) {
    // the first schedule entry is the most significant bit, so codes run in
    // lexicographic order of the schedule
    std::vector<std::vector<SwitchState>> sched;
    int bit = bits - 1;
    for (const auto& m : inst.mgs) {
      std::vector<SwitchState> s(steps, SwitchState(m.spec.conv.size()));
      for (int h = 0; h < steps; ++h)
        for (auto& d : s[h]) d = (code >> bit--) & 1;
      sched.push_back(std::move(s));
    }
    CentralSolution sol = solve_central_fixed(inst, sched, opt, &solver);
    if (sol.status.code == SolveStatus::Code::infeasible) continue;
    const double c = sol.total_cost;
    if (!found || c < best.solution.total_cost - 1e-12 * (1.0 + std::abs(c))) {
      best.solution = std::move(sol);
      best.schedules = std::move(sched);
      found = true;
    }
  }
  if (!found) throw SolverError("no feasible joint switch schedule");
  return best;
}

Vector stacked_islanded_point(const HorizonProblem& central,
                              const std::vector<IslandedSolution>& islanded) {
  Vector x = Vector::Zero(central.qp.num_vars());
  for (size_t j = 0; j < islanded.size(); ++j) {
    const MgLayout& L = central.mgs[j];
    const Trajectory& t = islanded[j].z_star;
    for (int h = 0; h < central.steps; ++h) {
      for (size_t c = 0; c < L.conv[h].size(); ++c) x[L.conv[h][c]] = t.power[h].conv[c];
      for (size_t s = 0; s < L.storage[h].size(); ++s) {
        x[L.storage[h][s]] = t.power[h].storage[s];
        x[L.energy[h][s]] = t.energy[h + 1][s];
      }
      for (size_t r = 0; r < L.res[h].size(); ++r) x[L.res[h][r]] = t.power[h].res[r];
    }
  }
  return x;
}

PointCheck check_islanded_point(const StepInstance& inst,
                                const std::vector<IslandedSolution>& islanded) {
  std::vector<QuadCap> caps;
  const HorizonProblem prob = build_capped_central(inst, islanded, caps);
  const Vector x = stacked_islanded_point(prob, islanded);
  PointCheck pc;
  if (prob.qp.num_eq() > 0) pc.equality = (prob.qp.A_eq * x - prob.qp.b_eq).lpNorm<Eigen::Infinity>();
  for (int i = 0; i < x.size(); ++i) {
    pc.bounds = std::max({pc.bounds, prob.qp.lower[i] - x[i], x[i] - prob.qp.upper[i]});
  }
  for (const auto& c : caps) pc.cap_excess.push_back(c.value(x) - c.level);
  return pc;
}

}  // namespace emgrid
