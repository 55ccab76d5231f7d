#include "emgrid/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace emgrid {

std::string to_string(Controller c) {
  switch (c) {
    case Controller::islanded: return "islanded";
    case Controller::central: return "central";
    case Controller::distributed: return "distributed";
    case Controller::dd: return "dd";
  }
  return "unknown";
}

Controller parse_controller(const std::string& name) {
  if (name == "islanded") return Controller::islanded;
  if (name == "central") return Controller::central;
  if (name == "distributed") return Controller::distributed;
  if (name == "dd") return Controller::dd;
  throw InputError("unknown controller '" + name + "' (islanded, central, distributed, dd)");
}

MgForecast persistence_forecast(const DisturbanceSeries& series, int j, int k, int horizon) {
  if (k < 1 || k - 1 >= static_cast<int>(series.size()))
    throw InputError("persistence forecast at k = " + std::to_string(k) +
                     " needs a measurement at time index " + std::to_string(k - 1));
  if (j < 0 || j >= static_cast<int>(series[k - 1].size()))
    throw InputError("persistence forecast: no microgrid " + std::to_string(j + 1));
  return MgForecast(static_cast<size_t>(horizon) + 1, series[k - 1][j]);
}

PlantStep apply_plant_step(const MicrogridSpec& mg, const UnitPowers& planned,
                           const std::vector<double>& energy, const MgDisturbance& realized,
                           double ts) {
  PlantStep out;
  out.realized = planned;
  double net = planned.pcc;
  for (double p : planned.conv) net += p;
  for (double p : planned.storage) net += p;
  for (size_t r = 0; r < mg.res.size(); ++r) {
    double p = std::min({planned.res[r], realized.res[r], mg.res[r].p_max});
    out.realized.res[r] = std::max(p, 0.0);
    net += out.realized.res[r];
  }
  for (double l : realized.load) net += l;

  // net < 0: supply short of demand, storage has to discharge more
  double missing = -net;
  out.energy.resize(mg.storage.size());
  for (size_t s = 0; s < mg.storage.size(); ++s) {
    const auto& st = mg.storage[s];
    double lo = std::max(st.p_min, (energy[s] - st.x_max) / ts);
    double hi = std::min(st.p_max, (energy[s] - st.x_min) / ts);
    double p0 = planned.storage[s];
    double p = std::clamp(p0 + missing, lo, std::max(lo, hi));
    missing -= p - p0;
    out.realized.storage[s] = p;
    out.energy[s] = storage_step(energy[s], p, ts);
  }
  out.imbalance = missing;
  return out;
}

bool ClosedLoopResult::all_converged() const {
  return std::all_of(steps.begin(), steps.end(), [](const StepRecord& s) { return s.converged; });
}

namespace {

double local_transmission(const GridGraph& g, int j, const std::vector<double>& theta) {
  double c = 0.0;
  for (const auto& nb : g.neighbors(j)) {
    double f = line_power(nb.susceptance, theta[j], theta[nb.node]);
    c += nb.cost_weight * f * f;
  }
  return c;
}

MgForecast foresight(const DisturbanceSeries& series, int j, int k, int horizon) {
  MgForecast f;
  int last = static_cast<int>(series.size()) - 1;
  for (int h = 0; h <= horizon; ++h) f.push_back(series[std::min(k + h, last)][j]);
  return f;
}

}  // namespace

namespace {

void check_series(const Scenario& sc, const DisturbanceSeries& series, int last) {
  if (static_cast<int>(series.size()) <= last)
    throw InputError("disturbance trace has " + std::to_string(series.size()) +
                     " time indices, " + std::to_string(last + 1) + " needed");
  for (size_t k = 0; k < series.size(); ++k)
    if (static_cast<int>(series[k].size()) != sc.size())
      throw InputError("disturbance trace: time index " + std::to_string(k) + " has " +
                       std::to_string(series[k].size()) + " microgrids, expected " +
                       std::to_string(sc.size()));
}

}  // namespace

StepPlan plan_step(const Scenario& sc, const DisturbanceSeries& series, int k,
                   const std::vector<std::vector<double>>& energy,
                   const ClosedLoopSettings& set, ConsensusContext* ctx) {
  const int n = sc.size();
  const auto& sol = sc.solver;
  if (k < 1) throw InputError("instant k = " + std::to_string(k) + " has no measurement history");
  check_series(sc, series, k - 1);
  if (static_cast<int>(energy.size()) != n)
    throw InputError("storage state has " + std::to_string(energy.size()) + " microgrids");

  IslandedOptions iopt;
  iopt.gamma = sol.gamma;
  iopt.ts = sol.ts;
  iopt.qp = set.qp;
  CentralOptions copt;
  copt.qp = set.qp;
  AlSettings al{sol.rho, sol.tau, sol.eps_term, sol.nu_max, set.workers};
  DdSettings dd{sol.dd_alpha0, sol.dd_prox, sol.eps_term, sol.nu_max, set.workers};

  StepInstance inst;
  inst.graph = sc.grid;
  inst.gamma = sol.gamma;
  inst.ts = sol.ts;
  for (int j = 0; j < n; ++j) {
    MgInstance mi;
    mi.spec = sc.microgrids[j];
    mi.forecast = set.perfect_foresight ? foresight(series, j, k, sol.horizon)
                                        : persistence_forecast(series, j, k, sol.horizon);
    mi.x0 = energy[j];
    inst.mgs.push_back(std::move(mi));
  }

  StepPlan out;
  out.theta.assign(sol.horizon + 1, std::vector<double>(n, 0.0));
  try {
    out.islanded = solve_islanded_all(inst.mgs, iopt);
    switch (set.controller) {
      case Controller::islanded:
        for (auto& r : out.islanded) {
          out.plans.push_back(r.z_star);
          out.mg_cost.push_back(r.v_star);
        }
        break;
      case Controller::central: {
        auto c = solve_central_convex(inst, out.islanded, copt);
        out.plans = std::move(c.trajectories);
        out.theta = std::move(c.theta);
        out.mg_cost = std::move(c.mg_cost);
        out.kkt_residual = std::max(c.status.primal_residual, c.status.dual_residual);
        out.converged = c.status.ok() && c.caps_converged;
        break;
      }
      case Controller::distributed:
      case Controller::dd: {
        auto d = set.controller == Controller::distributed
                     ? run_consensus_al(inst, out.islanded, al, ctx, set.qp)
                     : run_dual_decomposition(inst, out.islanded, dd, ctx, set.qp);
        out.plans = std::move(d.trajectories);
        out.theta = std::move(d.theta);
        out.mg_cost = std::move(d.mg_cost);
        out.iterations = d.iterations;
        out.converged = d.converged;
        out.messages = d.messages;
        out.trace = std::move(d.trace);
        break;
      }
    }
  } catch (const SolverError& e) {
    throw SolverError("step " + std::to_string(k) + ": " + e.what());
  } catch (const CapError& e) {
    throw SolverError("step " + std::to_string(k) + ": " + e.what());
  }
  return out;
}

ClosedLoopResult closed_loop_run(const Scenario& sc, const DisturbanceSeries& series,
                                 const ClosedLoopSettings& set) {
  const int n = sc.size();
  if (set.steps < 1) throw InputError("closed loop needs at least one step");
  check_series(sc, series, set.steps);

  ConsensusContext ctx;
  std::vector<std::vector<double>> energy = sc.initial_storage;
  energy.resize(n);
  for (int j = 0; j < n; ++j) energy[j].resize(sc.microgrids[j].storage.size(), 0.0);

  ClosedLoopResult out;
  out.controller = set.controller;
  out.mg_cost.assign(n, 0.0);

  for (int s = 0; s < set.steps; ++s) {
    const int k = s + 1;
    StepPlan plan = plan_step(sc, series, k, energy, set, &ctx);
    if (set.plan_filter) set.plan_filter(k, plan.plans);

    StepRecord rec;
    rec.step = k;
    rec.iterations = plan.iterations;
    rec.converged = plan.converged;
    rec.messages = plan.messages;
    rec.plan_cost = plan.mg_cost;
    rec.kkt_residual = plan.kkt_residual;
    for (const auto& isl : plan.islanded) rec.islanded_cost.push_back(isl.v_star);
    if (set.keep_traces) rec.trace = std::move(plan.trace);
    const auto& plans = plan.plans;
    for (int j = 0; j < n; ++j) {
      const auto& spec = sc.microgrids[j];
      const auto& w = series[k][j];
      auto ps = apply_plant_step(spec, plans[j].power[0], energy[j], w, sc.solver.ts);
      double c = mg_stage_cost(spec, ps.realized, plans[j].delta[0], w) +
                 local_transmission(sc.grid, j, plan.theta[0]);
      double used = 0.0, avail = 0.0;
      for (double p : ps.realized.res) used += p;
      for (double a : w.res) avail += a;
      rec.planned.push_back(plans[j].power[0]);
      rec.realized.push_back(ps.realized);
      rec.delta.push_back(plans[j].delta[0]);
      rec.energy.push_back(ps.energy);
      rec.imbalance.push_back(ps.imbalance);
      rec.cost.push_back(c);
      rec.res_used.push_back(used);
      rec.res_available.push_back(avail);
      out.mg_cost[j] += c;
      out.total_cost += c;
      energy[j] = ps.energy;
    }
    out.steps.push_back(std::move(rec));
  }
  return out;
}

double kpi_renewable(const ClosedLoopResult& r, int mg) {
  double used = 0.0, avail = 0.0;
  for (const auto& s : r.steps) {
    for (size_t j = 0; j < s.res_used.size(); ++j) {
      if (mg >= 0 && static_cast<int>(j) != mg) continue;
      used += s.res_used[j];
      avail += s.res_available[j];
    }
  }
  if (avail <= 0.0) return 100.0;
  return 100.0 * used / avail;
}

}  // namespace emgrid
