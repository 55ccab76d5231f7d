#include "emgrid/islanded.hpp"

#include <cmath>
#include <queue>
#include <set>

#include "emgrid/parallel.hpp"

namespace emgrid {

FixedBinaryResult solve_fixed_binary(const MgInstance& mg, const std::vector<SwitchState>& delta,
                                     const StageOptions& opt, QpSolver* solver) {
  const HorizonProblem prob =
      build_islanded_problem(mg, SwitchBounds::fixed(delta), opt.gamma, opt.ts);
  QpSolver local(opt.qp);
  QpSolver& s = solver ? *solver : local;
  const QpSolution sol = s.solve(prob.qp);
  FixedBinaryResult out;
  out.status = sol.status;
  out.x = sol.x;
  if (sol.status.code != SolveStatus::Code::infeasible) {
    out.traj = extract_trajectory(prob, 0, sol.x);
    out.cost = prob.costs[0].value(sol.x);
  }
  return out;
}

namespace {

struct Relaxation {
  bool feasible = false;
  double bound = 0.0;
  std::vector<std::vector<double>> delta;
  WarmStart point;
};

// Interval test on the aggregate storage: true only when no storage
// trajectory can balance every step under the given switch bounds. A
// necessary condition, so nodes it rejects are infeasible.
bool surely_infeasible(const MgInstance& mg, const SwitchBounds& b, double ts) {
  const MicrogridSpec& spec = mg.spec;
  double p_lo = 0.0, p_hi = 0.0, x_lo = 0.0, x_hi = 0.0, e = 0.0;
  for (size_t s = 0; s < spec.storage.size(); ++s) {
    p_lo += spec.storage[s].p_min;
    p_hi += spec.storage[s].p_max;
    x_lo += spec.storage[s].x_min;
    x_hi += spec.storage[s].x_max;
    e += mg.x0[s];
  }
  double e_lo = e, e_hi = e;
  for (size_t h = 0; h < mg.forecast.size(); ++h) {
    const MgDisturbance& w = mg.forecast[h];
    double c_lo = 0.0, c_hi = 0.0, r_hi = 0.0, load = 0.0;
    for (size_t c = 0; c < spec.conv.size(); ++c) {
      c_lo += spec.conv[c].p_min * b.lo[h][c];
      c_hi += spec.conv[c].p_max * b.hi[h][c];
    }
    for (size_t r = 0; r < spec.res.size(); ++r)
      r_hi += std::max(std::min(spec.res[r].p_max, w.res[r]), 0.0);
    for (double l : w.load) load += l;
    // storage covers what the other units leave: load + conv + res + storage = 0
    const double lo = std::max(p_lo, -load - c_hi - r_hi);
    const double hi = std::min(p_hi, -load - c_lo);
    const double margin = 1e-7 * (1.0 + std::abs(lo) + std::abs(hi));
    if (lo > hi + margin) return true;
    e_lo = std::max(x_lo, e_lo - ts * hi);
    e_hi = std::min(x_hi, e_hi - ts * lo);
    if (e_lo > e_hi + 1e-7 * (1.0 + std::abs(e_lo))) return true;
  }
  return false;
}

// Moves the switch bounds of a problem built with keep_layout in place.
void set_switch_bounds(HorizonProblem& prob, const MicrogridSpec& spec, const SwitchBounds& b) {
  const MgLayout& L = prob.mgs[0];
  for (int h = 0; h < prob.steps; ++h) {
    for (size_t c = 0; c < spec.conv.size(); ++c) {
      const int d = L.delta[h][c];
      prob.qp.lower[d] = b.lo[h][c];
      prob.qp.upper[d] = b.hi[h][c];
      prob.qp.upper[L.conv[h][c]] = spec.conv[c].p_max * b.hi[h][c];
    }
  }
}

// `parent` warm-starts the solve: a child differs from it in one switch.
Relaxation relax(HorizonProblem& prob, const MicrogridSpec& spec, const SwitchBounds& b,
                 QpSolver& solver, const WarmStart* parent = nullptr) {
  set_switch_bounds(prob, spec, b);
  const QpSolution sol = solver.solve(prob.qp, parent);
  Relaxation r;
  if (sol.status.code == SolveStatus::Code::infeasible) return r;
  r.feasible = true;
  r.point = {sol.x, sol.y_eq, sol.y_box};
  r.bound = sol.objective;
  r.delta = switch_values(prob, 0, sol.x);
  return r;
}

bool smaller_schedule(const std::vector<std::vector<double>>& lo,
                      const std::vector<SwitchState>& sched) {
  for (size_t h = 0; h < lo.size(); ++h)
    for (size_t c = 0; c < lo[h].size(); ++c)
      if (lo[h][c] != sched[h][c]) return lo[h][c] < sched[h][c];
  return false;
}

struct QueueEntry {
  double bound;
  long seq;
  int depth;
  SwitchBounds bounds;
  std::vector<std::vector<double>> delta;
  WarmStart point;
};

struct WorseFirst {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

}  // namespace

IslandedSolution solve_islanded(const MgInstance& mg, const IslandedOptions& opt) {
  const int steps = static_cast<int>(mg.forecast.size());
  const int units = static_cast<int>(mg.spec.conv.size());
  // every node and every rounded schedule only moves bounds of one program
  SwitchBounds root_bounds = SwitchBounds::relaxed(steps, units);
  root_bounds.keep_layout = true;
  HorizonProblem prob = build_islanded_problem(mg, root_bounds, opt.gamma, opt.ts);
  QpSolver solver(opt.qp);
  IslandedSolution best;
  double incumbent = std::numeric_limits<double>::infinity();

  // costs this close count as equal; the lexicographically smallest schedule
  // wins, so the choice does not flip on solver noise
  auto tie_tol = [](double v) { return std::isfinite(v) ? 1e-7 * (1.0 + std::abs(v)) : 0.0; };
  std::set<std::vector<SwitchState>> tried;
  auto try_schedule = [&](const std::vector<SwitchState>& sched, const WarmStart* warm) {
    if (!tried.insert(sched).second) return;
    ++best.nodes;
    const SwitchBounds fixed = SwitchBounds::fixed(sched);
    if (surely_infeasible(mg, fixed, opt.ts)) return;
    set_switch_bounds(prob, mg.spec, fixed);
    const QpSolution sol = solver.solve(prob.qp, warm);
    if (sol.status.code == SolveStatus::Code::infeasible) return;
    const double cost = prob.costs[0].value(sol.x);
    const bool tied = std::abs(cost - incumbent) <= tie_tol(incumbent);
    if ((!tied && cost < incumbent) || (tied && sched < best.delta_star)) {
      incumbent = cost;
      best.delta_star = sched;
      best.z_star = extract_trajectory(prob, 0, sol.x);
      best.z_star.delta = sched;
      best.v_star = cost;
    }
  };
  auto rounded = [&](const std::vector<std::vector<double>>& d) {
    std::vector<SwitchState> s(steps, SwitchState(units, 0));
    for (int h = 0; h < steps; ++h)
      for (int c = 0; c < units; ++c) s[h][c] = d[h][c] >= 0.5 ? 1 : 0;
    return s;
  };
  // a node is dropped unless it can beat the incumbent or tie it with a
  // smaller schedule; its smallest schedule has every free switch off
  auto prune = [&](double bound, const SwitchBounds& b) {
    if (bound > incumbent + tie_tol(incumbent)) return true;
    if (bound < incumbent - tie_tol(incumbent)) return false;
    return !smaller_schedule(b.lo, best.delta_star);
  };

  Relaxation root = relax(prob, mg.spec, root_bounds, solver);
  ++best.nodes;
  if (!root.feasible) {
    throw SolverError("islanded problem of microgrid " + std::to_string(mg.spec.id + 1) +
                      " is infeasible with every generator available");
  }
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, WorseFirst> open;
  long seq = 0;
  open.push({root.bound, seq++, 0, root_bounds, root.delta, std::move(root.point)});

  while (!open.empty()) {
    QueueEntry node = open.top();
    open.pop();
    if (prune(node.bound, node.bounds)) continue;
    if (opt.record_nodes) best.explored.push_back({node.bounds, node.bound});

    // most fractional entry; ties go to the lowest unit, then earliest step
    int bc = -1, bh = -1;
    double frac = opt.integrality_tol;
    for (int c = 0; c < units; ++c) {
      for (int h = 0; h < steps; ++h) {
        if (node.bounds.lo[h][c] == node.bounds.hi[h][c]) continue;
        const double v = node.delta[h][c];
        const double f = std::min(v, 1.0 - v);
        if (f > frac) {
          frac = f;
          bc = c;
          bh = h;
        }
      }
    }
    if (bc < 0 || node.depth % 4 == 0) try_schedule(rounded(node.delta), &node.point);
    if (bc < 0) continue;  // integral relaxation: rounding was exact

    for (int value : {0, 1}) {
      SwitchBounds child = node.bounds;
      child.lo[bh][bc] = child.hi[bh][bc] = value;
      ++best.nodes;
      if (surely_infeasible(mg, child, opt.ts)) continue;
      Relaxation r = relax(prob, mg.spec, child, solver, &node.point);
      if (!r.feasible || prune(r.bound, child)) continue;
      open.push({r.bound, seq++, node.depth + 1, std::move(child), std::move(r.delta),
                  std::move(r.point)});
    }
  }
  if (!std::isfinite(incumbent)) {
    throw SolverError("no feasible switch schedule found for microgrid " +
                      std::to_string(mg.spec.id + 1));
  }
  return best;
}

std::vector<IslandedSolution> solve_islanded_all(const std::vector<MgInstance>& mgs,
                                                 const IslandedOptions& opt) {
  std::vector<IslandedSolution> out(mgs.size());
  parallel_for(static_cast<int>(mgs.size()), [&](int j) { out[j] = solve_islanded(mgs[j], opt); });
  return out;
}

}  // namespace emgrid
