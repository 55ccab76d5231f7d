#pragma once

#include <random>

#include "emgrid/horizon_qp.hpp"
#include "emgrid/islanded.hpp"

/// Random single-microgrid instance with `units` generators and H+1 steps.
inline emgrid::MgInstance random_mg_instance(int seed, int units, int steps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  emgrid::MgInstance inst;
  auto& mg = inst.spec;
  for (int c = 0; c < units; ++c) {
    const double pmin = 2.0 + 6.0 * u(rng);
    mg.conv.push_back({pmin, pmin + 10.0 + 20.0 * u(rng), 0.5 + 4.0 * u(rng), 0.1 + 0.4 * u(rng),
                       0.002 + 0.02 * u(rng)});
  }
  mg.storage = {{2.0, 20.0 + 20.0 * u(rng), -10.0, 10.0, 0.001 + 0.01 * u(rng)}};
  mg.res = {{30.0, 0.005 + 0.03 * u(rng)}};
  mg.loads = 1;
  mg.pcc = {0.05, 0.02};
  inst.x0 = {2.0 + 10.0 * u(rng)};
  for (int h = 0; h < steps; ++h) {
    inst.forecast.push_back({{25.0 * u(rng)}, {-(5.0 + 25.0 * u(rng))}});
  }
  return inst;
}

struct EnumerationResult {
  bool feasible = false;
  double cost = 0.0;
  std::vector<emgrid::SwitchState> delta;
};

/// Exhaustive oracle: every binary schedule solved with fixed switches.
inline EnumerationResult enumerate_schedules(const emgrid::MgInstance& inst,
                                             const emgrid::StageOptions& opt,
                                             const emgrid::SwitchBounds* within = nullptr) {
  const int steps = static_cast<int>(inst.forecast.size());
  const int units = static_cast<int>(inst.spec.conv.size());
  const int bits = steps * units;
  EnumerationResult best;
  emgrid::QpSolver solver(opt.qp);
  for (long mask = 0; mask < (1L << bits); ++mask) {
    std::vector<emgrid::SwitchState> s(steps, emgrid::SwitchState(units));
    bool ok = true;
    for (int h = 0; h < steps; ++h) {
      for (int c = 0; c < units; ++c) {
        s[h][c] = (mask >> (h * units + c)) & 1;
        if (within && (s[h][c] < within->lo[h][c] || s[h][c] > within->hi[h][c])) ok = false;
      }
    }
    if (!ok) continue;
    auto r = emgrid::solve_fixed_binary(inst, s, opt, &solver);
    if (r.status.code == emgrid::SolveStatus::Code::infeasible) continue;
    if (!best.feasible || r.cost < best.cost) {
      best.feasible = true;
      best.cost = r.cost;
      best.delta = s;
    }
  }
  return best;
}
