#pragma once

#include <string>
#include <vector>

#include "emgrid/model.hpp"

namespace emgrid {

struct SolverSettings {
  double rho = 1e3;
  double tau = 0.3;
  double eps_term = 1e-5;
  int nu_max = 5000;
  double gamma = 1.0;
  double ts = 0.5;  // sampling time in hours
  int horizon = 12;
  double dd_alpha0 = 5e3;
  double dd_prox = 3e3;
  bool operator==(const SolverSettings&) const = default;
};

/// Realized disturbances: series[k][j] is microgrid j at time index k.
using DisturbanceSeries = std::vector<std::vector<MgDisturbance>>;

struct Scenario {
  std::string name;
  GridGraph grid;
  std::vector<MicrogridSpec> microgrids;  // microgrids[j] sits at node j
  SolverSettings solver;
  std::vector<std::vector<double>> initial_storage;  // per MG, per storage unit
  bool operator==(const Scenario&) const = default;

  int size() const { return static_cast<int>(microgrids.size()); }
};

struct Violation {
  std::string where;
  std::string what;
  bool operator==(const Violation&) const = default;
};

/// Checks every type invariant of the model, graph connectivity and
/// symmetry, and (when given) alignment and sign conventions of the series.
/// Never throws; an empty list means the inputs are valid.
std::vector<Violation> validate_scenario(const std::vector<MicrogridSpec>& specs,
                                         const GridGraph& graph,
                                         const DisturbanceSeries* series = nullptr);

std::vector<Violation> validate_scenario(const Scenario& scenario,
                                         const DisturbanceSeries* series = nullptr);

std::string format_violations(const std::vector<Violation>& violations);

}  // namespace emgrid
