#pragma once

#include <random>

#include "emgrid/model.hpp"

/// One conventional generator, storage, RES and load; parameters in the
/// range of the bundled scenario.
inline emgrid::MicrogridSpec one_of_each(int id) {
  emgrid::MicrogridSpec mg;
  mg.id = id;
  mg.conv = {{5.0, 40.0, 2.0, 0.3, 0.005}};
  mg.storage = {{5.0, 50.0, -20.0, 20.0, 0.005}};
  mg.res = {{50.0, 0.01}};
  mg.loads = 1;
  mg.pcc = {0.05, 0.02};
  return mg;
}

/// Ring 1-2-3-4-1.
inline emgrid::GridGraph four_node_graph(double y = 200.0, double limit = 40.0) {
  return emgrid::GridGraph(4, {{0, 1, y, -limit, limit, 0.0005},
                               {1, 2, y, -limit, limit, 0.0005},
                               {2, 3, y, -limit, limit, 0.0005},
                               {3, 0, y, -limit, limit, 0.0005}});
}

inline emgrid::UnitPowers random_powers(const emgrid::MicrogridSpec& mg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  emgrid::UnitPowers z;
  for (const auto& c : mg.conv) z.conv.push_back(c.p_min + u(rng) * (c.p_max - c.p_min));
  for (const auto& s : mg.storage) z.storage.push_back(s.p_min + u(rng) * (s.p_max - s.p_min));
  for (const auto& r : mg.res) z.res.push_back(u(rng) * r.p_max);
  z.pcc = -30.0 + 60.0 * u(rng);
  return z;
}
