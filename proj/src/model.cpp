#include "emgrid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace emgrid {

GridGraph::GridGraph(int num_nodes, std::vector<Line> lines)
    : num_nodes_(num_nodes), lines_(std::move(lines)), adjacency_(std::max(num_nodes, 0)) {
  if (num_nodes < 0) throw InputError("negative node count");
  for (int e = 0; e < static_cast<int>(lines_.size()); ++e) {
    const Line& l = lines_[e];
    if (l.a < 0 || l.a >= num_nodes || l.b < 0 || l.b >= num_nodes) {
      throw InputError("unknown node in line " + std::to_string(e));
    }
    if (l.a == l.b) throw InputError("self-loop at node " + std::to_string(l.a));
    adjacency_[l.a].push_back({l.b, e, l.susceptance, l.p_min, l.p_max, l.cost_weight});
    adjacency_[l.b].push_back({l.a, e, l.susceptance, -l.p_max, -l.p_min, l.cost_weight});
  }
  for (auto& adj : adjacency_) {
    std::stable_sort(adj.begin(), adj.end(),
                     [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }
}

std::span<const Neighbor> GridGraph::neighbors(int j) const {
  if (j < 0 || j >= num_nodes_) throw InputError("unknown node " + std::to_string(j));
  return adjacency_[j];
}

bool GridGraph::connected() const {
  if (num_nodes_ <= 1) return true;
  std::vector<bool> seen(num_nodes_, false);
  std::queue<int> open;
  open.push(0);
  seen[0] = true;
  int count = 1;
  while (!open.empty()) {
    int j = open.front();
    open.pop();
    for (const Neighbor& nb : adjacency_[j]) {
      if (!seen[nb.node]) {
        seen[nb.node] = true;
        ++count;
        open.push(nb.node);
      }
    }
  }
  return count == num_nodes_;
}

double storage_step(double energy, double power, double ts) { return energy - ts * power; }

bool PowerSet::contains(const UnitPowers& z, double tol) const {
  std::vector<double> flat;
  flat.insert(flat.end(), z.conv.begin(), z.conv.end());
  flat.insert(flat.end(), z.storage.begin(), z.storage.end());
  flat.insert(flat.end(), z.res.begin(), z.res.end());
  flat.push_back(z.pcc);
  if (flat.size() != bounds.size()) return false;
  double sum = 0.0;
  for (size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] < bounds[i].lo - tol || flat[i] > bounds[i].hi + tol) return false;
    sum += flat[i];
  }
  return std::abs(sum - balance_rhs) <= tol;
}

namespace {

void check_disturbance(const MicrogridSpec& mg, const MgDisturbance& w) {
  if (w.res.size() != mg.res.size() || static_cast<int>(w.load.size()) != mg.loads) {
    throw InputError("disturbance dimensions do not match microgrid " + std::to_string(mg.id));
  }
}

}  // namespace

PowerSet feasible_power_set(const MicrogridSpec& mg, const MgDisturbance& w_hat,
                            std::span<const int> delta) {
  if (delta.size() != mg.conv.size()) {
    throw InputError("switch vector length " + std::to_string(delta.size()) +
                     " does not match conventional unit count " + std::to_string(mg.conv.size()));
  }
  check_disturbance(mg, w_hat);
  PowerSet set;
  for (size_t c = 0; c < mg.conv.size(); ++c) {
    set.bounds.push_back({mg.conv[c].p_min * delta[c], mg.conv[c].p_max * delta[c]});
  }
  for (const StorageSpec& s : mg.storage) set.bounds.push_back({s.p_min, s.p_max});
  for (size_t r = 0; r < mg.res.size(); ++r) {
    set.bounds.push_back({0.0, std::min(mg.res[r].p_max, w_hat.res[r])});
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  set.bounds.push_back({-inf, inf});
  double load = 0.0;
  for (double w : w_hat.load) load += w;
  set.balance_rhs = -load;
  return set;
}

double mg_stage_cost(const MicrogridSpec& mg, const UnitPowers& z, std::span<const int> delta,
                     const MgDisturbance& w_hat) {
  double cost = 0.0;
  for (size_t c = 0; c < mg.conv.size(); ++c) {
    const auto& g = mg.conv[c];
    const double p = z.conv[c];
    cost += g.a_on * delta[c] + g.a_lin * p + g.a_quad * p * p;
  }
  for (size_t r = 0; r < mg.res.size(); ++r) {
    const double d = z.res[r] - w_hat.res[r];
    cost += mg.res[r].a_curtail * d * d;
  }
  for (size_t s = 0; s < mg.storage.size(); ++s) {
    cost += mg.storage[s].a_wear * z.storage[s] * z.storage[s];
  }
  cost += mg.pcc.a_price * z.pcc + mg.pcc.a_fee * std::abs(z.pcc);
  return cost;
}

UnitPowers mg_stage_cost_gradient(const MicrogridSpec& mg, const UnitPowers& z,
                                  const MgDisturbance& w_hat) {
  UnitPowers g;
  for (size_t c = 0; c < mg.conv.size(); ++c) {
    g.conv.push_back(mg.conv[c].a_lin + 2.0 * mg.conv[c].a_quad * z.conv[c]);
  }
  for (size_t s = 0; s < mg.storage.size(); ++s) {
    g.storage.push_back(2.0 * mg.storage[s].a_wear * z.storage[s]);
  }
  for (size_t r = 0; r < mg.res.size(); ++r) {
    g.res.push_back(2.0 * mg.res[r].a_curtail * (z.res[r] - w_hat.res[r]));
  }
  const double sign = z.pcc > 0.0 ? 1.0 : (z.pcc < 0.0 ? -1.0 : 0.0);
  g.pcc = mg.pcc.a_price + mg.pcc.a_fee * sign;
  return g;
}

double line_power(double susceptance, double theta_j, double theta_m) {
  return susceptance * (theta_j - theta_m);
}

double pcc_from_angles(const GridGraph& graph, int j, std::span<const double> theta) {
  double p = 0.0;
  for (const Neighbor& nb : graph.neighbors(j)) {
    p += line_power(nb.susceptance, theta[j], theta[nb.node]);
  }
  return p;
}

double transmission_cost(const GridGraph& graph, std::span<const double> theta) {
  double cost = 0.0;
  for (int j = 0; j < graph.num_nodes(); ++j) {
    for (const Neighbor& nb : graph.neighbors(j)) {
      const double p = line_power(nb.susceptance, theta[j], theta[nb.node]);
      cost += nb.cost_weight * p * p;
    }
  }
  return cost;
}

std::vector<double> transmission_cost_gradient(const GridGraph& graph,
                                               std::span<const double> theta) {
  std::vector<double> g(graph.num_nodes(), 0.0);
  for (int j = 0; j < graph.num_nodes(); ++j) {
    for (const Neighbor& nb : graph.neighbors(j)) {
      const double p = line_power(nb.susceptance, theta[j], theta[nb.node]);
      const double d = 2.0 * nb.cost_weight * p * nb.susceptance;
      g[j] += d;
      g[nb.node] -= d;
    }
  }
  return g;
}

double horizon_cost(const MicrogridSpec& mg, const Trajectory& traj, const MgForecast& forecast,
                    double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (size_t h = 0; h < traj.power.size(); ++h) {
    total += discount * mg_stage_cost(mg, traj.power[h], traj.delta[h], forecast[h]);
    discount *= gamma;
  }
  return total;
}

}  // namespace emgrid
