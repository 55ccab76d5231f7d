#include "emgrid/scenario.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace emgrid {

namespace {

class Collector {
 public:
  void check(bool ok, std::string where, std::string what) {
    if (!ok) out_.push_back({std::move(where), std::move(what)});
  }
  std::vector<Violation> take() { return std::move(out_); }

 private:
  std::vector<Violation> out_;
};

std::string unit_tag(const std::string& mg, const char* kind, size_t i) {
  return mg + "." + kind + "[" + std::to_string(i) + "]";
}

bool finite(double v) { return std::isfinite(v); }

void check_microgrid(Collector& c, const MicrogridSpec& mg, int index) {
  const std::string tag = "microgrid " + std::to_string(index + 1);
  for (size_t i = 0; i < mg.conv.size(); ++i) {
    const auto& g = mg.conv[i];
    const std::string t = unit_tag(tag, "conventional", i);
    c.check(finite(g.p_min) && finite(g.p_max), t, "non-finite power limit");
    c.check(g.p_min >= 0.0 && g.p_min <= g.p_max, t, "power limits must satisfy 0 <= p_min <= p_max");
    c.check(g.a_on > 0.0 && g.a_lin > 0.0 && g.a_quad > 0.0, t, "cost weights must be positive");
  }
  for (size_t i = 0; i < mg.storage.size(); ++i) {
    const auto& s = mg.storage[i];
    const std::string t = unit_tag(tag, "storage", i);
    c.check(finite(s.x_min) && finite(s.x_max) && finite(s.p_min) && finite(s.p_max), t,
            "non-finite storage limit");
    c.check(s.x_min >= 0.0 && s.x_min <= s.x_max, t, "energy limits must satisfy 0 <= x_min <= x_max");
    c.check(s.p_min <= s.p_max, t, "power limits must satisfy p_min <= p_max");
    c.check(s.a_wear > 0.0, t, "wear weight must be positive");
  }
  for (size_t i = 0; i < mg.res.size(); ++i) {
    const auto& r = mg.res[i];
    const std::string t = unit_tag(tag, "res", i);
    c.check(finite(r.p_max) && r.p_max >= 0.0, t, "renewable p_max must be >= 0");
    c.check(r.a_curtail > 0.0, t, "curtailment weight must be positive");
  }
  c.check(mg.loads >= 0, tag, "negative load count");
  c.check(mg.pcc.a_price > 0.0 && mg.pcc.a_fee > 0.0, tag + ".pcc", "PCC weights must be positive");
  c.check(mg.id == index, tag, "microgrid id does not match its node");
}

}  // namespace

std::vector<Violation> validate_scenario(const std::vector<MicrogridSpec>& specs,
                                         const GridGraph& graph, const DisturbanceSeries* series) {
  Collector c;
  c.check(static_cast<int>(specs.size()) == graph.num_nodes(), "grid",
          "node count " + std::to_string(graph.num_nodes()) + " does not match microgrid count " +
              std::to_string(specs.size()));
  for (size_t j = 0; j < specs.size(); ++j) check_microgrid(c, specs[j], static_cast<int>(j));

  std::map<std::pair<int, int>, int> seen;
  for (size_t e = 0; e < graph.lines().size(); ++e) {
    const Line& l = graph.lines()[e];
    const std::string t = "line " + std::to_string(l.a + 1) + "-" + std::to_string(l.b + 1);
    c.check(l.susceptance > 0.0 && finite(l.susceptance), t, "nonpositive susceptance");
    c.check(l.p_min <= 0.0 && l.p_max >= 0.0, t, "line limits must satisfy p_min <= 0 <= p_max");
    c.check(l.cost_weight > 0.0, t, "line cost weight must be positive");
    auto key = std::minmax(l.a, l.b);
    c.check(seen.emplace(std::pair{key.first, key.second}, static_cast<int>(e)).second, t,
            "duplicate line");
  }
  c.check(graph.connected(), "grid", "graph is not connected");

  if (series != nullptr) {
    for (size_t k = 0; k < series->size(); ++k) {
      const auto& row = (*series)[k];
      const std::string tk = "series[" + std::to_string(k) + "]";
      if (row.size() != specs.size()) {
        c.check(false, tk, "expected " + std::to_string(specs.size()) + " microgrids");
        continue;
      }
      for (size_t j = 0; j < specs.size(); ++j) {
        const std::string t = tk + ".mg" + std::to_string(j + 1);
        const auto& w = row[j];
        if (w.res.size() != specs[j].res.size() ||
            static_cast<int>(w.load.size()) != specs[j].loads) {
          c.check(false, t, "channel count does not match microgrid");
          continue;
        }
        for (double v : w.res) c.check(finite(v) && v >= 0.0, t, "res sign");
        for (double v : w.load) c.check(finite(v) && v <= 0.0, t, "load sign");
      }
    }
  }
  return c.take();
}

std::vector<Violation> validate_scenario(const Scenario& scenario, const DisturbanceSeries* series) {
  auto out = validate_scenario(scenario.microgrids, scenario.grid, series);
  Collector c;
  const auto& s = scenario.solver;
  c.check(s.rho > 0.0, "solver", "rho must be positive");
  c.check(s.tau > 0.0 && s.tau < 0.5, "solver", "tau must lie in (0, 0.5)");
  c.check(s.eps_term > 0.0, "solver", "eps_term must be positive");
  c.check(s.nu_max > 0, "solver", "nu_max must be positive");
  c.check(s.gamma > 0.0 && s.gamma <= 1.0, "solver", "gamma must lie in (0, 1]");
  c.check(s.ts > 0.0, "solver", "Ts must be positive");
  c.check(s.horizon >= 0, "solver", "H must be non-negative");
  c.check(s.dd_alpha0 > 0.0, "solver", "dd_alpha0 must be positive");
  c.check(s.dd_prox > 0.0, "solver", "dd_prox must be positive");
  c.check(scenario.initial_storage.size() == scenario.microgrids.size(), "initial_storage",
          "one entry per microgrid required");
  for (size_t j = 0; j < scenario.initial_storage.size() && j < scenario.microgrids.size(); ++j) {
    const auto& mg = scenario.microgrids[j];
    const auto& x0 = scenario.initial_storage[j];
    const std::string t = "initial_storage.mg" + std::to_string(j + 1);
    if (x0.size() != mg.storage.size()) {
      c.check(false, t, "one value per storage unit required");
      continue;
    }
    for (size_t i = 0; i < x0.size(); ++i) {
      c.check(x0[i] >= mg.storage[i].x_min && x0[i] <= mg.storage[i].x_max, t,
              "initial energy outside storage bounds");
    }
  }
  auto extra = c.take();
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

std::string format_violations(const std::vector<Violation>& violations) {
  std::ostringstream os;
  for (const auto& v : violations) os << v.where << ": " << v.what << "\n";
  return os.str();
}

}  // namespace emgrid
