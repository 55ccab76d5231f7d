#include "emgrid/horizon_qp.hpp"

#include <cmath>
#include <limits>

namespace emgrid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Triplet = Eigen::Triplet<double>;

/// Quadratic form 1/2 x'Px + q'x + c accumulated term by term.
class QuadFormBuilder {
 public:
  void square(int i, double w) { p_.emplace_back(i, i, 2.0 * w); }
  void linear(int i, double c) { q_.emplace_back(i, c); }
  void constant(double c) { c_ += c; }

  void build(int n, SparseMatrix& P, Vector& q, double& c) const {
    P.resize(n, n);
    P.setFromTriplets(p_.begin(), p_.end());
    q = Vector::Zero(n);
    for (const auto& [i, v] : q_) q[i] += v;
    c = c_;
  }

 private:
  std::vector<Triplet> p_;
  std::vector<std::pair<int, double>> q_;
  double c_ = 0.0;
};

class QpAssembler {
 public:
  int add_var(double lo, double hi) {
    lower_.push_back(lo);
    upper_.push_back(hi);
    return static_cast<int>(lower_.size()) - 1;
  }
  void add_eq(const std::vector<std::pair<int, double>>& terms, double rhs) {
    const int r = static_cast<int>(rhs_.size());
    for (const auto& [i, v] : terms) {
      if (v != 0.0) a_.emplace_back(r, i, v);
    }
    rhs_.push_back(rhs);
  }
  QuadFormBuilder& objective() { return obj_; }
  int num_vars() const { return static_cast<int>(lower_.size()); }

  QuadProgram build() const {
    QuadProgram qp;
    const int n = num_vars();
    obj_.build(n, qp.P, qp.q, qp.constant);
    qp.A_eq.resize(static_cast<int>(rhs_.size()), n);
    qp.A_eq.setFromTriplets(a_.begin(), a_.end());
    qp.b_eq = Eigen::Map<const Vector>(rhs_.data(), static_cast<int>(rhs_.size()));
    qp.lower = Eigen::Map<const Vector>(lower_.data(), n);
    qp.upper = Eigen::Map<const Vector>(upper_.data(), n);
    return qp;
  }

 private:
  std::vector<double> lower_, upper_, rhs_;
  std::vector<Triplet> a_;
  QuadFormBuilder obj_;
};

/// Adds a cost term to the objective and to the microgrid's own cost form.
struct CostSink {
  QuadFormBuilder& obj;
  QuadFormBuilder& own;
  void square(int i, double w) {
    obj.square(i, w);
    own.square(i, w);
  }
  void linear(int i, double c) {
    obj.linear(i, c);
    own.linear(i, c);
  }
  void constant(double c) {
    obj.constant(c);
    own.constant(c);
  }
};

MgLayout add_microgrid(QpAssembler& as, QuadFormBuilder& own_cost, const MgInstance& inst,
                       const SwitchBounds& sw, double gamma, double ts, bool with_pcc) {
  const MicrogridSpec& mg = inst.spec;
  const int steps = static_cast<int>(inst.forecast.size());
  if (static_cast<int>(sw.lo.size()) != steps || static_cast<int>(sw.hi.size()) != steps) {
    throw InputError("switch schedule length does not match the horizon");
  }
  if (inst.x0.size() != mg.storage.size()) {
    throw InputError("initial storage size does not match microgrid " + std::to_string(mg.id));
  }
  CostSink cost{as.objective(), own_cost};
  MgLayout L;
  L.switches = sw;
  L.x0 = inst.x0;
  L.conv.resize(steps);
  L.delta.resize(steps);
  L.storage.resize(steps);
  L.res.resize(steps);
  L.energy.resize(steps);
  L.pcc_pos.assign(steps, -1);
  L.pcc_neg.assign(steps, -1);

  for (int h = 0; h < steps; ++h) {
    const double g = discount_power(gamma, h);
    const MgDisturbance& w = inst.forecast[h];
    if (w.res.size() != mg.res.size() || static_cast<int>(w.load.size()) != mg.loads) {
      throw InputError("forecast dimensions do not match microgrid " + std::to_string(mg.id));
    }
    if (sw.lo[h].size() != mg.conv.size() || sw.hi[h].size() != mg.conv.size()) {
      throw InputError("switch vector length does not match conventional unit count");
    }
    std::vector<std::pair<int, double>> balance;

    for (size_t c = 0; c < mg.conv.size(); ++c) {
      const ConventionalGenSpec& gen = mg.conv[c];
      const double lo = sw.lo[h][c], hi = sw.hi[h][c];
      int p, d = -1;
      if (lo == hi && !sw.keep_layout) {
        p = as.add_var(gen.p_min * lo, gen.p_max * lo);
        cost.constant(g * gen.a_on * lo);
      } else {
        p = as.add_var(0.0, gen.p_max * hi);
        d = as.add_var(lo, hi);
        const int s_lo = as.add_var(0.0, kInf);
        const int s_hi = as.add_var(0.0, kInf);
        as.add_eq({{p, 1.0}, {d, -gen.p_min}, {s_lo, -1.0}}, 0.0);
        as.add_eq({{d, gen.p_max}, {p, -1.0}, {s_hi, -1.0}}, 0.0);
        cost.linear(d, g * gen.a_on);
      }
      cost.linear(p, g * gen.a_lin);
      cost.square(p, g * gen.a_quad);
      L.conv[h].push_back(p);
      L.delta[h].push_back(d);
      balance.emplace_back(p, 1.0);
    }
    for (size_t s = 0; s < mg.storage.size(); ++s) {
      const StorageSpec& st = mg.storage[s];
      const int p = as.add_var(st.p_min, st.p_max);
      const int x = as.add_var(st.x_min, st.x_max);
      cost.square(p, g * st.a_wear);
      // x(h+1) = x(h) - ts p(h)
      if (h == 0) {
        as.add_eq({{x, 1.0}, {p, ts}}, inst.x0[s]);
      } else {
        as.add_eq({{x, 1.0}, {L.energy[h - 1][s], -1.0}, {p, ts}}, 0.0);
      }
      L.storage[h].push_back(p);
      L.energy[h].push_back(x);
      balance.emplace_back(p, 1.0);
    }
    for (size_t r = 0; r < mg.res.size(); ++r) {
      const double avail = std::min(mg.res[r].p_max, w.res[r]);
      const int p = as.add_var(0.0, std::max(avail, 0.0));
      const double a = g * mg.res[r].a_curtail;
      cost.square(p, a);
      cost.linear(p, -2.0 * a * w.res[r]);
      cost.constant(a * w.res[r] * w.res[r]);
      L.res[h].push_back(p);
      balance.emplace_back(p, 1.0);
    }
    if (with_pcc) {
      const int pp = as.add_var(0.0, kInf);
      const int pn = as.add_var(0.0, kInf);
      cost.linear(pp, g * (mg.pcc.a_price + mg.pcc.a_fee));
      cost.linear(pn, g * (-mg.pcc.a_price + mg.pcc.a_fee));
      L.pcc_pos[h] = pp;
      L.pcc_neg[h] = pn;
      balance.emplace_back(pp, 1.0);
      balance.emplace_back(pn, -1.0);
    }
    double load = 0.0;
    for (double v : w.load) load += v;
    as.add_eq(balance, -load);
  }
  return L;
}

QuadCap finish_cost(const QuadFormBuilder& b, int n) {
  QuadCap cap;
  b.build(n, cap.P, cap.q, cap.constant);
  return cap;
}

}  // namespace

SwitchBounds SwitchBounds::fixed(const std::vector<SwitchState>& schedule) {
  SwitchBounds b;
  for (const auto& row : schedule) {
    std::vector<double> v(row.begin(), row.end());
    b.lo.push_back(v);
    b.hi.push_back(v);
  }
  return b;
}

SwitchBounds SwitchBounds::relaxed(int steps, int units) {
  SwitchBounds b;
  b.lo.assign(steps, std::vector<double>(units, 0.0));
  b.hi.assign(steps, std::vector<double>(units, 1.0));
  return b;
}

double discount_power(double gamma, int h) { return gamma == 1.0 ? 1.0 : std::pow(gamma, h); }

HorizonProblem build_islanded_problem(const MgInstance& mg, const SwitchBounds& switches,
                                      double gamma, double ts) {
  QpAssembler as;
  QuadFormBuilder own;
  HorizonProblem prob;
  prob.steps = static_cast<int>(mg.forecast.size());
  prob.mgs.push_back(add_microgrid(as, own, mg, switches, gamma, ts, false));
  prob.qp = as.build();
  prob.costs.push_back(finish_cost(own, as.num_vars()));
  return prob;
}

HorizonProblem build_central_problem(const GridGraph& graph, const std::vector<MgInstance>& mgs,
                                     const std::vector<SwitchBounds>& switches, double gamma,
                                     double ts) {
  if (static_cast<int>(mgs.size()) != graph.num_nodes() || switches.size() != mgs.size()) {
    throw InputError("microgrid count does not match the grid");
  }
  QpAssembler as;
  std::vector<QuadFormBuilder> own(mgs.size());
  HorizonProblem prob;
  prob.steps = mgs.empty() ? 0 : static_cast<int>(mgs[0].forecast.size());
  for (size_t j = 0; j < mgs.size(); ++j) {
    if (static_cast<int>(mgs[j].forecast.size()) != prob.steps) {
      throw InputError("forecast horizons differ between microgrids");
    }
    prob.mgs.push_back(add_microgrid(as, own[j], mgs[j], switches[j], gamma, ts, true));
  }
  CentralNetLayout net;
  const int n = graph.num_nodes();
  const auto& lines = graph.lines();
  for (int h = 0; h < prob.steps; ++h) {
    const double g = discount_power(gamma, h);
    std::vector<int> theta(n), flow(lines.size());
    for (int j = 0; j < n; ++j) theta[j] = j == 0 ? as.add_var(0.0, 0.0) : as.add_var(-kInf, kInf);
    for (size_t e = 0; e < lines.size(); ++e) {
      const Line& l = lines[e];
      flow[e] = as.add_var(l.p_min, l.p_max);
      as.add_eq({{flow[e], 1.0}, {theta[l.a], -l.susceptance}, {theta[l.b], l.susceptance}}, 0.0);
      // both directions of the double sum
      as.objective().square(flow[e], 2.0 * g * l.cost_weight);
    }
    for (int j = 0; j < n; ++j) {
      std::vector<std::pair<int, double>> terms{{prob.mgs[j].pcc_pos[h], 1.0},
                                                {prob.mgs[j].pcc_neg[h], -1.0}};
      for (size_t e = 0; e < lines.size(); ++e) {
        if (lines[e].a == j) terms.emplace_back(flow[e], -1.0);
        if (lines[e].b == j) terms.emplace_back(flow[e], 1.0);
      }
      as.add_eq(terms, 0.0);
    }
    net.theta.push_back(theta);
    net.flow.push_back(flow);
  }
  prob.qp = as.build();
  for (const auto& b : own) prob.costs.push_back(finish_cost(b, as.num_vars()));
  prob.central = std::move(net);
  return prob;
}

HorizonProblem build_local_problem(const GridGraph& graph, int j, const MgInstance& mg,
                                   const SwitchBounds& switches, double gamma, double ts) {
  QpAssembler as;
  QuadFormBuilder own;
  HorizonProblem prob;
  prob.steps = static_cast<int>(mg.forecast.size());
  prob.mgs.push_back(add_microgrid(as, own, mg, switches, gamma, ts, true));
  const auto nbs = graph.neighbors(j);
  LocalNetLayout net;
  net.replica.assign(nbs.size(), {});
  net.flow.assign(nbs.size(), {});
  for (int h = 0; h < prob.steps; ++h) {
    const double g = discount_power(gamma, h);
    const int own_theta = nbs.empty() ? as.add_var(0.0, 0.0) : as.add_var(-kInf, kInf);
    net.own.push_back(own_theta);
    std::vector<std::pair<int, double>> pcc{{prob.mgs[0].pcc_pos[h], 1.0},
                                            {prob.mgs[0].pcc_neg[h], -1.0}};
    for (size_t k = 0; k < nbs.size(); ++k) {
      const Neighbor& nb = nbs[k];
      const int rep = as.add_var(-kInf, kInf);
      const int f = as.add_var(nb.p_min, nb.p_max);
      as.add_eq({{f, 1.0}, {own_theta, -nb.susceptance}, {rep, nb.susceptance}}, 0.0);
      as.objective().square(f, g * nb.cost_weight);
      pcc.emplace_back(f, -1.0);
      net.replica[k].push_back(rep);
      net.flow[k].push_back(f);
    }
    as.add_eq(pcc, 0.0);
  }
  prob.qp = as.build();
  prob.costs.push_back(finish_cost(own, as.num_vars()));
  prob.local = std::move(net);
  return prob;
}

Trajectory extract_trajectory(const HorizonProblem& prob, int mg, const Vector& x) {
  const MgLayout& L = prob.mgs[mg];
  Trajectory t;
  t.energy.push_back(L.x0);
  for (int h = 0; h < prob.steps; ++h) {
    UnitPowers z;
    SwitchState d;
    for (size_t c = 0; c < L.conv[h].size(); ++c) {
      z.conv.push_back(x[L.conv[h][c]]);
      const int di = L.delta[h][c];
      const double v = di < 0 ? L.switches.lo[h][c] : x[di];
      d.push_back(v >= 0.5 ? 1 : 0);
    }
    for (int i : L.storage[h]) z.storage.push_back(x[i]);
    for (int i : L.res[h]) z.res.push_back(x[i]);
    z.pcc = L.pcc_pos[h] < 0 ? 0.0 : x[L.pcc_pos[h]] - x[L.pcc_neg[h]];
    std::vector<double> e;
    for (int i : L.energy[h]) e.push_back(x[i]);
    t.power.push_back(std::move(z));
    t.delta.push_back(std::move(d));
    t.energy.push_back(std::move(e));
  }
  return t;
}

std::vector<std::vector<double>> switch_values(const HorizonProblem& prob, int mg, const Vector& x) {
  const MgLayout& L = prob.mgs[mg];
  std::vector<std::vector<double>> out(prob.steps);
  for (int h = 0; h < prob.steps; ++h) {
    for (size_t c = 0; c < L.delta[h].size(); ++c) {
      const int di = L.delta[h][c];
      out[h].push_back(di < 0 ? L.switches.lo[h][c] : x[di]);
    }
  }
  return out;
}

}  // namespace emgrid
