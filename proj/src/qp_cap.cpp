#include <algorithm>
#include <cmath>

#include "emgrid/qp.hpp"

namespace emgrid {

QuadProgram with_cap_penalty(const QuadProgram& qp, const std::vector<const QuadCap*>& caps,
                             const std::vector<double>& mu) {
  QuadProgram out = qp;
  for (size_t i = 0; i < caps.size(); ++i) {
    if (mu[i] == 0.0) continue;
    out.P += mu[i] * caps[i]->P;
    out.q += mu[i] * caps[i]->q;
    out.constant += mu[i] * caps[i]->constant;
  }
  return out;
}

namespace {

struct Trial {
  double mu = 0.0;
  double gap = 0.0;  // cap value - level
  QpSolution sol;
};

QuadProgram penalized(const QuadProgram& qp, const QuadCap& cap, double mu) {
  return with_cap_penalty(qp, {&cap}, {mu});
}

WarmStart warm_from(const QpSolution& s) { return {s.x, s.y_eq, s.y_box}; }

}  // namespace

// The cap value g(mu) = cap(x(mu)) - level is nonincreasing in mu. We keep a
// bracket [lo, hi] with g(lo) > tol >= g(hi) and shrink it with Illinois
// regula falsi, falling back to (geometric) bisection when the secant step
// stalls. A point is accepted once g <= tol and mu * |g| <= tol. The
// feasible end `hi` is always what is returned.
CappedSolution solve_qp_with_cap(QpSolver& solver, const QuadProgram& qp, const QuadCap& cap,
                                 const CapSettings& settings, double mu_hint,
                                 const WarmStart* warm) {
  CappedSolution out;
  const double tol = settings.tol;
  WarmStart ws;
  const WarmStart* warm_ptr = warm;

  auto eval = [&](double mu) {
    Trial t;
    t.mu = mu;
    t.sol = solver.solve(mu == 0.0 ? qp : penalized(qp, cap, mu), warm_ptr);
    ++out.qp_solves;
    if (t.sol.status.code == SolveStatus::Code::infeasible) {
      throw CapError("cap subproblem infeasible");
    }
    t.gap = cap.value(t.sol.x) - cap.level;
    ws = warm_from(t.sol);
    warm_ptr = &ws;
    return t;
  };
  auto accept = [&](Trial&& t) {
    out.mu = t.mu;
    out.cap_value = t.gap + cap.level;
    out.qp = std::move(t.sol);
    out.qp.objective = qp.objective(out.qp.x);
    return out;
  };
  auto done = [&](const Trial& t) { return t.gap <= tol && t.mu * std::abs(t.gap) <= tol; };

  Trial lo, hi;
  if (mu_hint > 0.0) {
    // walk away from the hint by doubling steps until the root is bracketed
    Trial t = eval(mu_hint);
    if (done(t)) return accept(std::move(t));
    if (t.gap <= tol) {
      hi = std::move(t);
      for (double mu = 0.5 * hi.mu;; mu *= 0.25) {
        if (mu < 1e-6 * mu_hint) mu = 0.0;
        Trial d = eval(mu);
        if (mu == 0.0 && d.gap <= tol) return accept(std::move(d));
        if (done(d)) return accept(std::move(d));
        if (d.gap > tol) {
          lo = std::move(d);
          goto search;
        }
        hi = std::move(d);
      }
    }
    lo = std::move(t);
  } else {
    Trial z = eval(0.0);
    if (z.gap <= tol) return accept(std::move(z));
    lo = std::move(z);
  }
  {
    double mu = lo.mu > 0.0 ? 2.0 * lo.mu : 1.0;
    for (;;) {
      Trial t = eval(std::min(mu, settings.mu_max));
      if (done(t)) return accept(std::move(t));
      if (t.gap <= tol) {
        hi = std::move(t);
        break;
      }
      if (t.mu >= settings.mu_max) throw CapError("cap unattainable at tolerance");
      lo = std::move(t);
      mu = 4.0 * lo.mu;
    }
  }

search:
  double glo = lo.gap, ghi = hi.gap;
  int last = 0;  // +1 when lo moved last, -1 when hi moved last
  int same_side = 0;
  for (int step = 0; step < settings.max_steps; ++step) {
    const double width = hi.mu - lo.mu;
    if (width <= 1e-13 * (1.0 + hi.mu)) break;
    double mu = lo.mu + width * glo / (glo - ghi);
    if (!std::isfinite(mu) || same_side >= 4) {
      mu = (lo.mu > 0.0 && hi.mu > 10.0 * lo.mu) ? std::sqrt(lo.mu * hi.mu) : lo.mu + 0.5 * width;
      same_side = 0;
    }
    mu = std::clamp(mu, lo.mu + 1e-3 * width, hi.mu - 1e-3 * width);
    Trial t = eval(mu);
    if (done(t)) return accept(std::move(t));
    if (t.gap > tol) {
      lo = std::move(t);
      glo = lo.gap;
      if (last == 1) ghi *= 0.5;
      same_side = last == 1 ? same_side + 1 : 1;
      last = 1;
    } else {
      hi = std::move(t);
      ghi = hi.gap;
      if (last == -1) glo *= 0.5;
      same_side = last == -1 ? same_side + 1 : 1;
      last = -1;
    }
  }
  return accept(std::move(hi));
}

CappedSolution solve_qp_with_cap(const QuadProgram& qp, const QuadCap& cap,
                                 const CapSettings& settings) {
  QpSettings s;
  s.tol = settings.tol;
  QpSolver solver(s);
  return solve_qp_with_cap(solver, qp, cap, settings);
}

MultiCapSolution solve_qp_with_caps(QpSolver& solver, const QuadProgram& qp,
                                    const std::vector<QuadCap>& caps,
                                    const MultiCapSettings& settings, std::vector<double> mu_start) {
  const size_t n = caps.size();
  MultiCapSolution out;
  out.mu = mu_start.size() == n ? std::move(mu_start) : std::vector<double>(n, 0.0);
  out.cap_value.assign(n, 0.0);
  std::vector<const QuadCap*> all;
  for (const auto& c : caps) all.push_back(&c);

  const double tol = settings.cap.tol;
  auto satisfied = [&](const Vector& x) {
    bool ok = true;
    for (size_t i = 0; i < n; ++i) {
      out.cap_value[i] = caps[i].value(x);
      const double gap = out.cap_value[i] - caps[i].level;
      if (gap > tol || out.mu[i] * std::abs(gap) > tol) ok = false;
    }
    return ok;
  };

  WarmStart ws;
  const WarmStart* warm = nullptr;
  out.qp = solver.solve(with_cap_penalty(qp, all, out.mu));
  ++out.qp_solves;
  if (out.qp.status.code == SolveStatus::Code::infeasible) throw CapError("capped problem infeasible");
  for (out.passes = 0; out.passes < settings.max_passes; ++out.passes) {
    if (satisfied(out.qp.x)) {
      out.converged = true;
      break;
    }
    for (size_t i = 0; i < n; ++i) {
      const double gap = caps[i].value(out.qp.x) - caps[i].level;
      if (gap <= tol && out.mu[i] * std::abs(gap) <= tol) continue;
      std::vector<double> others = out.mu;
      others[i] = 0.0;
      const QuadProgram base = with_cap_penalty(qp, all, others);
      ws = warm_from(out.qp);
      warm = &ws;
      CappedSolution cs = solve_qp_with_cap(solver, base, caps[i], settings.cap, out.mu[i], warm);
      out.qp_solves += cs.qp_solves;
      out.mu[i] = cs.mu;
      out.qp = std::move(cs.qp);
    }
  }
  if (!out.converged && satisfied(out.qp.x)) out.converged = true;
  out.qp.objective = qp.objective(out.qp.x);
  return out;
}

}  // namespace emgrid
