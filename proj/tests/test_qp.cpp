#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "emgrid/qp.hpp"
#include "qp_fixtures.hpp"

using namespace emgrid;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

QuadProgram scalar_qp(double target, double lo, double hi) {
  // (x - target)^2 = x^2 - 2 target x + target^2
  QuadProgram qp;
  qp.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
  qp.q = Vector::Constant(1, -2.0 * target);
  qp.constant = target * target;
  qp.A_eq = SparseMatrix(0, 1);
  qp.b_eq = Vector(0);
  qp.lower = Vector::Constant(1, lo);
  qp.upper = Vector::Constant(1, hi);
  return qp;
}

}  // namespace

TEST_CASE("interior optimum") {
  auto sol = solve_qp(scalar_qp(1.0, 0.0, 2.0));
  REQUIRE(sol.status.ok());
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("active upper bound") {
  auto sol = solve_qp(scalar_qp(3.0, 0.0, 2.0));
  REQUIRE(sol.status.ok());
  CHECK(sol.x[0] == 2.0);
  CHECK(sol.y_box[0] > 0.0);
}

TEST_CASE("equality constrained symmetric") {
  QuadProgram qp;
  qp.P = dense_to_sparse(2.0 * Eigen::MatrixXd::Identity(2, 2));
  qp.q = Vector::Zero(2);
  Eigen::MatrixXd a(1, 2);
  a << 1, 1;
  qp.A_eq = dense_to_sparse(a);
  qp.b_eq = Vector::Constant(1, 2.0);
  qp.lower = Vector::Constant(2, -inf);
  qp.upper = Vector::Constant(2, inf);
  auto sol = solve_qp(qp);
  REQUIRE(sol.status.ok());
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("infeasible box and equality") {
  QuadProgram qp = scalar_qp(0.0, 0.0, 1.0);
  qp.A_eq = dense_to_sparse(Eigen::MatrixXd::Ones(1, 1));
  qp.b_eq = Vector::Constant(1, 5.0);
  auto sol = solve_qp(qp);
  CHECK(sol.status.code == SolveStatus::Code::infeasible);
}

TEST_CASE("validate rejects broken programs") {
  QuadProgram qp = scalar_qp(0.0, 0.0, 1.0);
  qp.lower[0] = 2.0;
  CHECK_THROWS_AS(validate(qp), std::invalid_argument);
  QuadProgram neg = scalar_qp(0.0, 0.0, 1.0);
  neg.P.coeffRef(0, 0) = -1.0;
  CHECK_THROWS_AS(validate(neg), std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  QuadProgram a = random_qp(2, 1, 3);
  a.P = dense_to_sparse(asym);
  CHECK_THROWS_AS(validate(a), std::invalid_argument);
}

TEST_CASE("random programs: KKT and sampling checks") {
  for (int seed = 0; seed < 30; ++seed) {
    CAPTURE(seed);
    const QuadProgram qp = random_qp(8, 3, seed);
    validate(qp);
    const auto sol = solve_qp(qp);
    REQUIRE(sol.status.ok());
    const auto kkt = kkt_residuals(qp, sol.x, sol.y_eq, sol.y_box);
    CHECK(kkt.max() <= 1e-8);
    for (int i = 0; i < qp.num_vars(); ++i) {
      CHECK(sol.x[i] >= qp.lower[i]);
      CHECK(sol.x[i] <= qp.upper[i]);
    }
    // compare against random feasible points of the affine slice
    std::mt19937_64 rng(seed + 1000);
    int tried = 0;
    for (const Vector& p : random_feasible_points(qp, sol.x, 1000, rng)) {
      CHECK(sol.objective <= qp.objective(p) + 1e-7 * (1.0 + std::abs(sol.objective)));
      ++tried;
    }
    CHECK(tried > 0);
  }
}

TEST_CASE("deterministic repeated solves") {
  const QuadProgram qp = random_qp(10, 4, 7);
  const auto a = solve_qp(qp);
  const auto b = solve_qp(qp);
  CHECK(a.x == b.x);
  CHECK(a.y_eq == b.y_eq);
  QpSolver solver;
  const auto c = solver.solve(qp);
  const auto d = solver.solve(qp);
  CHECK(c.x == d.x);
}

TEST_CASE("warm start reaches the same optimum") {
  const QuadProgram qp = random_qp(10, 4, 11);
  QpSolver solver;
  const auto cold = solver.solve(qp);
  WarmStart ws{cold.x, cold.y_eq, cold.y_box};
  const auto warm = solver.solve(qp, &ws);
  REQUIRE(warm.status.ok());
  CHECK((warm.x - cold.x).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK(warm.status.iterations <= cold.status.iterations);
}

TEST_CASE("cap inactive gives the plain optimum") {
  const QuadProgram qp = scalar_qp(0.5, -10, 10);
  QuadCap cap;
  cap.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
  cap.q = Vector::Zero(1);
  cap.level = 1.0;
  auto capped = solve_qp_with_cap(qp, cap);
  CHECK(capped.mu == 0.0);
  CHECK(capped.qp.x[0] == doctest::Approx(solve_qp(qp).x[0]).epsilon(1e-12));
}

TEST_CASE("cap active on the boundary") {
  const QuadProgram qp = scalar_qp(2.0, -10, 10);
  QuadCap cap;  // x^2 <= 1
  cap.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
  cap.q = Vector::Zero(1);
  cap.level = 1.0;
  auto capped = solve_qp_with_cap(qp, cap);
  CHECK(capped.qp.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(capped.mu > 0.0);
  CHECK(capped.cap_value <= 1.0 + 1e-8);
  // analytic multiplier: 2(x-2) + mu*2x = 0 at x=1 -> mu = 1
  CHECK(capped.mu == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("unattainable cap raises") {
  const QuadProgram qp = scalar_qp(2.0, 1.5, 10);
  QuadCap cap;
  cap.P = dense_to_sparse(Eigen::MatrixXd::Constant(1, 1, 2.0));
  cap.q = Vector::Zero(1);
  cap.level = 1.0;  // x >= 1.5 makes x^2 <= 1 impossible
  CHECK_THROWS_AS(solve_qp_with_cap(qp, cap), CapError);
}

TEST_CASE("random 5-variable capped instances against grid search") {
  for (int seed = 0; seed < 4; ++seed) {
    CAPTURE(seed);
    const CapInstance inst = random_cap_instance(seed);
    const auto capped = solve_qp_with_cap(inst.qp, inst.cap);
    const double grid = grid_search_capped(inst, 7);
    // grid optimum is an upper bound on the true optimum, coarse in x
    CHECK(capped.qp.objective <= grid + 1e-7 * (1.0 + std::abs(grid)));
    CHECK(capped.qp.objective >= grid - 1e-3 * (1.0 + std::abs(grid)));
    CHECK(capped.cap_value <= inst.cap.level + 1e-8);
  }
}

TEST_CASE("raising the cap level never raises the multiplier") {
  const CapInstance inst = random_cap_instance(3);
  QuadCap cap = inst.cap;
  double prev_mu = std::numeric_limits<double>::infinity();
  const double base = cap.level;
  for (int k = 0; k < 6; ++k) {
    cap.level = base + 0.2 * k * (1.0 + std::abs(base));
    const auto capped = solve_qp_with_cap(inst.qp, cap);
    CHECK(capped.mu <= prev_mu + 1e-9);
    prev_mu = capped.mu;
  }
}

TEST_CASE("multi-cap cyclic passes satisfy every cap") {
  const CapInstance inst = random_cap_instance(5);
  std::vector<QuadCap> caps{inst.cap, inst.cap};
  caps[1].q = -caps[1].q;
  QpSolver solver;
  auto res = solve_qp_with_caps(solver, inst.qp, caps);
  CHECK(res.converged);
  for (size_t i = 0; i < caps.size(); ++i) CHECK(caps[i].value(res.qp.x) <= caps[i].level + 1e-8);
}
