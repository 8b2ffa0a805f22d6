#include <random>

#include "doctest.h"
#include "elicit/errors.hpp"
#include "elicit/solver.hpp"

using namespace elicit::solver;

TEST_CASE("lp with a lower bound row") {
  Model m;
  const Var x = m.add_continuous(0, 10, "x");
  m.add_constraint(LinExpr(x), Sense::GreaterEqual, 1.0);
  m.set_objective(LinExpr(x), ObjSense::Minimize);
  const auto out = solve(m);
  REQUIRE(out.optimal());
  CHECK(*out.objective == doctest::Approx(1.0));
  CHECK(value(out, x, m) == doctest::Approx(1.0));
}

TEST_CASE("contradictory rows are infeasible") {
  Model m;
  const Var x = m.add_continuous(-kInf, kInf);
  m.add_constraint(LinExpr(x), Sense::GreaterEqual, 1.0);
  m.add_constraint(LinExpr(x), Sense::LessEqual, 0.0);
  m.set_objective(LinExpr(x), ObjSense::Minimize);
  const auto out = solve(m);
  CHECK(out.status == Status::Infeasible);
  CHECK_THROWS_AS(value(out, x), elicit::UsageError);
}

TEST_CASE("open ray is unbounded") {
  Model m;
  const Var x = m.add_continuous(0, kInf);
  m.set_objective(LinExpr(x), ObjSense::Maximize);
  CHECK(solve(m).status == Status::Unbounded);
}

TEST_CASE("unbounded mip") {
  Model m;
  const Var x = m.add_continuous(0, kInf);
  const Var b = m.add_binary();
  m.add_constraint(LinExpr(x) - LinExpr(b), Sense::GreaterEqual, 0.0);
  m.set_objective(LinExpr(x), ObjSense::Maximize);
  CHECK(solve(m).status == Status::Unbounded);
}

TEST_CASE("binary values are rounded within tolerance") {
  Model m;
  const Var b = m.add_binary("b");
  const Var x = m.add_continuous(0, 1, "x");
  SolveOutcome out;
  out.status = Status::Optimal;
  out.values = {0.9999997, 0.3333};
  CHECK(value(out, b, m) == 1.0);
  CHECK(value(out, x, m) == doctest::Approx(0.3333));
  out.values = {0.6, 0.0};
  CHECK_THROWS_AS(value(out, b, m), elicit::SolverError);
}

TEST_CASE("knapsack mip") {
  Model m;
  std::vector<Var> x;
  const double w[] = {3, 4, 5}, v[] = {4, 5, 6};
  LinExpr cap, obj;
  for (int i = 0; i < 3; ++i) {
    x.push_back(m.add_binary());
    cap.add(x[i], w[i]);
    obj.add(x[i], v[i]);
  }
  m.add_constraint(cap, Sense::LessEqual, 8.0);
  m.set_objective(obj, ObjSense::Maximize);
  const auto out = solve(m);
  REQUIRE(out.optimal());
  CHECK(*out.objective == doctest::Approx(10.0));
  CHECK(value(out, x[0], m) == 1.0);
  CHECK(value(out, x[2], m) == 1.0);
}

TEST_CASE("validation rejects bad models") {
  Model m;
  const Var x = m.add_continuous(0, 1);
  m.set_bounds(x, 2, 1);
  CHECK_THROWS_AS(m.validate(), elicit::UsageError);
  Model dangling;
  dangling.add_constraint(LinExpr(Var{7}), Sense::LessEqual, 1.0);
  CHECK_THROWS_AS(dangling.validate(), elicit::UsageError);
}

namespace {

struct SmallMip {
  Model m;
  std::vector<Var> bins;
};

// Facility-style MIP with a unique optimum.
SmallMip small_mip(std::mt19937_64& rng) {
  SmallMip s;
  std::uniform_real_distribution<double> cost(1.0, 10.0);
  const int n = 6;
  std::vector<Var> y;
  LinExpr obj;
  for (int i = 0; i < n; ++i) {
    s.bins.push_back(s.m.add_binary());
    y.push_back(s.m.add_continuous(0, 1));
    obj.add(s.bins[i], cost(rng));
    obj.add(y[i], cost(rng));
    s.m.add_constraint(LinExpr(y[i]) - LinExpr(s.bins[i]), Sense::LessEqual, 0.0);
  }
  LinExpr demand;
  for (Var v : y) demand.add(v, 1.0);
  s.m.add_constraint(demand, Sense::GreaterEqual, 2.5);
  s.m.set_objective(obj, ObjSense::Minimize);
  return s;
}

}  // namespace

TEST_CASE("warm start leaves the optimum unchanged") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = small_mip(rng);
    const auto base = solve(s.m);
    REQUIRE(base.optimal());

    CHECK(solve(warm_start(s.m, {})).objective == base.objective);

    std::vector<std::pair<Var, double>> full;
    for (Var b : s.bins) full.emplace_back(b, 1.0);
    const auto hinted = solve(warm_start(s.m, full));
    REQUIRE(hinted.optimal());
    CHECK(*hinted.objective == doctest::Approx(*base.objective).epsilon(1e-6));

    std::vector<std::pair<Var, double>> bad;
    for (Var b : s.bins) bad.emplace_back(b, 0.0);
    CHECK(solve_with_fixed_binaries(s.m, bad).status == Status::Infeasible);
    const auto repaired = solve(warm_start(s.m, bad));
    REQUIRE(repaired.optimal());
    CHECK(*repaired.objective == doctest::Approx(*base.objective).epsilon(1e-6));
  }
}

TEST_CASE("hint on a continuous variable is a usage error") {
  Model m;
  const Var x = m.add_continuous(0, 1);
  CHECK_THROWS_AS(warm_start(m, {{x, 1.0}}), elicit::UsageError);
}

TEST_CASE("lp strong duality on random instances") {
  // min c.x s.t. A x >= b, x >= 0   vs   max b.y s.t. A^T y <= c, y >= 0
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.5, 3.0), any(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4, k = 3;
    std::vector<std::vector<double>> A(k, std::vector<double>(n));
    std::vector<double> b(k), c(n);
    for (auto& row : A)
      for (double& a : row) a = pos(rng);
    for (double& v : b) v = pos(rng) + any(rng);
    for (double& v : c) v = pos(rng);

    Model primal;
    std::vector<Var> x;
    for (int j = 0; j < n; ++j) x.push_back(primal.add_continuous(0, kInf));
    for (int i = 0; i < k; ++i) {
      LinExpr e;
      for (int j = 0; j < n; ++j) e.add(x[j], A[i][j]);
      primal.add_constraint(e, Sense::GreaterEqual, b[i]);
    }
    LinExpr pobj;
    for (int j = 0; j < n; ++j) pobj.add(x[j], c[j]);
    primal.set_objective(pobj, ObjSense::Minimize);

    Model dual;
    std::vector<Var> y;
    for (int i = 0; i < k; ++i) y.push_back(dual.add_continuous(0, kInf));
    for (int j = 0; j < n; ++j) {
      LinExpr e;
      for (int i = 0; i < k; ++i) e.add(y[i], A[i][j]);
      dual.add_constraint(e, Sense::LessEqual, c[j]);
    }
    LinExpr dobj;
    for (int i = 0; i < k; ++i) dobj.add(y[i], b[i]);
    dual.set_objective(dobj, ObjSense::Maximize);

    const auto p = solve(primal), d = solve(dual);
    REQUIRE(p.optimal());
    REQUIRE(d.optimal());
    CHECK(*p.objective == doctest::Approx(*d.objective).epsilon(1e-6));
  }
}

TEST_CASE("resolving an unchanged model is idempotent") {
  std::mt19937_64 rng(3);
  auto s = small_mip(rng);
  const auto a = solve(s.m), b = solve(s.m);
  CHECK(a.status == b.status);
  CHECK(*a.objective == doctest::Approx(*b.objective).epsilon(1e-9));
}
