#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "elicit/errors.hpp"
#include "elicit/model.hpp"
#include "oracle.hpp"

using namespace elicit;

namespace {

ItemBank e1() { return ItemBank({"1", "2", "3"}, {{1, 0}, {0, 1}, {0.4, 0.4}}); }

// Inverse of std::erf by bisection, used as an independent reference.
double erf_inv_bisect(double y) {
  double lo = -6.0, hi = 6.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erf(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool vertices_inside(const std::vector<Vector>& verts, const ItemBank& bank, const UncertaintyModel& m) {
  for (const auto& u : verts)
    if (!contains(bank, m, u, 1e-7)) return false;
  return true;
}

}  // namespace

TEST_CASE("csv with two attribute columns") {
  std::istringstream in("id,a,b\nx,1,2\ny,3,4\nz,5,6\n");
  const auto bank = load_item_bank(in);
  CHECK(bank.size() == 3);
  CHECK(bank.dim() == 2);
  CHECK(bank.item(2) == Vector{5, 6});
  CHECK(bank.attribute_names() == std::vector<std::string>{"a", "b"});
  CHECK(bank.query_ids().size() == 3);
}

TEST_CASE("csv errors name row and column") {
  std::istringstream bad("id,a,b\nx,1,2\ny,abc,4\n");
  try {
    load_item_bank(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);  // file line, header is row 1
    CHECK(msg.find("'a'") != std::string::npos);
  }
  std::istringstream ragged("id,a,b\nx,1,2\ny,3\n");
  CHECK_THROWS_AS(load_item_bank(ragged), ParseError);
  std::istringstream dup("id,a\nx,1\nx,2\n");
  CHECK_THROWS_AS(load_item_bank(dup), ValidationError);
}

TEST_CASE("csv membership columns") {
  std::istringstream in("id,a,in_query_set,in_rec_set\nx,1,true,false\ny,2,1,true\nz,3,0,1\n");
  const auto bank = load_item_bank(in);
  CHECK(bank.query_ids() == std::vector<int>{0, 1});
  CHECK(bank.rec_ids() == std::vector<int>{1, 2});
  CHECK(all_queries(bank).size() == 1);
}

TEST_CASE("e1 fixture file round trip") {
  const auto bank = load_item_bank_file(std::string(ELICIT_TEST_DATA) + "/e1.csv");
  const auto ref = e1();
  REQUIRE(bank.size() == 3);
  CHECK(bank.dim() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(bank.id(i) == ref.id(i));
    CHECK(bank.item(i) == ref.item(i));
  }
  std::ostringstream out;
  write_item_bank(out, bank);
  std::istringstream back(out.str());
  const auto again = load_item_bank(back);
  CHECK(again.items() == bank.items());
  CHECK(again.ids() == bank.ids());
}

TEST_CASE("query and plan validation") {
  const auto bank = e1();
  CHECK_NOTHROW(validate_query({0, 1}, bank));
  CHECK_THROWS_AS(validate_query({1, 0}, bank), ValidationError);
  CHECK_THROWS_AS(validate_query({0, 3}, bank), ValidationError);
  CHECK_THROWS_AS(validate_plan({{{0, 1}, {0, 1}}}, bank), ValidationError);
  CHECK_NOTHROW(validate_plan({{{0, 1}, {0, 1}}}, bank, true));
  CHECK_THROWS_AS(validate_responses({{1, 0}}, {{{0, 1}, {0, 2}}}), ValidationError);
  CHECK_THROWS_AS(ItemBank({"a"}, {{1.0}}), ValidationError);
  CHECK_THROWS_AS(ItemBank({"a", "b"}, {{1.0}, {1.0, 2.0}}), ValidationError);
}

TEST_CASE("polyhedron checks") {
  CHECK_THROWS_AS(PreferencePolyhedron({{1.0}, {-1.0}}, {1.0, 0.0}), ValidationError);  // empty
  CHECK_THROWS_AS(PreferencePolyhedron({{1.0}}, {0.0}), ValidationError);               // unbounded
  const auto simplex = PreferencePolyhedron::simplex(2);
  CHECK(simplex.contains({0.5, 0.5}));
  CHECK_FALSE(simplex.contains({0.6, 0.6}));
  CHECK(simplex.box_upper()[0] == doctest::Approx(1.0));
  std::istringstream in("c1,c2,rhs\n1,0,-1\n-1,0,-1\n0,1,-1\n0,-1,-1\n");
  const auto box = load_polyhedron(in);
  CHECK(box.num_rows() == 4);
  CHECK(box.box_lower()[1] == doctest::Approx(-1.0));
}

TEST_CASE("budget schedule") {
  CHECK(budget_gamma({0.0, 0.9}, 5) == 0.0);
  CHECK(budget_gamma({0.025, 0.5}, 4) == doctest::Approx(0.0).epsilon(1e-12));
  const double expected = 2 * 0.025 * 2 * erf_inv_bisect(0.8);
  CHECK(budget_gamma({0.025, 0.9}, 4) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(budget_gamma({0.025, 0.9}, 4) == doctest::Approx(0.0906194).epsilon(1e-6));
  CHECK_THROWS_AS(budget_gamma({0.1, 1.0}, 1), DomainError);
  CHECK_THROWS_AS(budget_gamma({0.1, 0.0}, 1), DomainError);
}

TEST_CASE("erf_inv matches bisection on std::erf") {
  for (double y = -0.999; y < 0.999; y += 0.0371) CHECK(erf_inv(y) == doctest::Approx(erf_inv_bisect(y)).epsilon(1e-10));
  CHECK(std::abs(erf_inv(1e-13)) < 1e-12);
}

TEST_CASE("budget schedule is monotone") {
  double prev = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double g = budget_gamma({0.1, 0.9}, k);
    CHECK(g >= prev);
    prev = g;
  }
  prev = 0.0;
  for (double p = 0.5; p < 0.999; p += 0.05) {
    const double g = budget_gamma({0.1, p}, 3);
    CHECK(g >= prev - 1e-15);
    prev = g;
  }
  prev = 0.0;
  for (double s = 0.0; s < 1.0; s += 0.1) {
    const double g = budget_gamma({s, 0.9}, 3);
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("updated constraints") {
  const auto bank = e1();
  const auto base = PreferencePolyhedron::simplex(2);
  SUBCASE("empty history is the base set plus the budget row") {
    const auto sys = updated_constraints(bank, UncertaintyModel(base, 0.0));
    CHECK(sys.num_eps == 0);
    CHECK(static_cast<int>(sys.rows.size()) == base.num_rows() + 1);
  }
  SUBCASE("one answer adds u1 - u2 + eps >= 0") {
    const auto sys = updated_constraints(bank, UncertaintyModel(base, 0.0, {{{0, 1}, 1}}));
    const auto& row = sys.rows[base.num_rows()];
    CHECK(row.coef == Vector{1, -1, 1});
    CHECK(row.sense == solver::Sense::GreaterEqual);
    CHECK(row.rhs == 0.0);
    const UncertaintyModel m(base, 0.0, {{{0, 1}, 1}});
    CHECK(contains(bank, m, {0.7, 0.3}));
    CHECK_FALSE(contains(bank, m, {0.3, 0.7}));
  }
  SUBCASE("opposite answers pin u1 = u2") {
    const UncertaintyModel m(base, 0.0, {{{0, 1}, 1}, {{0, 1}, -1}});
    CHECK(is_nonempty(bank, m));
    const auto verts = oracle::utility_vertices(bank, base, m.history(), 0.0);
    REQUIRE_FALSE(verts.empty());
    for (const auto& u : verts) {
      CHECK(u[0] == doctest::Approx(0.5));
      CHECK(u[1] == doctest::Approx(0.5));
    }
  }
  SUBCASE("out of range history") {
    CHECK_THROWS_AS(updated_constraints(bank, UncertaintyModel(base, 0.0, {{{0, 5}, 1}})), ValidationError);
  }
}

TEST_CASE("non-emptiness") {
  const auto bank = e1();
  const auto base = PreferencePolyhedron::simplex(2);
  CHECK(is_nonempty(bank, UncertaintyModel(base, 0.0)));
  CHECK(is_nonempty(bank, UncertaintyModel(base, 0.0, {{{0, 2}, 1}, {{1, 2}, 1}})));
  for (const Query q : all_queries(bank))
    for (int s : {1, -1}) CHECK(is_nonempty(bank, UncertaintyModel(base, 1.0, {{q, s}})));
  // u1 <= 0.4 and u2 <= 0.4 contradict u1 + u2 = 1 without a budget.
  const UncertaintyModel bad(base, 0.0, {{{0, 2}, -1}, {{1, 2}, -1}});
  CHECK_FALSE(is_nonempty(bank, bad));
  const double need = minimal_budget(bank, bad);
  CHECK(need == doctest::Approx(0.2));
  CHECK(is_nonempty(bank, bad.with_gamma(need + 1e-9)));
}

TEST_CASE("shrinkage and budget monotonicity by vertex containment") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const auto bank = oracle::random_bank(4, 2, rng);
    const auto base = PreferencePolyhedron::box(2, -1, 1);
    const auto qs = all_queries(bank);
    std::uniform_int_distribution<std::size_t> pick(0, qs.size() - 1);
    const double gamma = trial % 2 ? 0.1 : 0.0;
    UncertaintyModel m(base, gamma, {{qs[pick(rng)], trial % 3 ? 1 : -1}});
    const Observation extra{qs[pick(rng)], trial % 4 ? -1 : 1};
    const auto narrower = oracle::utility_vertices(bank, base, m.with(extra).history(), gamma);
    CHECK(vertices_inside(narrower, bank, m));
    const auto tight = oracle::utility_vertices(bank, base, m.history(), gamma);
    CHECK(vertices_inside(tight, bank, m.with_gamma(gamma + 0.3)));
  }
}

TEST_CASE("large budgets saturate to the base set") {
  std::mt19937_64 rng(9);
  const auto bank = oracle::random_bank(4, 2, rng);
  const auto base = PreferencePolyhedron::box(2, -1, 1);
  const auto qs = all_queries(bank);
  double spread = 0.0;
  for (const auto& q : qs) {
    const auto d = difference(bank.item(q.first), bank.item(q.second));
    spread = std::max(spread, std::abs(d[0]) + std::abs(d[1]));
  }
  const int K = 2;
  for (unsigned s = 0; s < 4; ++s) {
    UncertaintyModel m(base, K * spread, {{qs[0], s & 1 ? -1 : 1}, {qs[1], s & 2 ? -1 : 1}});
    for (const Vector& corner : {Vector{-1, -1}, Vector{-1, 1}, Vector{1, -1}, Vector{1, 1}})
      CHECK(contains(bank, m, corner));
  }
}

TEST_CASE("negative budget is rejected") {
  CHECK_THROWS_AS(UncertaintyModel(PreferencePolyhedron::simplex(2), -0.1), DomainError);
}
