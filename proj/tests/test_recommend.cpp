#include <random>

#include "doctest.h"
#include "elicit/errors.hpp"
#include "elicit/recommend.hpp"
#include "oracle.hpp"

using namespace elicit;

namespace {

ItemBank e1() { return ItemBank({"1", "2", "3"}, {{1, 0}, {0, 1}, {0.4, 0.4}}); }
UncertaintyModel e1_prior(std::vector<Observation> h = {}) {
  return UncertaintyModel(PreferencePolyhedron::simplex(2), 0.0, std::move(h));
}

}  // namespace

TEST_CASE("worst-case utility on e1") {
  const auto bank = e1();
  CHECK(worst_case_utility(bank.item(2), bank, e1_prior()) == doctest::Approx(0.4));
  CHECK(worst_case_utility(bank.item(0), bank, e1_prior({{{0, 1}, 1}})) == doctest::Approx(0.5));
  const UncertaintyModel single(PreferencePolyhedron({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {0.3, -0.3, 0.7, -0.7}), 0.0);
  CHECK(worst_case_utility({2, 1}, bank, single) == doctest::Approx(1.3));
}

TEST_CASE("empty set raises") {
  const auto bank = e1();
  const auto bad = e1_prior({{{0, 2}, -1}, {{1, 2}, -1}});
  CHECK_THROWS_AS(worst_case_utility(bank.item(0), bank, bad), InfeasibleUncertainty);
  CHECK_THROWS_AS(worst_case_regret(bank.item(0), bank, bad), InfeasibleUncertainty);
}

TEST_CASE("max-min utility recommendation on e1") {
  const auto bank = e1();
  auto r = recommend_mmu(bank, e1_prior());
  CHECK(r.item == 2);
  CHECK(r.guarantee == doctest::Approx(0.4));
  r = recommend_mmu(bank, e1_prior({{{0, 1}, 1}}));
  CHECK(r.item == 0);
  CHECK(r.guarantee == doctest::Approx(0.5));
  const ItemBank only({"1", "2", "3"}, bank.items(), {}, {}, {1});
  CHECK(recommend_mmu(only, e1_prior()).item == 1);
}

TEST_CASE("regret on e1") {
  const auto bank = e1();
  CHECK(worst_case_regret(bank.item(2), bank, e1_prior()) == doctest::Approx(0.6));
  CHECK(worst_case_regret(bank.item(0), bank, e1_prior()) == doctest::Approx(1.0));
  CHECK(worst_case_regret(bank.item(0), bank, e1_prior({{{0, 1}, 1}})) == doctest::Approx(0.0).epsilon(1e-9));
  auto r = recommend_mmr(bank, e1_prior());
  CHECK(r.item == 2);
  CHECK(r.guarantee == doctest::Approx(0.6));
  r = recommend_mmr(bank, e1_prior({{{0, 1}, 1}}));
  CHECK(r.item == 0);
  CHECK(r.guarantee == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("rank and regret in hindsight") {
  const auto bank = e1();
  CHECK(true_rank(0, {0.7, 0.3}, bank) == 1);
  CHECK(true_rank(1, {0.7, 0.3}, bank) == 3);
  CHECK(true_rank(2, {0.5, 0.5}, bank) == 3);
  CHECK(true_rank(0, {0.5, 0.5}, bank) == 1);
  CHECK(true_regret(1, {0.7, 0.3}, bank) == doctest::Approx(0.4));
}

TEST_CASE("full-information value on e1") {
  CHECK(full_information_utility(e1(), PreferencePolyhedron::simplex(2)) == doctest::Approx(0.5));
}

TEST_CASE("singleton set gives the true best for both criteria") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto bank = oracle::random_bank(5, 2, rng);
    std::uniform_real_distribution<double> unif(-1, 1);
    const double a = unif(rng), b = unif(rng);
    const UncertaintyModel point(PreferencePolyhedron({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {a, -a, b, -b}), 0.0);
    const auto mmu = recommend_mmu(bank, point);
    const auto mmr = recommend_mmr(bank, point);
    CHECK(mmu.item == mmr.item);
    CHECK(mmr.guarantee == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(true_rank(mmu.item, {a, b}, bank) == 1);
  }
}

TEST_CASE("recommendations match vertex enumeration") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const int J = 2 + trial % 2;
    const auto bank = oracle::random_bank(3 + trial % 3, J, rng);
    const auto base = PreferencePolyhedron::box(J, -1, 1);
    const auto qs = all_queries(bank);
    std::vector<Observation> h{{qs[trial % qs.size()], trial % 2 ? 1 : -1}};
    const double gamma = trial % 3 == 0 ? 0.1 : 0.0;
    const UncertaintyModel m(base, gamma, h);
    const auto verts = oracle::utility_vertices(bank, base, h, gamma);
    for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
      const auto expect = oracle::recommendation_value(c, bank, verts);
      REQUIRE(expect.has_value());
      CHECK(recommend(c, bank, m).guarantee == doctest::Approx(*expect).epsilon(1e-6));
    }
    for (int r : bank.rec_ids()) CHECK(worst_case_regret(bank.item(r), bank, m) >= -1e-9);
  }
}

TEST_CASE("mmu guarantee grows along a response path") {
  std::mt19937_64 rng(8);
  const auto bank = oracle::random_bank(5, 3, rng);
  UncertaintyModel m(PreferencePolyhedron::box(3, -1, 1), 0.0);
  const Vector u{0.3, -0.5, 0.8};
  double prev = recommend_mmu(bank, m).guarantee;
  for (const auto& q : all_queries(bank)) {
    const double d = dot(u, difference(bank.item(q.first), bank.item(q.second)));
    m = m.with({q, d >= 0 ? 1 : -1});
    const double g = recommend_mmu(bank, m).guarantee;
    CHECK(g >= prev - 1e-9);
    prev = g;
  }
}

TEST_CASE("criterion parsing") {
  CHECK(parse_criterion("mmu") == Criterion::Mmu);
  CHECK(parse_criterion("mmr") == Criterion::Mmr);
  CHECK_THROWS_AS(parse_criterion("avg"), ValidationError);
}
