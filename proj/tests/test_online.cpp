#include <random>

#include "doctest.h"
#include "elicit/errors.hpp"
#include "elicit/log.hpp"
#include "elicit/offline_mmu.hpp"
#include "elicit/online.hpp"
#include "oracle.hpp"

using namespace elicit;

namespace {

std::shared_ptr<const ItemBank> e1() {
  return std::make_shared<const ItemBank>(ItemBank({"1", "2", "3"}, {{1, 0}, {0, 1}, {0.4, 0.4}}));
}

Session e1_session(Criterion c, int k_max = 5, NoiseConfig noise = {}) {
  return Session(e1(), PreferencePolyhedron::simplex(2), c, noise, k_max);
}

}  // namespace

TEST_CASE("first query on e1") {
  auto mmu = e1_session(Criterion::Mmu);
  CHECK(mmu.next_query() == Query{0, 1});
  auto mmr = e1_session(Criterion::Mmr);
  CHECK(mmr.next_query() == Query{0, 1});
}

TEST_CASE("tie-break after a first answer") {
  // Every query reaches 0.5 once u1 >= u2 is known; the smallest one wins.
  const auto bank = e1();
  const UncertaintyModel after(PreferencePolyhedron::simplex(2), 0.0, {{{0, 1}, 1}});
  for (const auto& q : all_queries(*bank))
    CHECK(oracle::plan_value(Criterion::Mmu, {{q}}, *bank, after) == doctest::Approx(0.5));
  auto s = e1_session(Criterion::Mmu);
  s.next_query();
  s.record_response(1);
  CHECK(s.next_query() == Query{0, 1});
}

TEST_CASE("recording responses") {
  auto s = e1_session(Criterion::Mmu, 2);
  CHECK_THROWS_AS(s.record_response(1), UsageError);
  s.next_query();
  s.record_response(1);
  CHECK(s.k() == 1);
  CHECK(s.history().size() == 1);
  CHECK(s.status() == SessionStatus::Active);
  s.next_query();
  s.record_response(-1);
  CHECK(s.status() == SessionStatus::Completed);
  CHECK_THROWS_AS(s.record_response(1), UsageError);
  CHECK_THROWS_AS(s.next_query(), UsageError);
}

TEST_CASE("current recommendation") {
  auto s = e1_session(Criterion::Mmu);
  s.next_query();
  s.record_response(1);
  auto r = s.current_recommendation();
  CHECK(r.item == 0);
  CHECK(r.guarantee == doctest::Approx(0.5));
  r = e1_session(Criterion::Mmr).current_recommendation();
  CHECK(r.item == 2);
  CHECK(r.guarantee == doctest::Approx(0.6));
  const auto point = PreferencePolyhedron({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, {0.2, -0.2, 0.8, -0.8});
  Session p(e1(), point, Criterion::Mmr, {}, 1);
  r = p.current_recommendation();
  CHECK(r.item == 1);
  CHECK(r.guarantee == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("first online query solves the offline one-query problem") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    auto bank = std::make_shared<const ItemBank>(oracle::random_bank(5, 2, rng));
    const NoiseConfig noise{trial % 2 ? 0.05 : 0.0, 0.9};
    for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
      Session s(bank, PreferencePolyhedron::box(2, -1, 1), c, noise, 3);
      const auto model = s.model_at(1);
      const Query q = s.next_query();
      const auto best = oracle::best_plan(c, *bank, model, 1);
      CHECK(oracle::plan_value(c, {{q}}, *bank, model) == doctest::Approx(best.value).epsilon(1e-6));
      // Smallest among the optimal queries.
      CHECK(q == best.argmax.front().queries.front());
    }
  }
}

TEST_CASE("guarantees are monotone along noiseless paths") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    auto bank = std::make_shared<const ItemBank>(oracle::random_bank(6, 3, rng));
    const Vector u{0.5, -0.2, 0.7};
    for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
      Session s(bank, PreferencePolyhedron::box(3, -1, 1), c, {}, 4);
      double prev = s.current_recommendation().guarantee;
      while (s.status() == SessionStatus::Active) {
        const Query q = s.next_query();
        s.record_response(dot(u, difference(bank->item(q.first), bank->item(q.second))) >= 0 ? 1 : -1);
        const double g = s.current_recommendation().guarantee;
        if (c == Criterion::Mmu)
          CHECK(g >= prev - 1e-7);
        else
          CHECK(g <= prev + 1e-7);
        prev = g;
      }
      CHECK(contains(*bank, s.model_at(s.k()), u));
    }
  }
}

TEST_CASE("identical state gives identical next query") {
  std::mt19937_64 rng(2);
  auto bank = std::make_shared<const ItemBank>(oracle::random_bank(6, 2, rng));
  Session a(bank, PreferencePolyhedron::box(2, -1, 1), Criterion::Mmu, {0.1, 0.9}, 3);
  Session b(bank, PreferencePolyhedron::box(2, -1, 1), Criterion::Mmu, {0.1, 0.9}, 3);
  for (int step = 0; step < 3; ++step) {
    const Query qa = a.next_query(), qb = b.next_query();
    CHECK(qa == qb);
    a.record_response(step % 2 ? 1 : -1);
    b.record_response(step % 2 ? 1 : -1);
  }
}

TEST_CASE("contradictory answers raise the budget") {
  std::vector<std::string> warnings;
  set_log_sink([&](LogLevel l, const std::string& m) {
    if (l >= LogLevel::Warn) warnings.push_back(m);
  });
  // u1 <= 0.4 and u2 <= 0.4 cannot both hold on the simplex; 0.2 is needed.
  const std::vector<Observation> h{{{0, 2}, -1}, {{1, 2}, -1}};
  SUBCASE("zero schedule jumps to the minimal budget") {
    auto s = Session::resume(e1(), PreferencePolyhedron::simplex(2), Criterion::Mmu, {}, 3, h);
    REQUIRE(s.escalations().size() == 1);
    CHECK(s.escalations()[0].k == 2);
    CHECK(s.escalations()[0].from == 0.0);
    CHECK(s.escalations()[0].to == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(is_nonempty(s.bank(), s.model_at(s.k())));
    CHECK(s.gamma(3) >= s.gamma_floor());
    CHECK_NOTHROW(s.next_query());
    CHECK_NOTHROW(s.current_recommendation());
    CHECK(warnings.size() == 1);
  }
  SUBCASE("positive schedule doubles") {
    const NoiseConfig noise{0.01, 0.9};
    auto s = Session::resume(e1(), PreferencePolyhedron::simplex(2), Criterion::Mmu, noise, 3, h);
    REQUIRE(s.escalations().size() == 1);
    const double g2 = budget_gamma(noise, 2);
    double expect = g2;
    while (expect < 0.2) expect *= 2;
    CHECK(s.escalations()[0].from == doctest::Approx(g2));
    CHECK(s.escalations()[0].to == doctest::Approx(expect));
  }
  SUBCASE("without escalation the session reports the inconsistency") {
    OnlineOptions strict;
    strict.escalate = false;
    auto s = Session::resume(e1(), PreferencePolyhedron::simplex(2), Criterion::Mmu, {}, 3, h, strict);
    CHECK(s.escalations().empty());
    CHECK_THROWS_AS(s.next_query(), InfeasibleUncertainty);
    CHECK_THROWS_AS(s.current_recommendation(), InfeasibleUncertainty);
  }
  set_log_sink(nullptr);
}

TEST_CASE("session argument checks") {
  CHECK_THROWS_AS(e1_session(Criterion::Mmu, -1), ValidationError);
  CHECK_THROWS_AS(e1_session(Criterion::Mmu, 1, {0.1, 1.5}), DomainError);
  const auto done = e1_session(Criterion::Mmu, 0);
  CHECK(done.status() == SessionStatus::Completed);
  CHECK(done.current_recommendation().item == 2);
  CHECK_THROWS_AS(Session::resume(e1(), PreferencePolyhedron::simplex(2), Criterion::Mmu, {}, 1,
                                  {{{0, 1}, 1}, {{0, 2}, 1}}),
                  ValidationError);
}
