#include <algorithm>
#include <random>

#include "doctest.h"
#include "elicit/errors.hpp"
#include "elicit/log.hpp"
#include "elicit/offline_mmr.hpp"
#include "elicit/offline_mmu.hpp"
#include "oracle.hpp"

using namespace elicit;

namespace {

ItemBank e1() { return ItemBank({"1", "2", "3"}, {{1, 0}, {0, 1}, {0.4, 0.4}}); }
UncertaintyModel e1_prior(double gamma = 0.0) { return UncertaintyModel(PreferencePolyhedron::simplex(2), gamma); }
UncertaintyModel box_prior(int J, double gamma) { return UncertaintyModel(PreferencePolyhedron::box(J, -1, 1), gamma); }

QueryPlan plan(std::initializer_list<Query> qs) { return QueryPlan{std::vector<Query>(qs)}; }

struct QuietLog {
  std::vector<std::string> warnings;
  QuietLog() {
    set_log_sink([this](LogLevel l, const std::string& m) {
      if (l >= LogLevel::Warn) warnings.push_back(m);
    });
  }
  ~QuietLog() { set_log_sink(nullptr); }
};

void check_trace(const OfflineResult& r, Criterion c, int K, double delta) {
  std::size_t prev_pool = 0;
  for (const auto& it : r.state.trace) {
    CHECK(it.lower <= it.upper + 1e-9);
    CHECK(it.pool_size >= prev_pool);
    if (it.added) {
      CHECK(it.pool_size + 1 > prev_pool);
    }
    prev_pool = it.pool_size + (it.added ? 1 : 0);
    if (it.tau != std::numeric_limits<double>::infinity() && it.tau != -std::numeric_limits<double>::infinity()) {
      if (c == Criterion::Mmu)
        CHECK(it.theta <= it.tau + 1e-6);
      else
        CHECK(it.theta >= it.tau - 1e-6);
    }
  }
  CHECK(r.state.main_solves <= (1 << K));
  CHECK(r.state.sandwich_violations == 0);
  CHECK(r.state.gap() <= delta + 1e-9);
}

}  // namespace

TEST_CASE("oracle reproduces the e1 reference values") {
  const auto bank = e1();
  const auto prior = e1_prior();
  CHECK(oracle::plan_value(Criterion::Mmu, plan({{0, 1}}), bank, prior) == doctest::Approx(0.5));
  CHECK(oracle::plan_value(Criterion::Mmu, plan({{0, 2}}), bank, prior) == doctest::Approx(0.4));
  CHECK(oracle::plan_value(Criterion::Mmu, {}, bank, prior) == doctest::Approx(0.4));
  CHECK(oracle::plan_value(Criterion::Mmr, plan({{0, 1}}), bank, prior) == doctest::Approx(0.0));
  CHECK(oracle::plan_value(Criterion::Mmr, plan({{0, 2}}), bank, prior) == doctest::Approx(0.2));
  CHECK(oracle::plan_value(Criterion::Mmr, {}, bank, prior) == doctest::Approx(0.6));
  const auto best = oracle::best_plan(Criterion::Mmu, bank, prior, 1);
  CHECK(best.value == doctest::Approx(0.5));
  REQUIRE(best.argmax.size() == 1);
  CHECK(best.argmax[0] == plan({{0, 1}}));
  CHECK(oracle::best_plan(Criterion::Mmu, bank, prior, 2).value == doctest::Approx(0.5));
}

TEST_CASE("mmu milp on e1") {
  const auto bank = e1();
  const auto f = build_mmu_milp(bank, 1, e1_prior());
  CHECK(f.blocks.size() == 2);
  const auto r = solve_mmu_milp(bank, 1, e1_prior());
  REQUIRE(r.status == solver::Status::Optimal);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.plan == plan({{0, 1}}));
  CHECK(solve_mmu_milp(bank, 2, e1_prior()).value == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("single possible query is forced") {
  const ItemBank two({"a", "b"}, {{1, 0.2}, {0.1, 1}});
  const auto prior = box_prior(2, 0.0);
  const auto r = solve_mmu_milp(two, 1, prior);
  REQUIRE(r.status == solver::Status::Optimal);
  CHECK(r.plan == plan({{0, 1}}));
  CHECK(r.value == doctest::Approx(evaluate_queries_mmu(r.plan, two, prior)).epsilon(1e-6));
}

TEST_CASE("plan evaluation on e1") {
  const auto bank = e1();
  CHECK(evaluate_queries_mmu(plan({{0, 1}}), bank, e1_prior()) == doctest::Approx(0.5));
  CHECK(evaluate_queries_mmu(plan({{0, 2}}), bank, e1_prior()) == doctest::Approx(0.4));
  CHECK(evaluate_queries_mmu({}, bank, e1_prior()) == doctest::Approx(0.4));
  CHECK(evaluate_queries_mmr(plan({{0, 1}}), bank, e1_prior()) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(evaluate_queries_mmr(plan({{0, 2}}), bank, e1_prior()) == doctest::Approx(0.2));
  CHECK(evaluate_queries_mmr({}, bank, e1_prior()) == doctest::Approx(0.6));
}

TEST_CASE("ccg on e1") {
  const auto bank = e1();
  CcgOptions opts;
  const auto r = ccg_mmu(bank, 1, e1_prior(), opts);
  CHECK(r.plan == plan({{0, 1}}));
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.state.pool.size() <= 2);
  check_trace(r, Criterion::Mmu, 1, opts.delta);

  const auto m = ccg_mmr(bank, 1, e1_prior(), opts);
  CHECK(m.plan == plan({{0, 1}}));
  CHECK(m.value == doctest::Approx(0.0).epsilon(1e-6));
  check_trace(m, Criterion::Mmr, 1, opts.delta);
}

TEST_CASE("pre-seeded pool stops after one main solve") {
  std::mt19937_64 rng(4);
  const auto bank = oracle::random_bank(4, 2, rng);
  const auto prior = box_prior(2, 0.0);
  const auto seeds = all_scenarios(2);
  for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
    const auto r = ccg(c, bank, prior, 2, {}, {seeds.begin(), seeds.end()});
    CHECK(r.state.main_solves == 1);
    REQUIRE(r.state.trace.size() == 1);
    CHECK(r.state.trace[0].theta == doctest::Approx(r.state.trace[0].tau).epsilon(1e-6));
  }
}

TEST_CASE("ccg, milp and enumeration agree") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const int I = 3 + trial % 3, J = 2 + trial % 2, K = 1 + trial % 2;
    const double gamma = trial % 2 ? 0.1 : 0.0;
    const auto bank = oracle::random_bank(I, J, rng);
    const auto prior = box_prior(J, gamma);
    for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
      if (c == Criterion::Mmr && I > 4) continue;
      CAPTURE(trial);
      CAPTURE(to_string(c));
      const double expect = oracle::best_plan(c, bank, prior, K).value;
      const auto milp = solve_formulation(c, bank, prior, K, all_scenarios(K), {});
      REQUIRE(milp.status == solver::Status::Optimal);
      CHECK(milp.value == doctest::Approx(expect).epsilon(1e-6));
      CcgOptions opts;
      opts.delta = 1e-7;
      const auto r = ccg(c, bank, prior, K, opts);
      CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
      CHECK(oracle::plan_value(c, r.plan, bank, prior) == doctest::Approx(expect).epsilon(1e-6));
      check_trace(r, c, K, opts.delta);
    }
  }
}

TEST_CASE("plan evaluation matches enumeration and ignores query order") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 8; ++trial) {
    const int J = 2 + trial % 2;
    const auto bank = oracle::random_bank(4, J, rng);
    const auto prior = box_prior(J, trial % 2 ? 0.1 : 0.0);
    auto qs = all_queries(bank);
    std::shuffle(qs.begin(), qs.end(), rng);
    QueryPlan p{{qs[0], qs[1]}};
    QueryPlan swapped{{qs[1], qs[0]}};
    for (Criterion c : {Criterion::Mmu, Criterion::Mmr}) {
      const double expect = oracle::plan_value(c, p, bank, prior);
      const double v = evaluate_plan(c, p, bank, prior).value;
      CHECK(v == doctest::Approx(expect).epsilon(1e-6));
      CHECK(evaluate_plan(c, swapped, bank, prior).value == doctest::Approx(v).epsilon(1e-6));
      if (c == Criterion::Mmr) CHECK(v >= -1e-9);
    }
  }
}

TEST_CASE("symmetry rows") {
  SUBCASE("no-op for a single query") {
    std::mt19937_64 rng(1);
    const auto bank = oracle::random_bank(4, 2, rng);
    CcgOptions with, without;
    without.use_symmetry = false;
    const auto a = build_mmu_milp(bank, 1, box_prior(2, 0), with);
    const auto b = build_mmu_milp(bank, 1, box_prior(2, 0), without);
    CHECK(a.model.num_rows() == b.model.num_rows());
    CHECK(a.model.num_vars() == b.model.num_vars());
  }
  SUBCASE("lexicographic order admits (1,3) before (1,2) and forbids the swap") {
    std::mt19937_64 rng(2);
    const auto bank = oracle::random_bank(4, 2, rng);
    auto f = build_formulation(Criterion::Mmu, bank, box_prior(2, 0), 2, {}, {});
    f.model.set_objective(solver::LinExpr(0.0), solver::ObjSense::Minimize);
    auto fixed = [&](const QueryPlan& p) {
      return solver::solve_with_fixed_binaries(f.model, hint_assignment(f, {p, {}}, bank)).status;
    };
    CHECK(fixed(plan({{0, 2}, {0, 1}})) == solver::Status::Optimal);
    CHECK(fixed(plan({{0, 1}, {0, 2}})) == solver::Status::Infeasible);
    CHECK(fixed(plan({{1, 2}, {0, 2}})) == solver::Status::Optimal);
    CHECK(fixed(plan({{0, 1}, {0, 1}})) == solver::Status::Infeasible);
    CHECK(y_less({0, 2}, {0, 1}));
    CHECK(y_less({1, 2}, {0, 2}));
    CHECK_FALSE(y_less({0, 1}, {0, 1}));
  }
  SUBCASE("optimum unchanged on random instances") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
      const auto bank = oracle::random_bank(5, 2, rng);
      const auto prior = box_prior(2, 0.0);
      CcgOptions without;
      without.use_symmetry = false;
      const auto a = solve_mmu_milp(bank, 2, prior);
      const auto b = solve_mmu_milp(bank, 2, prior, without);
      CHECK(a.value == doctest::Approx(b.value).epsilon(1e-6));
    }
  }
}

TEST_CASE("lexicographic rows alone keep the optimum; repeats can win under a budget") {
  std::mt19937_64 rng(6006);
  bool repeat_wins = false;
  for (int n = 0; n < 6; ++n) {
    const int J = 2 + n % 2;
    const auto bank = oracle::random_bank(4 + n % 2, J, rng);
    const auto prior = box_prior(J, n % 3 ? 0.1 : 0.0);
    CcgOptions lex_off, none;
    lex_off.use_symmetry = none.use_symmetry = false;
    lex_off.keep_distinct = true;
    const auto full = solve_mmu_milp(bank, 2, prior);
    const auto distinct = solve_mmu_milp(bank, 2, prior, lex_off);
    CHECK(distinct.plan.queries[0] != distinct.plan.queries[1]);
    CHECK(distinct.value == doctest::Approx(full.value).epsilon(1e-6));
    const auto unrestricted = solve_mmu_milp(bank, 2, prior, none);
    CHECK(unrestricted.value >= full.value - 1e-6);
    CHECK(oracle::plan_value(Criterion::Mmu, unrestricted.plan, bank, prior) == doctest::Approx(unrestricted.value).epsilon(1e-6));
    if (unrestricted.value > full.value + 1e-6) {
      CHECK(prior.gamma() > 0);
      CHECK(unrestricted.plan.queries[0] == unrestricted.plan.queries[1]);
      repeat_wins = true;
    }
  }
  CHECK(repeat_wins);
}

TEST_CASE("warm-start hints") {
  const auto bank = e1();
  std::mt19937_64 rng(5);
  SUBCASE("base case") {
    const auto h = warm_start_mmu({}, bank, e1_prior(), rng);
    CHECK(h.plan.size() == 1);
    REQUIRE(h.recommendations.size() == 2);
    CHECK(h.recommendations[0] == 2);
    CHECK(h.recommendations[1] == 2);
  }
  SUBCASE("e1 extension keeps the first query") {
    const SolutionHint prev{plan({{0, 1}}), scenario_recommendations(Criterion::Mmu, plan({{0, 1}}), bank, e1_prior())};
    const auto h = warm_start_mmu(prev, bank, e1_prior(), rng);
    REQUIRE(h.plan.size() == 2);
    CHECK(std::count(h.plan.queries.begin(), h.plan.queries.end(), Query{0, 1}) == 1);
    CHECK(evaluate_queries_mmu(h.plan, bank, e1_prior()) >= 0.5 - 1e-9);
  }
  SUBCASE("exhausted query set") {
    const SolutionHint all{plan({{0, 1}, {0, 2}, {1, 2}}), std::vector<int>(8, 0)};
    CHECK_THROWS_AS(warm_start_mmu(all, bank, e1_prior(), rng), ValidationError);
  }
  SUBCASE("hints are feasible without repair and keep the value") {
    for (int trial = 0; trial < 20; ++trial) {
      const int K = 1 + trial % 2;
      const Criterion c = trial % 3 == 0 ? Criterion::Mmr : Criterion::Mmu;
      const auto rb = oracle::random_bank(4, 2, rng);
      const auto prior = box_prior(2, trial % 2 ? 0.1 : 0.0);
      const auto prev = solve_formulation(c, rb, prior, K, all_scenarios(K), {});
      REQUIRE(prev.status == solver::Status::Optimal);
      const SolutionHint base{prev.plan, scenario_recommendations(c, prev.plan, rb, prior)};
      const auto h = extend_hint(base, rb, c, prior, rng);
      const auto f = build_formulation(c, rb, prior, K + 1, all_scenarios(K + 1), {});
      const auto out = solver::solve_with_fixed_binaries(f.model, hint_assignment(f, h, rb));
      REQUIRE(out.status == solver::Status::Optimal);
      if (c == Criterion::Mmu)
        CHECK(*out.objective >= prev.value - 1e-6);
      else
        CHECK(*out.objective <= prev.value + 1e-6);
      auto hinted = f.model;
      hinted.set_hint(hint_assignment(f, h, rb));
      const auto full = solver::solve(hinted);
      REQUIRE(full.optimal());
      CHECK(*full.objective == doctest::Approx(*solver::solve(f.model).objective).epsilon(1e-6));
    }
  }
}

TEST_CASE("greedy") {
  const auto bank = e1();
  const auto g1 = greedy_mmu(bank, 1, e1_prior());
  CHECK(g1.plan == plan({{0, 1}}));
  CHECK(g1.trace.back() == doctest::Approx(0.5).epsilon(1e-6));
  const auto g2 = greedy_mmu(bank, 2, e1_prior());
  CHECK(g2.plan.size() == 2);
  CHECK(g2.trace.back() == doctest::Approx(0.5).epsilon(1e-6));

  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 8; ++trial) {
    const auto rb = oracle::random_bank(5, 2, rng);
    const auto prior = box_prior(2, 0.0);
    const auto g = greedy_mmu(rb, 2, prior);
    REQUIRE(g.trace.size() == 2);
    CHECK(g.trace[1] >= g.trace[0] - 1e-6);
    const double exact = oracle::best_plan(Criterion::Mmu, rb, prior, 2).value;
    CHECK(g.trace.back() <= exact + 1e-6);
    CHECK(g.plan.queries[0] == greedy_mmu(rb, 1, prior).plan.queries[0]);
  }
  const auto gm = greedy_mmr(bank, 2, e1_prior());
  CHECK(gm.trace.back() == doctest::Approx(0.0).epsilon(1e-6));
  const auto over = greedy_mmu(bank, 4, e1_prior());
  CHECK_FALSE(over.complete);
  CHECK(over.plan.size() == 3);
}

TEST_CASE("mmr milp on e1") {
  const auto bank = e1();
  const auto r = solve_mmr_milp(bank, 1, e1_prior());
  REQUIRE(r.status == solver::Status::Optimal);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(r.plan == plan({{0, 1}}));
  CHECK(build_mmr_milp(bank, 1, e1_prior()).blocks.size() == 2);
  CHECK(build_mmr_milp(bank, 1, e1_prior()).blocks[0].duals.size() == 3);
  const ItemBank single({"1", "2", "3"}, bank.items(), {}, {}, {2});
  CHECK(solve_mmr_milp(single, 2, e1_prior()).value == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("criteria dominate each other on their own measure") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto bank = oracle::random_bank(4, 2, rng);
    const auto prior = box_prior(2, 0.0);
    const auto u = solve_mmu_milp(bank, 1, prior);
    const auto r = solve_mmr_milp(bank, 1, prior);
    CHECK(evaluate_queries_mmr(r.plan, bank, prior) <= evaluate_queries_mmr(u.plan, bank, prior) + 1e-6);
    CHECK(evaluate_queries_mmu(u.plan, bank, prior) >= evaluate_queries_mmu(r.plan, bank, prior) - 1e-6);
  }
}

TEST_CASE("dual bound escalation") {
  QuietLog log;
  CcgOptions opts;
  opts.dual_bound = 0.05;
  // Only (1,2) can be asked and only items 1, 2 recommended, so the
  // optimum needs multipliers of 0.5.
  const auto base = e1();
  const ItemBank bank(base.ids(), base.items(), {}, {0, 1}, {0, 1});
  const auto r = solve_mmu_milp(bank, 1, e1_prior(), opts);
  REQUIRE(r.status == solver::Status::Optimal);
  CHECK(r.dual_escalations >= 1);
  CHECK(r.dual_bound > 0.05);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_FALSE(log.warnings.empty());

  // Truncation that steers the main problem to another plan is caught by
  // the bound sandwich inside the decomposition.
  const auto c = ccg_mmu(e1(), 1, e1_prior(), opts);
  CHECK(c.value == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(c.state.sandwich_violations == 0);
}

TEST_CASE("offline errors") {
  const auto bank = e1();
  CcgOptions tiny;
  tiny.max_blocks = 3;
  CHECK_THROWS_AS(build_mmu_milp(bank, 2, e1_prior(), tiny), CapacityError);
  CHECK_THROWS_AS(build_mmu_milp(bank, 4, e1_prior()), ValidationError);
  CHECK_THROWS_AS(evaluate_queries_mmu(plan({{1, 0}}), bank, e1_prior()), ValidationError);
  CHECK(scenario_from({1, -1, -1}) == 6U);
  CHECK(responses_of(6U, 3) == std::vector<int>{1, -1, -1});
}
