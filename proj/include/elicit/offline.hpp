#pragma once

// Offline query selection shared by both decision criteria.
//
// The exact problem is a mixed-binary program with one dual block per
// response scenario (and, for regret, per rival item). It can be solved
// directly or by column-and-constraint generation (CCG), where a main
// problem over a scenario pool alternates with a single feasibility MBLP
// that evaluates the incumbent plan and returns its worst scenario.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "elicit/model.hpp"
#include "elicit/recommend.hpp"
#include "elicit/solver.hpp"

namespace elicit {

// Response scenario over K queries: bit k set means s_k = -1.
using Scenario = std::uint32_t;

inline int response_of(Scenario s, int k) { return ((s >> k) & 1U) ? -1 : 1; }
Scenario scenario_from(const std::vector<int>& responses);
std::vector<int> responses_of(Scenario s, int num_queries);

struct CcgIteration {
  int iteration = 0;
  double tau = 0.0;    // main-problem value
  double theta = 0.0;  // feasibility value of the main problem's plan
  double lower = 0.0;
  double upper = 0.0;
  std::optional<Scenario> added;
  std::size_t pool_size = 0;
  double wall_ms = 0.0;
  QueryPlan plan;
};

struct CcgOptions {
  double delta = 1e-3;
  int max_iterations = 1000;
  // Response toggle constant; <= 0 selects the smallest valid value per plan.
  double big_m = 0.0;
  // Bound on the dual multipliers in the product linearization.
  double dual_bound = 1e4;
  int max_dual_escalations = 3;
  bool use_symmetry = true;
  // With use_symmetry off, still forbid repeated queries (lexicographic rows off).
  bool keep_distinct = false;
  // Cap on dual blocks in one formulation (capacity error beyond it).
  std::size_t max_blocks = 4096;
  // Queries pinned to the first positions of the plan (greedy stages).
  std::vector<Query> fixed_queries;
  solver::Controls controls;
  std::function<void(const CcgIteration&)> on_iteration;
};

struct CcgState {
  std::set<Scenario> pool;
  QueryPlan incumbent;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<CcgIteration> trace;
  int main_solves = 0;
  bool converged = false;
  // Iterations where the bound sandwich was violated beyond 1e-6.
  int sandwich_violations = 0;
  std::string note;

  double gap() const { return upper - lower; }
};

struct OfflineResult {
  QueryPlan plan;
  double value = 0.0;
  CcgState state;
};

// Binary selectors encoding the plan: v[k][i] / w[k][i] pick the first /
// second item of query k; z[k][k'][i] flags y^k_i != y^k'_i for k < k'.
struct QueryEncoding {
  int num_items = 0;
  int num_fixed = 0;
  std::vector<std::vector<solver::Var>> v, w;
  std::vector<std::vector<std::vector<solver::Var>>> z;
};

struct DualBlock {
  std::vector<solver::Var> alpha;       // per query
  std::vector<solver::Var> alpha_hist;  // per answered query
  std::vector<solver::Var> beta;        // per base row
  solver::Var mu;
  int rival = -1;  // regret blocks only
};

struct ScenarioBlock {
  Scenario scenario = 0;
  std::vector<solver::Var> choice;  // recommendation selector over rec_ids
  std::vector<DualBlock> duals;
};

struct Formulation {
  Criterion criterion = Criterion::Mmu;
  int num_queries = 0;
  double gamma = 0.0;
  double dual_bound = 0.0;
  solver::Model model;
  solver::Var tau;
  QueryEncoding encoding;
  std::vector<ScenarioBlock> blocks;
  Vector base_rhs;
};

std::vector<Scenario> all_scenarios(int num_queries);

// Main problem over the given scenarios (all of them gives the exact MBLP).
// `prior` carries the base set, the budget and any answered queries.
Formulation build_formulation(Criterion c, const ItemBank& bank, const UncertaintyModel& prior,
                              int num_queries, const std::vector<Scenario>& scenarios,
                              const CcgOptions& opts);

// Lexicographic ordering of the y = v + w vectors plus no-repeat rows.
// Lexicographic rows only link queries that are not pinned.
void add_symmetry_breaking(solver::Model& model, QueryEncoding& encoding, bool lexicographic = true);

struct MilpResult {
  solver::Status status = solver::Status::Error;
  QueryPlan plan;
  double value = 0.0;
  std::vector<int> recommendations;  // per scenario, item index
  std::optional<double> mip_gap;
  double dual_bound = 0.0;
  int dual_escalations = 0;
  double wall_seconds = 0.0;
};

QueryPlan extract_plan(const Formulation& f, const solver::SolveOutcome& out);

// Builds, solves and checks that no binding block has its duals at the
// linearization bound (re-solving with a 10x bound when one does).
MilpResult solve_formulation(Criterion c, const ItemBank& bank, const UncertaintyModel& prior,
                             int num_queries, const std::vector<Scenario>& scenarios,
                             const CcgOptions& opts);

struct PlanEvaluation {
  double value = 0.0;
  Scenario worst = 0;
};

// Single feasibility MBLP: for Mmu the min over scenarios of the best
// worst-case utility, for Mmr the max over scenarios of the min-max regret.
PlanEvaluation evaluate_plan(Criterion c, const QueryPlan& plan, const ItemBank& bank,
                             const UncertaintyModel& prior, const CcgOptions& opts = {});

OfflineResult ccg(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                  const CcgOptions& opts, const std::set<Scenario>& initial_pool = {});

struct GreedyResult {
  QueryPlan plan;
  std::vector<double> trace;  // value after each stage
  bool complete = true;
  std::string warning;
};

GreedyResult greedy(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                    const CcgOptions& opts);

// Among queries whose one-step value is within tol of `value`, the
// lexicographically smallest (first, second).
std::optional<Query> lexicographic_best_query(Criterion c, const ItemBank& bank, const UncertaintyModel& prior,
                               double value, const CcgOptions& opts, double tol = 1e-6);

// Binary part of a solution: the plan and one recommended item per scenario.
struct SolutionHint {
  QueryPlan plan;
  std::vector<int> recommendations;
};

// Recommendation the criterion makes in each scenario of `plan` (rec_ids[0]
// where the scenario's set is empty).
std::vector<int> scenario_recommendations(Criterion c, const QueryPlan& plan, const ItemBank& bank,
                                          const UncertaintyModel& prior);

// Extends a K-query solution to K + 1 queries: random unused query, answers
// to it ignored, then queries and scenarios permuted into lexicographic order.
SolutionHint extend_hint(const SolutionHint& prev, const ItemBank& bank, Criterion c,
                         const UncertaintyModel& prior, std::mt19937_64& rng, bool lexicographic = true);

// Assignment over every binary of the formulation matching the hint.
std::vector<std::pair<solver::Var, double>> hint_assignment(const Formulation& f, const SolutionHint& hint,
                                                            const ItemBank& bank);

// Lexicographic order of queries by y = v + w (index 0 most significant).
bool y_less(const Query& a, const Query& b);

}  // namespace elicit
