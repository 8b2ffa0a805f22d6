#pragma once

// Min-max regret entry points over the shared offline machinery.

#include "elicit/offline.hpp"

namespace elicit {

inline Formulation build_mmr_milp(const ItemBank& bank, int K, const UncertaintyModel& prior,
                                  const CcgOptions& opts = {}) {
  return build_formulation(Criterion::Mmr, bank, prior, K, all_scenarios(K), opts);
}

inline MilpResult solve_mmr_milp(const ItemBank& bank, int K, const UncertaintyModel& prior,
                                 const CcgOptions& opts = {}) {
  return solve_formulation(Criterion::Mmr, bank, prior, K, all_scenarios(K), opts);
}

inline double evaluate_queries_mmr(const QueryPlan& plan, const ItemBank& bank, const UncertaintyModel& prior,
                                   const CcgOptions& opts = {}) {
  return evaluate_plan(Criterion::Mmr, plan, bank, prior, opts).value;
}

inline OfflineResult ccg_mmr(const ItemBank& bank, int K, const UncertaintyModel& prior,
                             const CcgOptions& opts = {}) {
  return ccg(Criterion::Mmr, bank, prior, K, opts);
}

inline SolutionHint warm_start_mmr(const SolutionHint& prev, const ItemBank& bank, const UncertaintyModel& prior,
                                   std::mt19937_64& rng) {
  return extend_hint(prev, bank, Criterion::Mmr, prior, rng);
}

inline GreedyResult greedy_mmr(const ItemBank& bank, int K, const UncertaintyModel& prior,
                               const CcgOptions& opts = {}) {
  return greedy(Criterion::Mmr, bank, prior, K, opts);
}

}  // namespace elicit
