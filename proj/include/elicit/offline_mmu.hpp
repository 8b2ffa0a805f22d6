#pragma once

// Max-min utility entry points over the shared offline machinery.

#include "elicit/offline.hpp"

namespace elicit {

inline Formulation build_mmu_milp(const ItemBank& bank, int K, const UncertaintyModel& prior,
                                  const CcgOptions& opts = {}) {
  return build_formulation(Criterion::Mmu, bank, prior, K, all_scenarios(K), opts);
}

inline MilpResult solve_mmu_milp(const ItemBank& bank, int K, const UncertaintyModel& prior,
                                 const CcgOptions& opts = {}) {
  return solve_formulation(Criterion::Mmu, bank, prior, K, all_scenarios(K), opts);
}

inline double evaluate_queries_mmu(const QueryPlan& plan, const ItemBank& bank, const UncertaintyModel& prior,
                                   const CcgOptions& opts = {}) {
  return evaluate_plan(Criterion::Mmu, plan, bank, prior, opts).value;
}

inline OfflineResult ccg_mmu(const ItemBank& bank, int K, const UncertaintyModel& prior,
                             const CcgOptions& opts = {}) {
  return ccg(Criterion::Mmu, bank, prior, K, opts);
}

inline SolutionHint warm_start_mmu(const SolutionHint& prev, const ItemBank& bank, const UncertaintyModel& prior,
                                   std::mt19937_64& rng) {
  return extend_hint(prev, bank, Criterion::Mmu, prior, rng);
}

inline GreedyResult greedy_mmu(const ItemBank& bank, int K, const UncertaintyModel& prior,
                               const CcgOptions& opts = {}) {
  return greedy(Criterion::Mmu, bank, prior, K, opts);
}

}  // namespace elicit
