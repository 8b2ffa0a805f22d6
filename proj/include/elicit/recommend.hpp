#pragma once

// Robust recommendation over a finite recommendation set: max-min utility
// and min-max regret against the current uncertainty set.

#include <string>

#include "elicit/model.hpp"

namespace elicit {

enum class Criterion { Mmu, Mmr };

const char* to_string(Criterion c);
Criterion parse_criterion(const std::string& text);

struct Recommendation {
  int item = -1;
  // Worst-case utility (Mmu) or worst-case regret (Mmr).
  double guarantee = 0.0;
  Criterion criterion = Criterion::Mmu;
};

// min over the updated set of u . x. Throws InfeasibleUncertainty if empty.
double worst_case_utility(const Vector& x, const ItemBank& bank, const UncertaintyModel& model);

// max over the updated set of u . direction.
double max_linear(const Vector& direction, const ItemBank& bank, const UncertaintyModel& model);

Recommendation recommend_mmu(const ItemBank& bank, const UncertaintyModel& model);

// max over rivals x' in R of the LP max of u . (x' - x).
double worst_case_regret(const Vector& x, const ItemBank& bank, const UncertaintyModel& model);

Recommendation recommend_mmr(const ItemBank& bank, const UncertaintyModel& model);

Recommendation recommend(Criterion c, const ItemBank& bank, const UncertaintyModel& model);

// 1 + number of recommendable items with strictly higher utility under u.
int true_rank(int item, const Vector& u, const ItemBank& bank);

// Regret of `item` in hindsight under u.
double true_regret(int item, const Vector& u, const ItemBank& bank);

// min over u in the base set of max over x in R of u . x.
double full_information_utility(const ItemBank& bank, const PreferencePolyhedron& base);

}  // namespace elicit
