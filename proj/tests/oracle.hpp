#pragma once

// Brute-force reference values built on vertex enumeration of the (u, eps)
// polytope. Shares data types with the library but no optimization code.

#include <optional>
#include <random>
#include <vector>

#include "elicit/model.hpp"
#include "elicit/recommend.hpp"

namespace oracle {

using elicit::Vector;

// Vertices of { x in R^n : a_r . x >= b_r }, assumed bounded.
std::vector<Vector> vertices(const std::vector<Vector>& a, const Vector& b, int n, double tol = 1e-9);

// u-parts of the vertices of the updated set; empty when the set is empty.
std::vector<Vector> utility_vertices(const elicit::ItemBank& bank, const elicit::PreferencePolyhedron& base,
                                     const std::vector<elicit::Observation>& obs, double gamma);

// Criterion value of the best recommendation on the given set (nullopt if empty).
std::optional<double> recommendation_value(elicit::Criterion c, const elicit::ItemBank& bank,
                                           const std::vector<Vector>& verts);

// Worst scenario value of a fixed plan; empty scenarios are skipped.
double plan_value(elicit::Criterion c, const elicit::QueryPlan& plan, const elicit::ItemBank& bank,
                  const elicit::UncertaintyModel& prior);

struct BestPlan {
  double value = 0.0;
  std::vector<elicit::QueryPlan> argmax;  // every plan within 1e-6 of value
};

// Exhaustive search over plans of K distinct queries.
BestPlan best_plan(elicit::Criterion c, const elicit::ItemBank& bank, const elicit::UncertaintyModel& prior, int K);

// Random bank with items uniform in [-1, 1]^J and every item queryable/recommendable.
elicit::ItemBank random_bank(int I, int J, std::mt19937_64& rng);

}  // namespace oracle
