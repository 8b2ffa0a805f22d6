#pragma once

// Items, queries, responses and the polyhedral uncertainty set over utility
// vectors that is refined by (possibly inconsistent) pairwise answers.

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "elicit/solver.hpp"

namespace elicit {

using Vector = std::vector<double>;

double dot(const Vector& a, const Vector& b);
Vector difference(const Vector& a, const Vector& b);

class ItemBank {
 public:
  // Validates dimensions, id uniqueness and the index sets.
  ItemBank(std::vector<std::string> ids, std::vector<Vector> items,
           std::vector<std::string> attribute_names = {}, std::vector<int> query_ids = {},
           std::vector<int> rec_ids = {});

  int size() const { return static_cast<int>(items_.size()); }
  int dim() const { return static_cast<int>(items_.front().size()); }
  const Vector& item(int i) const { return items_.at(i); }
  const std::vector<Vector>& items() const { return items_; }
  const std::string& id(int i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::string>& attribute_names() const { return attribute_names_; }
  const std::vector<int>& query_ids() const { return query_ids_; }
  const std::vector<int>& rec_ids() const { return rec_ids_; }
  bool queryable(int i) const;
  bool recommendable(int i) const;
  int index_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Vector> items_;
  std::vector<std::string> attribute_names_;
  std::vector<int> query_ids_;
  std::vector<int> rec_ids_;
};

// CSV: header row, `id` first, numeric attribute columns, optional boolean
// `in_query_set` / `in_rec_set` columns.
ItemBank load_item_bank(std::istream& in);
ItemBank load_item_bank_file(const std::string& path);
void write_item_bank(std::ostream& out, const ItemBank& bank);

// Pairwise comparison between two item indices (0-based), first < second.
struct Query {
  int first = 0;
  int second = 1;
  friend auto operator<=>(const Query&, const Query&) = default;
};

struct QueryPlan {
  std::vector<Query> queries;
  std::size_t size() const { return queries.size(); }
  friend bool operator==(const QueryPlan&, const QueryPlan&) = default;
};

// Throws ValidationError on ordering, membership or duplicate violations.
void validate_query(const Query& q, const ItemBank& bank);
void validate_plan(const QueryPlan& plan, const ItemBank& bank, bool allow_duplicates = false);

// All admissible queries in lexicographic (first, second) order.
std::vector<Query> all_queries(const ItemBank& bank);

// Responses are +1 (first preferred) or -1 (second preferred).
struct ResponseVector {
  std::vector<int> responses;
};
void validate_responses(const ResponseVector& s, const QueryPlan& plan);

// Polyhedron { u : B u >= b }; equalities are stored as inequality pairs.
class PreferencePolyhedron {
 public:
  // Checks non-emptiness and boundedness by LP; computes the bounding box.
  PreferencePolyhedron(std::vector<Vector> rows, Vector rhs);

  static PreferencePolyhedron box(int dim, double lo, double hi);
  static PreferencePolyhedron simplex(int dim);

  int dim() const { return dim_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<Vector>& rows() const { return rows_; }
  const Vector& rhs() const { return rhs_; }
  const Vector& box_lower() const { return box_lo_; }
  const Vector& box_upper() const { return box_hi_; }
  bool contains(const Vector& u, double tol = 1e-9) const;

 private:
  int dim_ = 0;
  std::vector<Vector> rows_;
  Vector rhs_;
  Vector box_lo_, box_hi_;
};

// Rows `coef . u >= rhs` read from CSV (J coefficient columns then rhs).
PreferencePolyhedron load_polyhedron(std::istream& in);

struct Observation {
  Query query;
  int response = 1;
  friend bool operator==(const Observation&, const Observation&) = default;
};

// Base polyhedron, inconsistency budget and answered queries. Immutable;
// updates return new values.
class UncertaintyModel {
 public:
  UncertaintyModel(PreferencePolyhedron base, double gamma, std::vector<Observation> history = {});

  const PreferencePolyhedron& base() const { return base_; }
  double gamma() const { return gamma_; }
  const std::vector<Observation>& history() const { return history_; }

  UncertaintyModel with(const Observation& obs) const;
  UncertaintyModel with_gamma(double gamma) const;

 private:
  PreferencePolyhedron base_;
  double gamma_ = 0.0;
  std::vector<Observation> history_;
};

struct NoiseConfig {
  double sigma = 0.0;
  double confidence = 0.9;
};

// Inverse error function on (-1, 1): rational initial guess refined by two
// Newton steps, accurate to ~1e-12 on the open interval.
double erf_inv(double y);

// 2 sigma sqrt(k) erf^-1(2p - 1).
double budget_gamma(const NoiseConfig& noise, int k);

struct LinearRow {
  Vector coef;  // over (u, eps)
  solver::Sense sense = solver::Sense::GreaterEqual;
  double rhs = 0.0;
};

// Constraint system over (u, eps) with u in R^J and eps in R^K.
struct LinearSystem {
  int num_u = 0;
  int num_eps = 0;
  std::vector<LinearRow> rows;
};

LinearSystem updated_constraints(const ItemBank& bank, const UncertaintyModel& model);

// Registers (u, eps) variables on `m` and adds the system's rows.
struct SystemVars {
  std::vector<solver::Var> u;
  std::vector<solver::Var> eps;
};
SystemVars add_system(solver::Model& m, const LinearSystem& sys);

bool is_nonempty(const ItemBank& bank, const UncertaintyModel& model);

// Smallest budget for which the history is consistent with the base set.
double minimal_budget(const ItemBank& bank, const UncertaintyModel& model);

// Whether u is in the u-projection of the updated set.
bool contains(const ItemBank& bank, const UncertaintyModel& model, const Vector& u, double tol = 1e-7);

}  // namespace elicit
