#pragma once

// Online elicitation: one query at a time, each chosen by solving the
// one-query offline problem on the current history at the next step's budget.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "elicit/model.hpp"
#include "elicit/offline.hpp"
#include "elicit/recommend.hpp"

namespace elicit {

enum class SessionStatus { Active, Completed };

const char* to_string(SessionStatus s);

struct BudgetEscalation {
  int k = 0;  // history length when the set emptied
  double from = 0.0;
  double to = 0.0;
};

enum class QueryPolicy { Lookahead, Random };

struct OnlineOptions {
  CcgOptions ccg;
  // Random asks a uniformly drawn query not yet asked (baseline runs).
  QueryPolicy policy = QueryPolicy::Lookahead;
  std::uint64_t random_seed = 0;
  // Raise the budget floor instead of failing when answers contradict.
  bool escalate = true;
};

class Session {
 public:
  Session(std::shared_ptr<const ItemBank> bank, PreferencePolyhedron base, Criterion criterion, NoiseConfig noise,
          int k_max, OnlineOptions opts = {});

  // Session that has already received `history` (escalating after each answer).
  static Session resume(std::shared_ptr<const ItemBank> bank, PreferencePolyhedron base, Criterion criterion,
                        NoiseConfig noise, int k_max, const std::vector<Observation>& history,
                        OnlineOptions opts = {});

  const ItemBank& bank() const { return *bank_; }
  const PreferencePolyhedron& base() const { return base_; }
  Criterion criterion() const { return criterion_; }
  const NoiseConfig& noise() const { return noise_; }
  const std::vector<Observation>& history() const { return history_; }
  int k() const { return static_cast<int>(history_.size()); }
  int k_max() const { return k_max_; }
  SessionStatus status() const { return k() >= k_max_ ? SessionStatus::Completed : SessionStatus::Active; }
  const std::optional<Query>& pending() const { return pending_; }
  double gamma_floor() const { return gamma_floor_; }
  const std::vector<BudgetEscalation>& escalations() const { return escalations_; }

  // Budget at step k: the schedule value, raised to the escalation floor.
  double gamma(int k) const;
  UncertaintyModel model_at(int k) const;

  // Computes (or returns the already pending) next query.
  Query next_query();
  void record_response(int response);
  Recommendation current_recommendation() const;

 private:
  void restore_consistency();

  std::shared_ptr<const ItemBank> bank_;
  PreferencePolyhedron base_;
  Criterion criterion_;
  NoiseConfig noise_;
  int k_max_;
  OnlineOptions opts_;
  std::vector<Observation> history_;
  std::optional<Query> pending_;
  double gamma_floor_ = 0.0;
  std::vector<BudgetEscalation> escalations_;
};

// One-step lookahead on a fixed model: the best single query, ties broken
// toward the smallest (first, second).
struct QueryChoice {
  Query query;
  double value = 0.0;
};
QueryChoice best_next_query(Criterion c, const ItemBank& bank, const UncertaintyModel& model,
                            const CcgOptions& opts = {});

}  // namespace elicit
