#include "elicit/online.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "elicit/errors.hpp"
#include "elicit/log.hpp"

namespace elicit {

const char* to_string(SessionStatus s) { return s == SessionStatus::Active ? "active" : "completed"; }

Session::Session(std::shared_ptr<const ItemBank> bank, PreferencePolyhedron base, Criterion criterion,
                 NoiseConfig noise, int k_max, OnlineOptions opts)
    : bank_(std::move(bank)), base_(std::move(base)), criterion_(criterion), noise_(noise), k_max_(k_max),
      opts_(std::move(opts)) {
  if (!bank_) throw ValidationError("session needs an item bank");
  if (k_max_ < 0) throw ValidationError("K_max must be >= 0");
  if (base_.dim() != bank_->dim()) throw ValidationError("preference set dimension differs from the item dimension");
  budget_gamma(noise_, 0);  // validates sigma and p
}

Session Session::resume(std::shared_ptr<const ItemBank> bank, PreferencePolyhedron base, Criterion criterion,
                        NoiseConfig noise, int k_max, const std::vector<Observation>& history, OnlineOptions opts) {
  Session s(std::move(bank), std::move(base), criterion, noise, k_max, std::move(opts));
  if (static_cast<int>(history.size()) > k_max) throw ValidationError("history longer than K_max");
  for (const auto& obs : history) {
    validate_query(obs.query, *s.bank_);
    s.pending_ = obs.query;
    s.record_response(obs.response);
  }
  return s;
}

double Session::gamma(int k) const { return std::max(budget_gamma(noise_, k), gamma_floor_); }

UncertaintyModel Session::model_at(int k) const { return UncertaintyModel(base_, gamma(k), history_); }

QueryChoice best_next_query(Criterion c, const ItemBank& bank, const UncertaintyModel& model, const CcgOptions& opts) {
  CcgOptions o = opts;
  o.delta = std::min(o.delta, 1e-7);
  o.fixed_queries.clear();
  const auto r = ccg(c, bank, model, 1, o);
  QueryChoice choice{r.plan.queries.front(), r.value};
  if (auto q = lexicographic_best_query(c, bank, model, r.value, o)) choice.query = *q;
  return choice;
}

Query Session::next_query() {
  if (status() == SessionStatus::Completed) throw UsageError("session is completed");
  if (pending_) return *pending_;
  const auto model = model_at(k() + 1);
  if (!is_nonempty(*bank_, model)) throw InfeasibleUncertainty("inconsistent history exceeds budget");
  if (opts_.policy == QueryPolicy::Random) {
    std::vector<Query> fresh;
    for (const auto& q : all_queries(*bank_))
      if (std::none_of(history_.begin(), history_.end(), [&](const Observation& o) { return o.query == q; }))
        fresh.push_back(q);
    if (fresh.empty()) fresh = all_queries(*bank_);
    std::mt19937_64 rng(opts_.random_seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k() + 1));
    pending_ = fresh[std::uniform_int_distribution<std::size_t>(0, fresh.size() - 1)(rng)];
  } else {
    pending_ = best_next_query(criterion_, *bank_, model, opts_.ccg).query;
  }
  return *pending_;
}

void Session::record_response(int response) {
  if (status() == SessionStatus::Completed) throw UsageError("session is completed");
  if (!pending_) throw UsageError("no pending query");
  if (response != 1 && response != -1) throw ValidationError("response must be +1 or -1");
  history_.push_back({*pending_, response});
  pending_.reset();
  if (opts_.escalate) restore_consistency();
}

void Session::restore_consistency() {
  const double start = gamma(k());
  if (is_nonempty(*bank_, model_at(k()))) return;
  double g = start;
  if (g <= 0.0) {
    const double need = minimal_budget(*bank_, UncertaintyModel(base_, 0.0, history_));
    g = need * (1.0 + 1e-9) + 1e-12;
  } else {
    g *= 2.0;
  }
  while (!is_nonempty(*bank_, UncertaintyModel(base_, g, history_))) g *= 2.0;
  gamma_floor_ = g;
  escalations_.push_back({k(), start, g});
  std::ostringstream os;
  os << "answers exceed the inconsistency budget at k=" << k() << "; budget raised from " << start << " to " << g;
  log_warning(os.str());
}

Recommendation Session::current_recommendation() const {
  const auto model = model_at(k());
  if (!is_nonempty(*bank_, model)) throw InfeasibleUncertainty("inconsistent history exceeds budget");
  return recommend(criterion_, *bank_, model);
}

}  // namespace elicit
