#include "elicit/offline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "elicit/errors.hpp"
#include "elicit/log.hpp"

namespace elicit {

using solver::LinExpr;
using solver::Sense;
using solver::Var;

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::string name_of(const char* stem, std::initializer_list<long> idx) {
  std::string s(stem);
  for (long i : idx) s += "_" + std::to_string(i);
  return s;
}

// Signed difference s_h (x^a - x^b) of an answered query.
Vector history_direction(const ItemBank& bank, const Observation& obs) {
  Vector g = difference(bank.item(obs.query.first), bank.item(obs.query.second));
  if (obs.response < 0)
    for (double& x : g) x = -x;
  return g;
}

// Bound on |u . d| over the bounding box of the base set.
double box_bound(const Vector& d, const PreferencePolyhedron& base) {
  double m = 0.0;
  for (int j = 0; j < base.dim(); ++j)
    m += std::abs(d[j]) * std::max(std::abs(base.box_lower()[j]), std::abs(base.box_upper()[j]));
  return m;
}

void check_budget(const ItemBank& bank, const UncertaintyModel& prior) {
  if (!is_nonempty(bank, prior)) throw InfeasibleUncertainty("infeasible uncertainty");
}

void check_plan_size(const ItemBank& bank, int num_queries, const CcgOptions& opts) {
  if (num_queries < 0) throw ValidationError("number of queries must be non-negative");
  if (num_queries > 31) throw CapacityError("at most 31 queries per plan");
  if (static_cast<int>(opts.fixed_queries.size()) > num_queries)
    throw ValidationError("more pinned queries than plan positions");
  for (const auto& q : opts.fixed_queries) validate_query(q, bank);
  if ((opts.use_symmetry || opts.keep_distinct) && num_queries > static_cast<int>(all_queries(bank).size()))
    throw ValidationError("plan asks more queries than there are distinct pairs");
}

// First plan, in combination order over the free positions, not yet tried.
QueryPlan fallback_plan(const ItemBank& bank, int num_queries, const std::vector<Query>& fixed,
                        const std::set<std::vector<Query>>& tried) {
  std::vector<Query> candidates;
  for (const auto& q : all_queries(bank))
    if (std::find(fixed.begin(), fixed.end(), q) == fixed.end()) candidates.push_back(q);
  const int need = num_queries - static_cast<int>(fixed.size());
  QueryPlan first;
  if (need > static_cast<int>(candidates.size())) throw ValidationError("query set exhausted");
  std::vector<int> idx(need);
  std::iota(idx.begin(), idx.end(), 0);
  const int n = static_cast<int>(candidates.size());
  while (true) {
    QueryPlan p{fixed};
    for (int i : idx) p.queries.push_back(candidates[i]);
    if (first.queries.empty()) first = p;
    if (!tried.contains(p.queries)) return p;
    int pos = need - 1;
    while (pos >= 0 && idx[pos] == n - need + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < need; ++j) idx[j] = idx[j - 1] + 1;
  }
  return first;
}

}  // namespace

Scenario scenario_from(const std::vector<int>& responses) {
  if (responses.size() > 31) throw CapacityError("at most 31 responses per scenario");
  Scenario s = 0;
  for (std::size_t k = 0; k < responses.size(); ++k) {
    if (responses[k] != 1 && responses[k] != -1) throw ValidationError("responses must be +1 or -1");
    if (responses[k] < 0) s |= Scenario{1} << k;
  }
  return s;
}

std::vector<int> responses_of(Scenario s, int num_queries) {
  std::vector<int> out(num_queries);
  for (int k = 0; k < num_queries; ++k) out[k] = response_of(s, k);
  return out;
}

std::vector<Scenario> all_scenarios(int num_queries) {
  if (num_queries > 31) throw CapacityError("at most 31 queries per plan");
  std::vector<Scenario> out(std::size_t{1} << num_queries);
  std::iota(out.begin(), out.end(), Scenario{0});
  return out;
}

bool y_less(const Query& a, const Query& b) {
  // y has ones at {first, second}; the smaller string has its first
  // differing one further right.
  const std::array<int, 2> ya{a.first, a.second}, yb{b.first, b.second};
  for (int pos = 0; pos < 2; ++pos) {
    if (ya[pos] != yb[pos]) return ya[pos] > yb[pos];
  }
  return false;
}

void add_symmetry_breaking(solver::Model& m, QueryEncoding& enc, bool lexicographic) {
  const int K = static_cast<int>(enc.v.size());
  const int I = enc.num_items;
  enc.z.assign(K, std::vector<std::vector<Var>>(K));
  auto y = [&](int k, int i) { return LinExpr(enc.v[k][i]) + LinExpr(enc.w[k][i]); };
  for (int a = 0; a < K; ++a) {
    for (int b = a + 1; b < K; ++b) {
      auto& z = enc.z[a][b];
      LinExpr any;
      for (int i = 0; i < I; ++i) {
        z.push_back(m.add_binary(name_of("z", {a, b, i})));
        const LinExpr ya = y(a, i), yb = y(b, i);
        m.add_constraint(LinExpr(z[i]) - ya - yb, Sense::LessEqual, 0.0);
        m.add_constraint(LinExpr(z[i]) + ya + yb, Sense::LessEqual, 2.0);
        m.add_constraint(LinExpr(z[i]) - ya + yb, Sense::GreaterEqual, 0.0);
        m.add_constraint(LinExpr(z[i]) + ya - yb, Sense::GreaterEqual, 0.0);
        any.add(z[i], 1.0);
      }
      m.add_constraint(any, Sense::GreaterEqual, 1.0);
      if (!lexicographic || a < enc.num_fixed) continue;
      // y^b_i >= y^a_i - sum_{i' < i} z_i'
      LinExpr prefix;
      for (int i = 0; i < I; ++i) {
        m.add_constraint(y(b, i) - y(a, i) + prefix, Sense::GreaterEqual, 0.0);
        prefix.add(z[i], 1.0);
      }
    }
  }
}

Formulation build_formulation(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                              const std::vector<Scenario>& scenarios, const CcgOptions& opts) {
  check_plan_size(bank, num_queries, opts);
  const bool mmu = c == Criterion::Mmu;
  const auto& base = prior.base();
  const auto& rec = bank.rec_ids();
  const int I = bank.size(), J = bank.dim(), K = num_queries, R = static_cast<int>(rec.size());
  const int H = static_cast<int>(prior.history().size());
  if (base.dim() != J) throw ValidationError("preference set dimension differs from the item dimension");
  const std::size_t nblocks = scenarios.size() * (mmu ? 1 : static_cast<std::size_t>(R));
  if (nblocks > opts.max_blocks)
    throw CapacityError("formulation needs " + std::to_string(nblocks) + " dual blocks, limit is " +
                        std::to_string(opts.max_blocks));
  for (Scenario s : scenarios)
    if (K < 32 && (s >> K) != 0) throw ValidationError("scenario has responses beyond the plan length");

  Formulation f;
  f.criterion = c;
  f.num_queries = K;
  f.gamma = prior.gamma();
  f.dual_bound = opts.dual_bound;
  f.base_rhs = base.rhs();
  auto& m = f.model;
  m.controls() = opts.controls;
  f.tau = m.add_continuous(-kInfD, kInfD, "tau");

  auto& enc = f.encoding;
  enc.num_items = I;
  enc.num_fixed = static_cast<int>(opts.fixed_queries.size());
  enc.v.resize(K);
  enc.w.resize(K);
  // Items each selector may take, per query.
  std::vector<std::vector<int>> v_items(K), w_items(K);
  for (int k = 0; k < K; ++k) {
    LinExpr sv, sw;
    for (int i = 0; i < I; ++i) {
      enc.v[k].push_back(m.add_binary(name_of("v", {k, i})));
      enc.w[k].push_back(m.add_binary(name_of("w", {k, i})));
      sv.add(enc.v[k][i], 1.0);
      sw.add(enc.w[k][i], 1.0);
    }
    m.add_constraint(sv, Sense::Equal, 1.0);
    m.add_constraint(sw, Sense::Equal, 1.0);
    // second strictly after first: w_i + sum_{i' >= i} v_i' <= 1
    for (int i = 0; i < I; ++i) {
      LinExpr e(enc.w[k][i]);
      for (int i2 = i; i2 < I; ++i2) e.add(enc.v[k][i2], 1.0);
      m.add_constraint(e, Sense::LessEqual, 1.0);
    }
    if (k < enc.num_fixed) {
      const Query q = opts.fixed_queries[k];
      for (int i = 0; i < I; ++i) {
        m.fix(enc.v[k][i], i == q.first ? 1.0 : 0.0);
        m.fix(enc.w[k][i], i == q.second ? 1.0 : 0.0);
      }
      v_items[k] = {q.first};
      w_items[k] = {q.second};
    } else {
      for (int i = 0; i < I; ++i) {
        if (!bank.queryable(i)) {
          m.fix(enc.v[k][i], 0.0);
          m.fix(enc.w[k][i], 0.0);
        } else {
          v_items[k].push_back(i);
          w_items[k].push_back(i);
        }
      }
    }
  }
  if ((opts.use_symmetry || opts.keep_distinct) && K >= 2) add_symmetry_breaking(m, enc, opts.use_symmetry);

  std::vector<Vector> hist;
  for (const auto& obs : prior.history()) hist.push_back(history_direction(bank, obs));

  const double Mb = opts.dual_bound;
  const double alpha_lo = mmu ? 0.0 : -kInfD, alpha_hi = mmu ? kInfD : 0.0;
  const double prod_lo = mmu ? 0.0 : -Mb, prod_hi = mmu ? Mb : 0.0;
  const double mu_lo = mmu ? -kInfD : 0.0, mu_hi = mmu ? 0.0 : kInfD;

  for (Scenario s : scenarios) {
    ScenarioBlock block;
    block.scenario = s;
    LinExpr pick;
    for (int r = 0; r < R; ++r) {
      block.choice.push_back(m.add_binary(name_of("chi", {static_cast<long>(s), r})));
      pick.add(block.choice[r], 1.0);
    }
    m.add_constraint(pick, Sense::Equal, 1.0);

    const std::vector<int> rivals = mmu ? std::vector<int>{-1} : rec;
    for (int rival : rivals) {
      const long tag = static_cast<long>(s);
      DualBlock db;
      db.rival = rival;
      for (int k = 0; k < K; ++k) db.alpha.push_back(m.add_continuous(alpha_lo, alpha_hi, name_of("alpha", {tag, rival, k})));
      for (int h = 0; h < H; ++h) db.alpha_hist.push_back(m.add_continuous(alpha_lo, alpha_hi, name_of("alphah", {tag, rival, h})));
      for (int r = 0; r < base.num_rows(); ++r)
        db.beta.push_back(m.add_continuous(alpha_lo, alpha_hi, name_of("beta", {tag, rival, r})));
      db.mu = m.add_continuous(mu_lo, mu_hi, name_of("mu", {tag, rival}));

      // Epigraph: tau vs b . beta + Gamma mu.
      LinExpr epi(f.tau);
      for (int r = 0; r < base.num_rows(); ++r) epi.add(db.beta[r], -base.rhs()[r]);
      epi.add(db.mu, -prior.gamma());
      m.add_constraint(epi, mmu ? Sense::LessEqual : Sense::GreaterEqual, 0.0);

      // Budget coupling of each multiplier with mu.
      for (Var a : db.alpha) m.add_constraint(LinExpr(a) + LinExpr(db.mu), mmu ? Sense::LessEqual : Sense::GreaterEqual, 0.0);
      for (Var a : db.alpha_hist)
        m.add_constraint(LinExpr(a) + LinExpr(db.mu), mmu ? Sense::LessEqual : Sense::GreaterEqual, 0.0);

      std::vector<LinExpr> balance(J);
      for (int k = 0; k < K; ++k) {
        const double sk = response_of(s, k);
        for (int pass = 0; pass < 2; ++pass) {
          const auto& items = pass == 0 ? v_items[k] : w_items[k];
          const auto& sel = pass == 0 ? enc.v[k] : enc.w[k];
          const double sign = pass == 0 ? sk : -sk;
          for (int i : items) {
            const Var p = m.add_continuous(prod_lo, prod_hi, name_of(pass == 0 ? "vbar" : "wbar", {tag, rival, k, i}));
            // p = alpha_k * sel_i
            if (mmu) {
              m.add_constraint(LinExpr(p) - Mb * LinExpr(sel[i]), Sense::LessEqual, 0.0);
              m.add_constraint(LinExpr(p) - LinExpr(db.alpha[k]), Sense::LessEqual, 0.0);
              m.add_constraint(LinExpr(p) - LinExpr(db.alpha[k]) - Mb * LinExpr(sel[i]), Sense::GreaterEqual, -Mb);
            } else {
              m.add_constraint(LinExpr(p) + Mb * LinExpr(sel[i]), Sense::GreaterEqual, 0.0);
              m.add_constraint(LinExpr(p) - LinExpr(db.alpha[k]), Sense::GreaterEqual, 0.0);
              m.add_constraint(LinExpr(p) - LinExpr(db.alpha[k]) + Mb * LinExpr(sel[i]), Sense::LessEqual, Mb);
            }
            const Vector& x = bank.item(i);
            for (int j = 0; j < J; ++j) balance[j].add(p, sign * x[j]);
          }
        }
      }
      for (int j = 0; j < J; ++j) {
        for (int r = 0; r < base.num_rows(); ++r) balance[j].add(db.beta[r], base.rows()[r][j]);
        for (int h = 0; h < H; ++h) balance[j].add(db.alpha_hist[h], hist[h][j]);
        double rhs = 0.0;
        for (int r = 0; r < R; ++r) balance[j].add(block.choice[r], (mmu ? -1.0 : 1.0) * bank.item(rec[r])[j]);
        if (!mmu) rhs = bank.item(rival)[j];
        m.add_constraint(balance[j], Sense::Equal, rhs);
      }
      block.duals.push_back(std::move(db));
    }
    f.blocks.push_back(std::move(block));
  }

  m.set_objective(LinExpr(f.tau), mmu ? solver::ObjSense::Maximize : solver::ObjSense::Minimize);
  return f;
}

QueryPlan extract_plan(const Formulation& f, const solver::SolveOutcome& out) {
  QueryPlan plan;
  const auto& enc = f.encoding;
  for (int k = 0; k < f.num_queries; ++k) {
    Query q{-1, -1};
    for (int i = 0; i < enc.num_items; ++i) {
      if (solver::value(out, enc.v[k][i], f.model) > 0.5) q.first = i;
      if (solver::value(out, enc.w[k][i], f.model) > 0.5) q.second = i;
    }
    if (q.first < 0 || q.second < 0) throw SolverError("solution does not select a query");
    plan.queries.push_back(q);
  }
  return plan;
}

namespace {

int chosen_item(const Formulation& f, const ScenarioBlock& b, const solver::SolveOutcome& out,
                const std::vector<int>& rec) {
  for (std::size_t r = 0; r < b.choice.size(); ++r)
    if (solver::value(out, b.choice[r], f.model) > 0.5) return rec[r];
  throw SolverError("solution does not select a recommendation");
}

// Whether a binding block carries a query multiplier at the linearization bound.
bool dual_bound_active(const Formulation& f, const solver::SolveOutcome& out, double tau) {
  const bool mmu = f.criterion == Criterion::Mmu;
  for (const auto& b : f.blocks) {
    for (const auto& db : b.duals) {
      double val = f.gamma * solver::value(out, db.mu);
      for (std::size_t r = 0; r < db.beta.size(); ++r) val += f.base_rhs[r] * solver::value(out, db.beta[r]);
      const bool binding = mmu ? val <= tau + 1e-6 : val >= tau - 1e-6;
      if (!binding) continue;
      for (Var a : db.alpha)
        if (std::abs(solver::value(out, a)) >= f.dual_bound - 1e-3) return true;
    }
  }
  return false;
}

// Multipliers can sit at the bound along zero-cost directions. Keep the
// incumbent unless a larger bound improves it with the binaries held fixed.
bool relaxed_bound_helps(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                         const std::vector<Scenario>& scenarios, const CcgOptions& o, const Formulation& f,
                         const solver::SolveOutcome& out, double value) {
  CcgOptions wider = o;
  wider.dual_bound *= 10.0;
  const Formulation g = build_formulation(c, bank, prior, num_queries, scenarios, wider);
  if (g.model.num_vars() != f.model.num_vars()) return true;
  std::vector<std::pair<Var, double>> fixed;
  for (std::size_t i = 0; i < f.model.num_vars(); ++i) {
    const Var v{static_cast<int>(i)};
    if (f.model.is_binary(v)) fixed.emplace_back(v, solver::value(out, v, f.model));
  }
  const auto lp = solver::solve_with_fixed_binaries(g.model, fixed);
  if (!lp.optimal()) return true;
  const double tol = 1e-7 * (1.0 + std::abs(value));
  return c == Criterion::Mmu ? *lp.objective > value + tol : *lp.objective < value - tol;
}

}  // namespace

MilpResult solve_formulation(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                             const std::vector<Scenario>& scenarios, const CcgOptions& opts) {
  MilpResult res;
  CcgOptions o = opts;
  const auto start = std::chrono::steady_clock::now();
  while (true) {
    const Formulation f = build_formulation(c, bank, prior, num_queries, scenarios, o);
    const auto out = solver::solve(f.model);
    res.status = out.status;
    res.dual_bound = o.dual_bound;
    res.mip_gap = out.mip_gap;
    if (!out.optimal()) break;
    res.value = *out.objective;
    res.plan = extract_plan(f, out);
    res.recommendations.clear();
    for (const auto& b : f.blocks) res.recommendations.push_back(chosen_item(f, b, out, bank.rec_ids()));
    if (!dual_bound_active(f, out, res.value)) break;
    if (!relaxed_bound_helps(c, bank, prior, num_queries, scenarios, o, f, out, res.value)) break;
    if (res.dual_escalations >= o.max_dual_escalations) {
      log_warning("dual multipliers still at the linearization bound " + std::to_string(o.dual_bound) +
                  "; value may be approximate");
      break;
    }
    o.dual_bound *= 10.0;
    ++res.dual_escalations;
    log_warning("dual multipliers reached the linearization bound; re-solving with bound " +
                std::to_string(o.dual_bound));
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

PlanEvaluation evaluate_plan(Criterion c, const QueryPlan& plan, const ItemBank& bank, const UncertaintyModel& prior,
                             const CcgOptions& opts) {
  validate_plan(plan, bank, /*allow_duplicates=*/true);
  if (plan.size() > 31) throw CapacityError("at most 31 queries per plan");
  const bool mmu = c == Criterion::Mmu;
  const auto& base = prior.base();
  const auto& rec = bank.rec_ids();
  const int J = bank.dim(), K = static_cast<int>(plan.size()), R = static_cast<int>(rec.size());
  const int H = static_cast<int>(prior.history().size());
  if (base.dim() != J) throw ValidationError("preference set dimension differs from the item dimension");
  check_budget(bank, prior);
  const double gamma = prior.gamma();

  std::vector<Vector> d(K), hist;
  std::vector<double> bigm(K);
  for (int k = 0; k < K; ++k) {
    d[k] = difference(bank.item(plan.queries[k].first), bank.item(plan.queries[k].second));
    bigm[k] = opts.big_m > 0 ? opts.big_m : box_bound(d[k], base) + gamma;
  }
  for (const auto& obs : prior.history()) hist.push_back(history_direction(bank, obs));

  solver::Model m;
  m.controls() = opts.controls;
  std::vector<Var> sigma;
  for (int k = 0; k < K; ++k) sigma.push_back(m.add_binary(name_of("sigma", {k})));
  const Var theta = m.add_continuous(-kInfD, kInfD, "theta");

  double rmax = 0.0;
  if (!mmu)
    for (int a : rec)
      for (int b : rec) rmax = std::max(rmax, box_bound(difference(bank.item(a), bank.item(b)), base));
  const double mreg = 2.0 * rmax + 1.0;

  for (int ri = 0; ri < R; ++ri) {
    const int r = rec[ri];
    std::vector<Var> u, eps, eps_h;
    for (int j = 0; j < J; ++j) u.push_back(m.add_continuous(base.box_lower()[j], base.box_upper()[j], name_of("u", {r, j})));
    for (int k = 0; k < K; ++k) eps.push_back(m.add_continuous(0.0, gamma, name_of("eps", {r, k})));
    for (int h = 0; h < H; ++h) eps_h.push_back(m.add_continuous(0.0, gamma, name_of("epsh", {r, h})));
    for (int row = 0; row < base.num_rows(); ++row) {
      LinExpr e;
      for (int j = 0; j < J; ++j) e.add(u[j], base.rows()[row][j]);
      m.add_constraint(e, Sense::GreaterEqual, base.rhs()[row]);
    }
    LinExpr budget;
    for (int h = 0; h < H; ++h) {
      LinExpr e(eps_h[h]);
      for (int j = 0; j < J; ++j) e.add(u[j], hist[h][j]);
      m.add_constraint(e, Sense::GreaterEqual, 0.0);
      budget.add(eps_h[h], 1.0);
    }
    for (int k = 0; k < K; ++k) {
      // sigma_k = 0: d.u + eps >= 0;  sigma_k = 1: d.u - eps <= 0.
      LinExpr du;
      for (int j = 0; j < J; ++j) du.add(u[j], d[k][j]);
      m.add_constraint(du + LinExpr(eps[k]) + 2.0 * bigm[k] * LinExpr(sigma[k]), Sense::GreaterEqual, 0.0);
      m.add_constraint(du - LinExpr(eps[k]) + 2.0 * bigm[k] * LinExpr(sigma[k]), Sense::LessEqual, 2.0 * bigm[k]);
      budget.add(eps[k], 1.0);
    }
    m.add_constraint(budget, Sense::LessEqual, gamma);

    if (mmu) {
      LinExpr e(theta);
      for (int j = 0; j < J; ++j) e.add(u[j], -bank.item(r)[j]);
      m.add_constraint(e, Sense::GreaterEqual, 0.0);
    } else {
      LinExpr pick;
      for (int r2 : rec) {
        if (r2 == r) continue;
        const Var lam = m.add_binary(name_of("lambda", {r, r2}));
        pick.add(lam, 1.0);
        LinExpr e(theta);
        const Vector diff = difference(bank.item(r2), bank.item(r));
        for (int j = 0; j < J; ++j) e.add(u[j], -diff[j]);
        e.add(lam, mreg);
        m.add_constraint(e, Sense::LessEqual, mreg);
      }
      if (R == 1) {
        m.add_constraint(LinExpr(theta), Sense::LessEqual, 0.0);
      } else {
        m.add_constraint(pick, Sense::Equal, 1.0);
      }
    }
  }
  m.set_objective(LinExpr(theta), mmu ? solver::ObjSense::Minimize : solver::ObjSense::Maximize);
  const auto out = solver::solve(m);
  if (out.status == solver::Status::Infeasible) throw InfeasibleUncertainty("infeasible uncertainty");
  if (!out.optimal())
    throw SolverError(std::string("plan evaluation failed: ") + solver::to_string(out.status) + " " + out.message);
  PlanEvaluation ev;
  ev.value = *out.objective;
  for (int k = 0; k < K; ++k)
    if (solver::value(out, sigma[k], m) > 0.5) ev.worst |= Scenario{1} << k;
  return ev;
}

OfflineResult ccg(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                  const CcgOptions& opts, const std::set<Scenario>& initial_pool) {
  check_plan_size(bank, num_queries, opts);
  check_budget(bank, prior);
  const bool mmu = c == Criterion::Mmu;
  OfflineResult res;
  auto& st = res.state;
  st.pool = initial_pool;
  st.lower = -kInfD;
  st.upper = kInfD;
  std::set<std::vector<Query>> tried;
  CcgOptions o = opts;
  int escalations = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    CcgIteration rec;
    rec.iteration = it;
    bool solved = false;
    if (st.pool.empty()) {
      rec.plan = fallback_plan(bank, num_queries, opts.fixed_queries, tried);
      rec.tau = mmu ? kInfD : -kInfD;
    } else {
      const std::vector<Scenario> pool(st.pool.begin(), st.pool.end());
      const auto r = solve_formulation(c, bank, prior, num_queries, pool, o);
      ++st.main_solves;
      if (r.status == solver::Status::TimeLimit) {
        st.note = "time limit reached in the main problem";
        break;
      }
      if (r.status != solver::Status::Optimal)
        throw SolverError(std::string("main problem failed: ") + solver::to_string(r.status));
      rec.plan = r.plan;
      rec.tau = r.value;
      solved = true;
    }
    tried.insert(rec.plan.queries);
    const auto ev = evaluate_plan(c, rec.plan, bank, prior, opts);
    rec.theta = ev.value;
    const bool first = st.trace.empty();
    // The exact value of the plan beating the main bound means the dual
    // truncation cut the main problem; earlier bounds are void.
    const bool crossed = solved && (mmu ? ev.value > rec.tau + 1e-6 : ev.value < rec.tau - 1e-6);
    if (crossed && escalations < opts.max_dual_escalations) {
      o.dual_bound *= 10.0;
      ++escalations;
      log_warning("main bound crossed by the plan value; re-solving with dual bound " + std::to_string(o.dual_bound));
      (mmu ? st.upper : st.lower) = mmu ? kInfD : -kInfD;
      if (first || (mmu ? ev.value > st.lower : ev.value < st.upper)) {
        (mmu ? st.lower : st.upper) = ev.value;
        st.incumbent = rec.plan;
      }
      rec.lower = st.lower;
      rec.upper = st.upper;
      rec.pool_size = st.pool.size();
      rec.wall_ms = elapsed_ms(start);
      st.trace.push_back(rec);
      if (opts.on_iteration) opts.on_iteration(rec);
      continue;
    }
    if (mmu) {
      st.upper = std::min(st.upper, rec.tau);
      if (first || ev.value > st.lower) {
        st.lower = std::max(st.lower, ev.value);
        st.incumbent = rec.plan;
      }
      if (solved && ev.value > rec.tau + 1e-6) ++st.sandwich_violations;
    } else {
      st.lower = std::max(st.lower, rec.tau);
      if (first || ev.value < st.upper) {
        st.upper = std::min(st.upper, ev.value);
        st.incumbent = rec.plan;
      }
      if (solved && ev.value < rec.tau - 1e-6) ++st.sandwich_violations;
    }
    rec.lower = st.lower;
    rec.upper = st.upper;
    rec.pool_size = st.pool.size();

    const bool done = st.gap() <= opts.delta;
    const bool repeat = !done && st.pool.contains(ev.worst);
    if (!done && !repeat) {
      st.pool.insert(ev.worst);
      rec.added = ev.worst;
    }
    rec.wall_ms = elapsed_ms(start);
    st.trace.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec);
    if (done) {
      st.converged = true;
      break;
    }
    if (repeat) {
      st.converged = true;
      std::ostringstream os;
      os << "worst scenario already in the pool; stopping with gap " << st.gap();
      st.note = os.str();
      break;
    }
  }
  if (!st.converged && st.note.empty()) st.note = "iteration limit reached";
  res.plan = st.incumbent;
  res.value = mmu ? st.lower : st.upper;
  return res;
}

GreedyResult greedy(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int num_queries,
                    const CcgOptions& opts) {
  if (num_queries < 0) throw ValidationError("number of queries must be non-negative");
  GreedyResult g;
  const int available = static_cast<int>(all_queries(bank).size());
  CcgOptions o = opts;
  for (int k = 1; k <= num_queries; ++k) {
    if (k > available) {
      g.complete = false;
      g.warning = "query set exhausted after " + std::to_string(k - 1) + " queries";
      log_warning(g.warning);
      break;
    }
    o.fixed_queries = g.plan.queries;
    const auto r = ccg(c, bank, prior, k, o);
    g.plan = r.plan;
    g.trace.push_back(r.value);
  }
  return g;
}

std::optional<Query> lexicographic_best_query(Criterion c, const ItemBank& bank, const UncertaintyModel& prior,
                                              double value, const CcgOptions& opts, double tol) {
  CcgOptions o = opts;
  o.fixed_queries.clear();
  Formulation f = build_formulation(c, bank, prior, 1, all_scenarios(1), o);
  const bool mmu = c == Criterion::Mmu;
  if (mmu)
    f.model.add_constraint(LinExpr(f.tau), Sense::GreaterEqual, value - tol);
  else
    f.model.add_constraint(LinExpr(f.tau), Sense::LessEqual, value + tol);
  const int I = bank.size();
  LinExpr rank;
  for (int i = 0; i < I; ++i) {
    rank.add(f.encoding.v[0][i], static_cast<double>(i) * (I + 1));
    rank.add(f.encoding.w[0][i], static_cast<double>(i));
  }
  f.model.set_objective(rank, solver::ObjSense::Minimize);
  const auto out = solver::solve(f.model);
  if (!out.optimal()) return std::nullopt;
  return extract_plan(f, out).queries.front();
}

std::vector<int> scenario_recommendations(Criterion c, const QueryPlan& plan, const ItemBank& bank,
                                          const UncertaintyModel& prior) {
  const int K = static_cast<int>(plan.size());
  std::vector<int> out;
  for (Scenario s : all_scenarios(K)) {
    UncertaintyModel model = prior;
    for (int k = 0; k < K; ++k) model = model.with({plan.queries[k], response_of(s, k)});
    out.push_back(is_nonempty(bank, model) ? recommend(c, bank, model).item : bank.rec_ids().front());
  }
  return out;
}

SolutionHint extend_hint(const SolutionHint& prev, const ItemBank& bank, Criterion c, const UncertaintyModel& prior,
                         std::mt19937_64& rng, bool lexicographic) {
  const int K = static_cast<int>(prev.plan.size());
  std::vector<int> recs = prev.recommendations;
  if (recs.size() != (std::size_t{1} << K)) {
    if (K == 0)
      recs = {recommend(c, bank, prior).item};
    else
      throw ValidationError("hint needs one recommendation per scenario");
  }
  std::vector<Query> unused;
  for (const auto& q : all_queries(bank))
    if (std::find(prev.plan.queries.begin(), prev.plan.queries.end(), q) == prev.plan.queries.end())
      unused.push_back(q);
  if (unused.empty()) throw ValidationError("query set exhausted");
  std::uniform_int_distribution<std::size_t> pick(0, unused.size() - 1);

  std::vector<Query> ext = prev.plan.queries;
  ext.push_back(unused[pick(rng)]);
  // New position k takes old position order[k].
  std::vector<int> order(K + 1);
  std::iota(order.begin(), order.end(), 0);
  if (lexicographic)
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y_less(ext[a], ext[b]); });

  SolutionHint out;
  for (int k = 0; k <= K; ++k) out.plan.queries.push_back(ext[order[k]]);
  const Scenario low_mask = (Scenario{1} << K) - 1;
  for (Scenario s : all_scenarios(K + 1)) {
    Scenario old = 0;
    for (int k = 0; k <= K; ++k)
      if ((s >> k) & 1U) old |= Scenario{1} << order[k];
    out.recommendations.push_back(recs[old & low_mask]);
  }
  return out;
}

std::vector<std::pair<Var, double>> hint_assignment(const Formulation& f, const SolutionHint& hint,
                                                    const ItemBank& bank) {
  if (static_cast<int>(hint.plan.size()) != f.num_queries) throw ValidationError("hint length differs from the plan");
  std::vector<std::pair<Var, double>> a;
  const auto& enc = f.encoding;
  const auto& q = hint.plan.queries;
  for (int k = 0; k < f.num_queries; ++k)
    for (int i = 0; i < enc.num_items; ++i) {
      a.emplace_back(enc.v[k][i], i == q[k].first ? 1.0 : 0.0);
      a.emplace_back(enc.w[k][i], i == q[k].second ? 1.0 : 0.0);
    }
  auto y = [&](int k, int i) { return (i == q[k].first || i == q[k].second) ? 1 : 0; };
  for (std::size_t k = 0; k < enc.z.size(); ++k)
    for (std::size_t k2 = k + 1; k2 < enc.z[k].size(); ++k2)
      for (int i = 0; i < static_cast<int>(enc.z[k][k2].size()); ++i)
        a.emplace_back(enc.z[k][k2][i], y(static_cast<int>(k), i) != y(static_cast<int>(k2), i) ? 1.0 : 0.0);
  const auto& rec = bank.rec_ids();
  for (const auto& b : f.blocks) {
    if (b.scenario >= hint.recommendations.size()) throw ValidationError("hint misses a scenario");
    const int item = hint.recommendations[b.scenario];
    for (std::size_t r = 0; r < rec.size(); ++r) a.emplace_back(b.choice[r], rec[r] == item ? 1.0 : 0.0);
  }
  return a;
}

}  // namespace elicit
