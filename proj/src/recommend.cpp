#include "elicit/recommend.hpp"

#include <algorithm>
#include <limits>

#include "elicit/errors.hpp"

namespace elicit {

const char* to_string(Criterion c) { return c == Criterion::Mmu ? "mmu" : "mmr"; }

Criterion parse_criterion(const std::string& text) {
  if (text == "mmu") return Criterion::Mmu;
  if (text == "mmr") return Criterion::Mmr;
  throw ValidationError("criterion must be 'mmu' or 'mmr', got '" + text + "'");
}

namespace {

double optimize_linear(const Vector& direction, const ItemBank& bank, const UncertaintyModel& model,
                       solver::ObjSense sense) {
  solver::Model m;
  const auto vars = add_system(m, updated_constraints(bank, model));
  solver::LinExpr obj;
  for (std::size_t j = 0; j < direction.size(); ++j) obj.add(vars.u[j], direction[j]);
  m.set_objective(obj, sense);
  const auto out = solver::solve(m);
  if (out.status == solver::Status::Infeasible) throw InfeasibleUncertainty("infeasible uncertainty");
  if (!out.optimal()) throw SolverError(std::string("recommendation LP failed: ") + solver::to_string(out.status));
  return *out.objective;
}

}  // namespace

double worst_case_utility(const Vector& x, const ItemBank& bank, const UncertaintyModel& model) {
  return optimize_linear(x, bank, model, solver::ObjSense::Minimize);
}

double max_linear(const Vector& direction, const ItemBank& bank, const UncertaintyModel& model) {
  return optimize_linear(direction, bank, model, solver::ObjSense::Maximize);
}

Recommendation recommend_mmu(const ItemBank& bank, const UncertaintyModel& model) {
  if (bank.rec_ids().empty()) throw ValidationError("recommendation set is empty");
  Recommendation best{-1, -std::numeric_limits<double>::infinity(), Criterion::Mmu};
  for (int r : bank.rec_ids()) {
    const double v = worst_case_utility(bank.item(r), bank, model);
    if (v > best.guarantee + 1e-9) best = {r, v, Criterion::Mmu};
  }
  return best;
}

double worst_case_regret(const Vector& x, const ItemBank& bank, const UncertaintyModel& model) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int r : bank.rec_ids()) worst = std::max(worst, max_linear(difference(bank.item(r), x), bank, model));
  return worst;
}

Recommendation recommend_mmr(const ItemBank& bank, const UncertaintyModel& model) {
  if (bank.rec_ids().empty()) throw ValidationError("recommendation set is empty");
  Recommendation best{-1, std::numeric_limits<double>::infinity(), Criterion::Mmr};
  for (int r : bank.rec_ids()) {
    const double v = worst_case_regret(bank.item(r), bank, model);
    if (v < best.guarantee - 1e-9) best = {r, v, Criterion::Mmr};
  }
  return best;
}

Recommendation recommend(Criterion c, const ItemBank& bank, const UncertaintyModel& model) {
  return c == Criterion::Mmu ? recommend_mmu(bank, model) : recommend_mmr(bank, model);
}

int true_rank(int item, const Vector& u, const ItemBank& bank) {
  const double mine = dot(u, bank.item(item));
  int rank = 1;
  for (int r : bank.rec_ids())
    if (dot(u, bank.item(r)) > mine) ++rank;
  return rank;
}

double true_regret(int item, const Vector& u, const ItemBank& bank) {
  double best = -std::numeric_limits<double>::infinity();
  for (int r : bank.rec_ids()) best = std::max(best, dot(u, bank.item(r)));
  return best - dot(u, bank.item(item));
}

double full_information_utility(const ItemBank& bank, const PreferencePolyhedron& base) {
  // min t  s.t.  t >= u . x_r for all r,  B u >= b
  solver::Model m;
  std::vector<solver::Var> u;
  for (int j = 0; j < base.dim(); ++j) u.push_back(m.add_continuous(-solver::kInf, solver::kInf));
  const auto t = m.add_continuous(-solver::kInf, solver::kInf);
  for (int r = 0; r < base.num_rows(); ++r) {
    solver::LinExpr e;
    for (int j = 0; j < base.dim(); ++j) e.add(u[j], base.rows()[r][j]);
    m.add_constraint(e, solver::Sense::GreaterEqual, base.rhs()[r]);
  }
  for (int r : bank.rec_ids()) {
    solver::LinExpr e(t);
    for (int j = 0; j < base.dim(); ++j) e.add(u[j], -bank.item(r)[j]);
    m.add_constraint(e, solver::Sense::GreaterEqual, 0.0);
  }
  m.set_objective(solver::LinExpr(t), solver::ObjSense::Minimize);
  const auto out = solver::solve(m);
  if (!out.optimal()) throw SolverError("full-information LP failed");
  return *out.objective;
}

}  // namespace elicit
