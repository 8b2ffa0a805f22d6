#include "oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace oracle {

using namespace elicit;

std::vector<Vector> vertices(const std::vector<Vector>& a, const Vector& b, int n, double tol) {
  std::vector<Vector> out;
  const int m = static_cast<int>(a.size());
  if (m < n) return out;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd rhs(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) A(r, c) = a[idx[r]][c];
      rhs(r) = b[idx[r]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(rhs);
      bool ok = true;
      for (int r = 0; r < m && ok; ++r) {
        double lhs = 0.0;
        for (int c = 0; c < n; ++c) lhs += a[r][c] * x(c);
        ok = lhs >= b[r] - tol;
      }
      if (ok) out.emplace_back(x.data(), x.data() + n);
    }
    int pos = n - 1;
    while (pos >= 0 && idx[pos] == m - n + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<Vector> utility_vertices(const ItemBank& bank, const PreferencePolyhedron& base,
                                     const std::vector<Observation>& obs, double gamma) {
  const int J = base.dim(), H = static_cast<int>(obs.size()), n = J + H;
  std::vector<Vector> a;
  Vector b;
  for (int r = 0; r < base.num_rows(); ++r) {
    Vector row(n, 0.0);
    std::copy(base.rows()[r].begin(), base.rows()[r].end(), row.begin());
    a.push_back(row);
    b.push_back(base.rhs()[r]);
  }
  for (int h = 0; h < H; ++h) {
    Vector row(n, 0.0);
    const auto& x1 = bank.item(obs[h].query.first);
    const auto& x2 = bank.item(obs[h].query.second);
    for (int j = 0; j < J; ++j) row[j] = obs[h].response * (x1[j] - x2[j]);
    row[J + h] = 1.0;  // s d.u + eps >= 0
    a.push_back(row);
    b.push_back(0.0);
    Vector pos(n, 0.0);
    pos[J + h] = 1.0;
    a.push_back(pos);
    b.push_back(0.0);
  }
  if (H > 0) {
    Vector budget(n, 0.0);
    for (int h = 0; h < H; ++h) budget[J + h] = -1.0;
    a.push_back(budget);
    b.push_back(-gamma);
  }
  std::vector<Vector> out;
  for (auto& v : vertices(a, b, n)) out.emplace_back(v.begin(), v.begin() + J);
  return out;
}

namespace {

double dotv(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::optional<double> recommendation_value(Criterion c, const ItemBank& bank, const std::vector<Vector>& verts) {
  if (verts.empty()) return std::nullopt;
  const double inf = std::numeric_limits<double>::infinity();
  if (c == Criterion::Mmu) {
    double best = -inf;
    for (int r : bank.rec_ids()) {
      double worst = inf;
      for (const auto& u : verts) worst = std::min(worst, dotv(u, bank.item(r)));
      best = std::max(best, worst);
    }
    return best;
  }
  double best = inf;
  for (int r : bank.rec_ids()) {
    double worst = -inf;
    for (int r2 : bank.rec_ids())
      for (const auto& u : verts) worst = std::max(worst, dotv(u, bank.item(r2)) - dotv(u, bank.item(r)));
    best = std::min(best, worst);
  }
  return best;
}

double plan_value(Criterion c, const QueryPlan& plan, const ItemBank& bank, const UncertaintyModel& prior) {
  const int K = static_cast<int>(plan.size());
  const double inf = std::numeric_limits<double>::infinity();
  double worst = c == Criterion::Mmu ? inf : -inf;
  for (unsigned s = 0; s < (1U << K); ++s) {
    auto obs = prior.history();
    for (int k = 0; k < K; ++k) obs.push_back({plan.queries[k], ((s >> k) & 1U) ? -1 : 1});
    const auto v = recommendation_value(c, bank, utility_vertices(bank, prior.base(), obs, prior.gamma()));
    if (!v) continue;
    worst = c == Criterion::Mmu ? std::min(worst, *v) : std::max(worst, *v);
  }
  return worst;
}

BestPlan best_plan(Criterion c, const ItemBank& bank, const UncertaintyModel& prior, int K) {
  const auto cand = all_queries(bank);
  const int n = static_cast<int>(cand.size());
  std::vector<std::pair<QueryPlan, double>> scored;
  std::vector<int> idx(K);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    QueryPlan p;
    for (int i : idx) p.queries.push_back(cand[i]);
    scored.emplace_back(p, plan_value(c, p, bank, prior));
    int pos = K - 1;
    while (pos >= 0 && idx[pos] == n - K + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < K; ++j) idx[j] = idx[j - 1] + 1;
  }
  BestPlan best;
  best.value = scored.front().second;
  for (const auto& [p, v] : scored) best.value = c == Criterion::Mmu ? std::max(best.value, v) : std::min(best.value, v);
  for (const auto& [p, v] : scored)
    if (std::abs(v - best.value) <= 1e-6) best.argmax.push_back(p);
  return best;
}

ItemBank random_bank(int I, int J, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::string> ids;
  std::vector<Vector> items;
  for (int i = 0; i < I; ++i) {
    ids.push_back("i" + std::to_string(i + 1));
    Vector x(J);
    for (double& v : x) v = unif(rng);
    items.push_back(x);
  }
  return ItemBank(ids, items);
}

}  // namespace oracle
