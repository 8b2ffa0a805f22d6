#include "elicit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "elicit/errors.hpp"

namespace elicit {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

Vector difference(const Vector& a, const Vector& b) {
  Vector d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  return d;
}

// ---------------------------------------------------------------- ItemBank

ItemBank::ItemBank(std::vector<std::string> ids, std::vector<Vector> items,
                   std::vector<std::string> attribute_names, std::vector<int> query_ids,
                   std::vector<int> rec_ids)
    : ids_(std::move(ids)),
      items_(std::move(items)),
      attribute_names_(std::move(attribute_names)),
      query_ids_(std::move(query_ids)),
      rec_ids_(std::move(rec_ids)) {
  if (items_.empty()) throw ValidationError("item bank is empty");
  if (ids_.size() != items_.size()) throw ValidationError("ids and items differ in length");
  const std::size_t J = items_.front().size();
  if (J == 0) throw ValidationError("items need at least one attribute");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].size() != J)
      throw ValidationError("item " + ids_[i] + " has " + std::to_string(items_[i].size()) +
                            " attributes, expected " + std::to_string(J));
    for (double x : items_[i])
      if (!std::isfinite(x)) throw ValidationError("item " + ids_[i] + " has a non-finite attribute");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_)
    if (!seen.insert(id).second) throw ValidationError("duplicate item id '" + id + "'");
  if (attribute_names_.empty())
    for (std::size_t j = 0; j < J; ++j) attribute_names_.push_back("a" + std::to_string(j + 1));
  if (attribute_names_.size() != J) throw ValidationError("attribute name count mismatch");

  auto normalize = [&](std::vector<int>& set, const char* what) {
    if (set.empty())
      for (int i = 0; i < size(); ++i) set.push_back(i);
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    for (int i : set)
      if (i < 0 || i >= size()) throw ValidationError(std::string(what) + " index out of range");
  };
  normalize(query_ids_, "query set");
  normalize(rec_ids_, "recommendation set");
  if (query_ids_.size() < 2) throw ValidationError("query set needs at least two items");
  if (rec_ids_.empty()) throw ValidationError("recommendation set is empty");
}

bool ItemBank::queryable(int i) const {
  return std::binary_search(query_ids_.begin(), query_ids_.end(), i);
}

bool ItemBank::recommendable(int i) const {
  return std::binary_search(rec_ids_.begin(), rec_ids_.end(), i);
}

int ItemBank::index_of(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw NotFound("unknown item id '" + id + "'");
  return static_cast<int>(it - ids_.begin());
}

// --------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v))
    throw ParseError("row " + std::to_string(row) + ", column '" + column + "': '" + t +
                     "' is not a number");
  return v;
}

bool parse_bool(const std::string& text, std::size_t row, const std::string& column) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw ParseError("row " + std::to_string(row) + ", column '" + column + "': '" + t +
                   "' is not a boolean");
}

}  // namespace

ItemBank load_item_bank(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw ParseError("missing header row");
  for (auto& h : header) h = trim(h);
  if (header.front() != "id") throw ParseError("first header column must be 'id'");

  int query_col = -1, rec_col = -1;
  std::vector<int> attr_cols;
  std::vector<std::string> attr_names;
  for (int c = 1; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == "in_query_set") {
      query_col = c;
    } else if (header[c] == "in_rec_set") {
      rec_col = c;
    } else {
      attr_cols.push_back(c);
      attr_names.push_back(header[c]);
    }
  }
  if (attr_cols.empty()) throw ParseError("no attribute columns");

  std::vector<std::string> ids;
  std::vector<Vector> items;
  std::vector<int> query_ids, rec_ids;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " fields, header has " + std::to_string(header.size()));
    const std::string id = trim(cells[0]);
    if (id.empty()) throw ParseError("row " + std::to_string(row) + " has an empty id");
    if (!seen.insert(id).second) throw ValidationError("duplicate item id '" + id + "' at row " + std::to_string(row));
    Vector x;
    for (int c : attr_cols) x.push_back(parse_number(cells[c], row, header[c]));
    const int index = static_cast<int>(items.size());
    if (query_col < 0 || parse_bool(cells[query_col], row, header[query_col])) query_ids.push_back(index);
    if (rec_col < 0 || parse_bool(cells[rec_col], row, header[rec_col])) rec_ids.push_back(index);
    ids.push_back(id);
    items.push_back(std::move(x));
  }
  if (items.empty()) throw ParseError("no data rows");
  if (query_ids.size() < 2) throw ValidationError("query set needs at least two items");
  if (rec_ids.empty()) throw ValidationError("recommendation set is empty");
  return ItemBank(std::move(ids), std::move(items), std::move(attr_names), std::move(query_ids),
                  std::move(rec_ids));
}

ItemBank load_item_bank_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open item bank '" + path + "'");
  return load_item_bank(in);
}

void write_item_bank(std::ostream& out, const ItemBank& bank) {
  out << "id";
  for (const auto& a : bank.attribute_names()) out << ',' << a;
  out << ",in_query_set,in_rec_set\n";
  std::ostringstream num;
  num.precision(17);
  for (int i = 0; i < bank.size(); ++i) {
    out << bank.id(i);
    for (double x : bank.item(i)) {
      num.str({});
      num << x;
      out << ',' << num.str();
    }
    out << ',' << (bank.queryable(i) ? "true" : "false") << ',' << (bank.recommendable(i) ? "true" : "false")
        << '\n';
  }
}

// ------------------------------------------------------------------ Queries

void validate_query(const Query& q, const ItemBank& bank) {
  if (q.first < 0 || q.second >= bank.size() || q.second < 0 || q.first >= bank.size())
    throw ValidationError("query item index out of range");
  if (q.first >= q.second) throw ValidationError("query must satisfy first < second");
  if (!bank.queryable(q.first) || !bank.queryable(q.second))
    throw ValidationError("query uses an item outside the query set");
}

void validate_plan(const QueryPlan& plan, const ItemBank& bank, bool allow_duplicates) {
  std::set<Query> seen;
  for (const auto& q : plan.queries) {
    validate_query(q, bank);
    if (!seen.insert(q).second && !allow_duplicates)
      throw ValidationError("plan asks the same query twice");
  }
}

std::vector<Query> all_queries(const ItemBank& bank) {
  std::vector<Query> out;
  const auto& ids = bank.query_ids();
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b) out.push_back({ids[a], ids[b]});
  return out;
}

void validate_responses(const ResponseVector& s, const QueryPlan& plan) {
  if (s.responses.size() != plan.size()) throw ValidationError("response vector length differs from plan");
  for (int r : s.responses)
    if (r != 1 && r != -1) throw ValidationError("responses must be +1 or -1");
}

// ------------------------------------------------------------- Polyhedron

PreferencePolyhedron::PreferencePolyhedron(std::vector<Vector> rows, Vector rhs)
    : rows_(std::move(rows)), rhs_(std::move(rhs)) {
  if (rows_.empty()) throw ValidationError("polyhedron needs at least one row");
  if (rows_.size() != rhs_.size()) throw ValidationError("polyhedron rows and rhs differ in length");
  dim_ = static_cast<int>(rows_.front().size());
  if (dim_ == 0) throw ValidationError("polyhedron dimension must be positive");
  for (const auto& r : rows_)
    if (static_cast<int>(r.size()) != dim_) throw ValidationError("ragged polyhedron rows");

  box_lo_.assign(dim_, 0.0);
  box_hi_.assign(dim_, 0.0);
  for (int j = 0; j < dim_; ++j) {
    for (int dir : {-1, 1}) {
      solver::Model m;
      std::vector<solver::Var> u;
      for (int k = 0; k < dim_; ++k) u.push_back(m.add_continuous(-solver::kInf, solver::kInf));
      for (std::size_t r = 0; r < rows_.size(); ++r) {
        solver::LinExpr e;
        for (int k = 0; k < dim_; ++k) e.add(u[k], rows_[r][k]);
        m.add_constraint(e, solver::Sense::GreaterEqual, rhs_[r]);
      }
      m.set_objective(solver::LinExpr(u[j]), dir < 0 ? solver::ObjSense::Minimize : solver::ObjSense::Maximize);
      const auto out = solver::solve(m);
      if (out.status == solver::Status::Infeasible) throw ValidationError("base polyhedron is empty");
      if (out.status == solver::Status::Unbounded) throw ValidationError("base polyhedron is unbounded");
      if (!out.optimal()) throw SolverError("bounding-box LP failed: " + out.message);
      (dir < 0 ? box_lo_ : box_hi_)[j] = *out.objective;
    }
  }
}

PreferencePolyhedron PreferencePolyhedron::box(int dim, double lo, double hi) {
  std::vector<Vector> rows;
  Vector rhs;
  for (int j = 0; j < dim; ++j) {
    Vector up(dim, 0.0), down(dim, 0.0);
    up[j] = 1.0;
    down[j] = -1.0;
    rows.push_back(up);
    rhs.push_back(lo);
    rows.push_back(down);
    rhs.push_back(-hi);
  }
  return PreferencePolyhedron(std::move(rows), std::move(rhs));
}

PreferencePolyhedron PreferencePolyhedron::simplex(int dim) {
  std::vector<Vector> rows;
  Vector rhs;
  for (int j = 0; j < dim; ++j) {
    Vector e(dim, 0.0);
    e[j] = 1.0;
    rows.push_back(e);
    rhs.push_back(0.0);
  }
  rows.emplace_back(dim, 1.0);
  rhs.push_back(1.0);
  rows.emplace_back(dim, -1.0);
  rhs.push_back(-1.0);
  return PreferencePolyhedron(std::move(rows), std::move(rhs));
}

bool PreferencePolyhedron::contains(const Vector& u, double tol) const {
  if (static_cast<int>(u.size()) != dim_) return false;
  for (std::size_t r = 0; r < rows_.size(); ++r)
    if (dot(rows_[r], u) < rhs_[r] - tol) return false;
  return true;
}

PreferencePolyhedron load_polyhedron(std::istream& in) {
  std::vector<Vector> rows;
  Vector rhs;
  std::string line;
  std::size_t row = 0;
  bool header_skipped = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (!header_skipped) {
      header_skipped = true;
      bool numeric = true;
      try {
        for (const auto& c : cells) parse_number(c, row, "");
      } catch (const ParseError&) {
        numeric = false;
      }
      if (!numeric) continue;
    }
    if (cells.size() < 2) throw ParseError("row " + std::to_string(row) + " needs coefficients and a rhs");
    Vector r;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) r.push_back(parse_number(cells[c], row, "coef"));
    rhs.push_back(parse_number(cells.back(), row, "rhs"));
    rows.push_back(std::move(r));
  }
  return PreferencePolyhedron(std::move(rows), std::move(rhs));
}

// ------------------------------------------------------- UncertaintyModel

UncertaintyModel::UncertaintyModel(PreferencePolyhedron base, double gamma, std::vector<Observation> history)
    : base_(std::move(base)), gamma_(gamma), history_(std::move(history)) {
  if (!(gamma_ >= 0.0) || !std::isfinite(gamma_)) throw DomainError("inconsistency budget must be finite and >= 0");
  for (const auto& h : history_)
    if (h.response != 1 && h.response != -1) throw ValidationError("history responses must be +1 or -1");
}

UncertaintyModel UncertaintyModel::with(const Observation& obs) const {
  auto h = history_;
  h.push_back(obs);
  return UncertaintyModel(base_, gamma_, std::move(h));
}

UncertaintyModel UncertaintyModel::with_gamma(double gamma) const {
  return UncertaintyModel(base_, gamma, history_);
}

// -------------------------------------------------------------- Budgets

double erf_inv(double y) {
  if (!(y > -1.0 && y < 1.0)) throw DomainError("erf_inv argument must lie in (-1, 1)");
  if (y == 0.0) return 0.0;
  // Giles' single-precision approximation as the starting point.
  const double w = -std::log((1.0 - y) * (1.0 + y));
  double x;
  if (w < 5.0) {
    const double t = w - 2.5;
    double p = 2.81022636e-08;
    p = 3.43273939e-07 + p * t;
    p = -3.5233877e-06 + p * t;
    p = -4.39150654e-06 + p * t;
    p = 0.00021858087 + p * t;
    p = -0.00125372503 + p * t;
    p = -0.00417768164 + p * t;
    p = 0.246640727 + p * t;
    p = 1.50140941 + p * t;
    x = p * y;
  } else {
    const double t = std::sqrt(w) - 3.0;
    double p = -0.000200214257;
    p = 0.000100950558 + p * t;
    p = 0.00134934322 + p * t;
    p = -0.00367342844 + p * t;
    p = 0.00573950773 + p * t;
    p = -0.0076224613 + p * t;
    p = 0.00943887047 + p * t;
    p = 1.00167406 + p * t;
    p = 2.83297682 + p * t;
    x = p * y;
  }
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
  for (int step = 0; step < 2; ++step) {
    const double err = std::erf(x) - y;
    x -= err / (two_over_sqrt_pi * std::exp(-x * x));
  }
  return x;
}

double budget_gamma(const NoiseConfig& noise, int k) {
  if (!(noise.confidence > 0.0 && noise.confidence < 1.0)) throw DomainError("confidence p must lie in (0, 1)");
  if (noise.sigma < 0.0) throw DomainError("sigma must be >= 0");
  if (k < 0) throw DomainError("query count must be >= 0");
  if (noise.sigma == 0.0 || k == 0) return 0.0;
  return 2.0 * noise.sigma * std::sqrt(static_cast<double>(k)) * erf_inv(2.0 * noise.confidence - 1.0);
}

// --------------------------------------------------- Constraint systems

LinearSystem updated_constraints(const ItemBank& bank, const UncertaintyModel& model) {
  const auto& base = model.base();
  if (base.dim() != bank.dim()) throw ValidationError("polyhedron and item dimensions differ");
  LinearSystem sys;
  sys.num_u = bank.dim();
  sys.num_eps = static_cast<int>(model.history().size());
  const int n = sys.num_u + sys.num_eps;
  for (int r = 0; r < base.num_rows(); ++r) {
    LinearRow row{Vector(n, 0.0), solver::Sense::GreaterEqual, base.rhs()[r]};
    std::copy(base.rows()[r].begin(), base.rows()[r].end(), row.coef.begin());
    sys.rows.push_back(std::move(row));
  }
  for (int k = 0; k < sys.num_eps; ++k) {
    const auto& obs = model.history()[k];
    const Query& q = obs.query;
    if (q.first < 0 || q.first >= bank.size() || q.second < 0 || q.second >= bank.size())
      throw ValidationError("history query index out of range");
    const Vector d = difference(bank.item(q.first), bank.item(q.second));
    LinearRow row{Vector(n, 0.0), obs.response > 0 ? solver::Sense::GreaterEqual : solver::Sense::LessEqual, 0.0};
    std::copy(d.begin(), d.end(), row.coef.begin());
    row.coef[sys.num_u + k] = obs.response > 0 ? 1.0 : -1.0;
    sys.rows.push_back(std::move(row));
  }
  for (int k = 0; k < sys.num_eps; ++k) {
    LinearRow row{Vector(n, 0.0), solver::Sense::GreaterEqual, 0.0};
    row.coef[sys.num_u + k] = 1.0;
    sys.rows.push_back(std::move(row));
  }
  LinearRow budget{Vector(n, 0.0), solver::Sense::LessEqual, model.gamma()};
  for (int k = 0; k < sys.num_eps; ++k) budget.coef[sys.num_u + k] = 1.0;
  sys.rows.push_back(std::move(budget));
  return sys;
}

SystemVars add_system(solver::Model& m, const LinearSystem& sys) {
  SystemVars vars;
  for (int j = 0; j < sys.num_u; ++j) vars.u.push_back(m.add_continuous(-solver::kInf, solver::kInf));
  for (int k = 0; k < sys.num_eps; ++k) vars.eps.push_back(m.add_continuous(-solver::kInf, solver::kInf));
  for (const auto& row : sys.rows) {
    solver::LinExpr e;
    for (int j = 0; j < sys.num_u; ++j) e.add(vars.u[j], row.coef[j]);
    for (int k = 0; k < sys.num_eps; ++k) e.add(vars.eps[k], row.coef[sys.num_u + k]);
    m.add_constraint(e, row.sense, row.rhs);
  }
  return vars;
}

bool is_nonempty(const ItemBank& bank, const UncertaintyModel& model) {
  solver::Model m;
  add_system(m, updated_constraints(bank, model));
  const auto out = solver::solve(m);
  if (out.status == solver::Status::Optimal) return true;
  if (out.status == solver::Status::Infeasible) return false;
  throw SolverError(std::string("feasibility LP failed: ") + solver::to_string(out.status) + " " + out.message);
}

double minimal_budget(const ItemBank& bank, const UncertaintyModel& model) {
  if (model.history().empty()) return 0.0;
  // Drop the budget row by giving it an infinite rhs, then minimize sum eps.
  auto sys = updated_constraints(bank, model.with_gamma(0.0));
  sys.rows.pop_back();
  solver::Model m;
  const auto vars = add_system(m, sys);
  solver::LinExpr total;
  for (auto e : vars.eps) total.add(e, 1.0);
  m.set_objective(total, solver::ObjSense::Minimize);
  const auto out = solver::solve(m);
  if (!out.optimal()) throw SolverError("minimal-budget LP failed");
  return std::max(0.0, *out.objective);
}

bool contains(const ItemBank& bank, const UncertaintyModel& model, const Vector& u, double tol) {
  if (!model.base().contains(u, tol)) return false;
  // Each answer needs eps_k = max(0, -s_k d_k . u); the total must fit the budget.
  double needed = 0.0;
  for (const auto& obs : model.history()) {
    const Vector d = difference(bank.item(obs.query.first), bank.item(obs.query.second));
    needed += std::max(0.0, -obs.response * dot(d, u));
  }
  return needed <= model.gamma() + tol;
}

}  // namespace elicit
