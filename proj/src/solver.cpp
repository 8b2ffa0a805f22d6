#include "elicit/solver.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "Highs.h"
#include "elicit/errors.hpp"

namespace elicit::solver {

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  constant_ += other.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  for (const auto& [idx, coef] : other.terms_) terms_.emplace_back(idx, -coef);
  constant_ -= other.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double scale) {
  for (auto& term : terms_) term.second *= scale;
  constant_ *= scale;
  return *this;
}

LinExpr operator+(LinExpr lhs, const LinExpr& rhs) { return lhs += rhs; }
LinExpr operator-(LinExpr lhs, const LinExpr& rhs) { return lhs -= rhs; }
LinExpr operator*(double scale, LinExpr expr) { return expr *= scale; }

Var Model::add_continuous(double lo, double hi, std::string name) {
  lower_.push_back(lo);
  upper_.push_back(hi);
  cost_.push_back(0.0);
  types_.push_back(VarType::Continuous);
  names_.push_back(std::move(name));
  return Var{static_cast<int>(lower_.size()) - 1};
}

Var Model::add_binary(std::string name) {
  Var v = add_continuous(0.0, 1.0, std::move(name));
  types_.back() = VarType::Binary;
  return v;
}

void Model::add_range(const LinExpr& expr, double lo, double hi) {
  // Merge repeated variables so the backend sees one coefficient per column.
  std::map<int, double> merged;
  for (const auto& [idx, coef] : expr.terms()) merged[idx] += coef;
  for (const auto& [idx, coef] : merged) {
    if (coef == 0.0) continue;
    row_index_.push_back(idx);
    row_value_.push_back(coef);
  }
  row_start_.push_back(static_cast<int>(row_index_.size()));
  row_lower_.push_back(lo - expr.constant());
  row_upper_.push_back(hi - expr.constant());
}

void Model::add_constraint(const LinExpr& expr, Sense sense, double rhs) {
  switch (sense) {
    case Sense::LessEqual:
      add_range(expr, -kInf, rhs);
      break;
    case Sense::GreaterEqual:
      add_range(expr, rhs, kInf);
      break;
    case Sense::Equal:
      add_range(expr, rhs, rhs);
      break;
  }
}

void Model::set_objective(LinExpr expr, ObjSense sense) {
  std::fill(cost_.begin(), cost_.end(), 0.0);
  for (const auto& [idx, coef] : expr.terms()) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= cost_.size())
      throw UsageError("objective references an unregistered variable");
    cost_[idx] += coef;
  }
  obj_offset_ = expr.constant();
  obj_sense_ = sense;
}

void Model::set_bounds(Var v, double lo, double hi) {
  lower_.at(v.index) = lo;
  upper_.at(v.index) = hi;
}

void Model::set_hint(std::vector<std::pair<Var, double>> hint) {
  for (const auto& [v, val] : hint) {
    if (v.index < 0 || static_cast<std::size_t>(v.index) >= types_.size())
      throw UsageError("hint names an unregistered variable");
    if (types_[v.index] != VarType::Binary)
      throw UsageError("hint names non-binary variable '" + names_[v.index] + "'");
  }
  hint_ = std::move(hint);
}

std::size_t Model::num_binaries() const {
  std::size_t n = 0;
  for (auto t : types_) n += (t == VarType::Binary);
  return n;
}

void Model::validate() const {
  const auto n = static_cast<int>(lower_.size());
  for (int idx : row_index_)
    if (idx < 0 || idx >= n) throw UsageError("constraint references an unregistered variable");
  for (int j = 0; j < n; ++j)
    if (lower_[j] > upper_[j])
      throw UsageError("variable '" + names_[j] + "' has lower bound above upper bound");
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal:
      return "Optimal";
    case Status::Infeasible:
      return "Infeasible";
    case Status::Unbounded:
      return "Unbounded";
    case Status::TimeLimit:
      return "TimeLimit";
    case Status::Error:
      return "Error";
  }
  return "?";
}

class Backend {
 public:
  explicit Backend(const Model& m) : m_(m) {}

  SolveOutcome run(bool zero_objective = false, bool presolve = true) const {
    SolveOutcome out;
    out.integrality_tol = m_.controls_.integrality_tol;
    const auto t0 = std::chrono::steady_clock::now();

    Highs highs;
    configure(highs, presolve);
    HighsLp lp = build_lp(zero_objective);
    const bool has_integers = m_.num_binaries() > 0;
    if (highs.passModel(std::move(lp)) == HighsStatus::kError) {
      out.message = "backend rejected the model";
      return out;
    }
    if (!m_.controls_.dump_path.empty()) highs.writeModel(m_.controls_.dump_path);
    if (!m_.hint_.empty()) {
      std::vector<HighsInt> idx;
      std::vector<double> val;
      for (const auto& [v, x] : m_.hint_) {
        idx.push_back(v.index);
        val.push_back(x);
      }
      highs.setSolution(static_cast<HighsInt>(idx.size()), idx.data(), val.data());
    }

    if (highs.run() == HighsStatus::kError) {
      out.message = "backend run failed";
      out.wall_seconds = elapsed(t0);
      return out;
    }
    const HighsModelStatus status = highs.getModelStatus();
    const HighsInfo& info = highs.getInfo();
    switch (status) {
      case HighsModelStatus::kOptimal:
        out.status = Status::Optimal;
        break;
      case HighsModelStatus::kModelEmpty:
        out.status = Status::Optimal;
        break;
      case HighsModelStatus::kInfeasible:
        out.status = Status::Infeasible;
        break;
      case HighsModelStatus::kUnbounded:
        out.status = Status::Unbounded;
        break;
      case HighsModelStatus::kUnboundedOrInfeasible:
        out.status = disambiguate(presolve);
        break;
      case HighsModelStatus::kTimeLimit:
      case HighsModelStatus::kIterationLimit:
      case HighsModelStatus::kSolutionLimit:
        out.status = Status::TimeLimit;
        break;
      default:
        out.status = Status::Error;
        out.message = highs.modelStatusToString(status);
        break;
    }
    const bool has_point = info.primal_solution_status == kSolutionStatusFeasible;
    if ((out.status == Status::Optimal || out.status == Status::TimeLimit) && has_point) {
      out.values = highs.getSolution().col_value;
      out.objective = info.objective_function_value;
      if (has_integers) out.mip_gap = info.mip_gap;
    } else if (out.status == Status::Optimal && m_.lower_.empty()) {
      out.objective = m_.obj_offset_;
    } else if (out.status == Status::Optimal) {
      out.status = Status::Error;
      out.message = "backend reported optimal without a primal point";
    }
    if (out.status == Status::Unbounded && has_integers &&
        info.primal_solution_status == kSolutionStatusFeasible) {
      out.ray_witness = highs.getSolution().col_value;
    }
    out.wall_seconds = elapsed(t0);

    if (out.status == Status::Optimal && has_integers && m_.controls_.polish && !out.values.empty())
      polish(out);
    return out;
  }

 private:
  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void configure(Highs& highs, bool presolve) const {
    const Controls& c = m_.controls_;
    highs.setOptionValue("output_flag", false);
    highs.setOptionValue("threads", c.threads);
    highs.setOptionValue("random_seed", c.seed);
    if (std::isfinite(c.time_limit)) highs.setOptionValue("time_limit", c.time_limit);
    highs.setOptionValue("mip_rel_gap", c.mip_rel_gap);
    highs.setOptionValue("mip_abs_gap", c.mip_abs_gap);
    highs.setOptionValue("primal_feasibility_tolerance", c.feasibility_tol);
    highs.setOptionValue("dual_feasibility_tolerance", c.feasibility_tol);
    highs.setOptionValue("mip_feasibility_tolerance", c.integrality_tol);
    if (!presolve) highs.setOptionValue("presolve", "off");
  }

  HighsLp build_lp(bool zero_objective) const {
    HighsLp lp;
    const auto ncol = static_cast<HighsInt>(m_.lower_.size());
    const auto nrow = static_cast<HighsInt>(m_.row_lower_.size());
    lp.num_col_ = ncol;
    lp.num_row_ = nrow;
    lp.col_cost_ = zero_objective ? std::vector<double>(ncol, 0.0) : m_.cost_;
    lp.col_lower_ = m_.lower_;
    lp.col_upper_ = m_.upper_;
    lp.row_lower_ = m_.row_lower_;
    lp.row_upper_ = m_.row_upper_;
    lp.offset_ = zero_objective ? 0.0 : m_.obj_offset_;
    lp.sense_ = m_.obj_sense_ == ObjSense::Maximize ? ::ObjSense::kMaximize : ::ObjSense::kMinimize;

    // Row-major storage transposed into the backend's column-major layout.
    std::vector<HighsInt> count(ncol + 1, 0);
    for (int idx : m_.row_index_) ++count[idx + 1];
    for (HighsInt j = 0; j < ncol; ++j) count[j + 1] += count[j];
    lp.a_matrix_.format_ = MatrixFormat::kColwise;
    lp.a_matrix_.num_col_ = ncol;
    lp.a_matrix_.num_row_ = nrow;
    lp.a_matrix_.start_ = count;
    lp.a_matrix_.index_.assign(m_.row_index_.size(), 0);
    lp.a_matrix_.value_.assign(m_.row_index_.size(), 0.0);
    std::vector<HighsInt> fill(count.begin(), count.end() - 1);
    for (HighsInt r = 0; r < nrow; ++r) {
      for (int k = m_.row_start_[r]; k < m_.row_start_[r + 1]; ++k) {
        const HighsInt pos = fill[m_.row_index_[k]]++;
        lp.a_matrix_.index_[pos] = r;
        lp.a_matrix_.value_[pos] = m_.row_value_[k];
      }
    }
    if (m_.num_binaries() > 0) {
      lp.integrality_.assign(ncol, HighsVarType::kContinuous);
      for (HighsInt j = 0; j < ncol; ++j)
        if (m_.types_[j] == VarType::Binary) lp.integrality_[j] = HighsVarType::kInteger;
    }
    return lp;
  }

  Status disambiguate(bool presolve_was_on) const {
    if (presolve_was_on) {
      const SolveOutcome again = run(false, false);
      if (again.status != Status::Error) return again.status;
    }
    const SolveOutcome feas = run(true, false);
    if (feas.status == Status::Infeasible) return Status::Infeasible;
    if (feas.status == Status::Optimal) return Status::Unbounded;
    return Status::Error;
  }

  void polish(SolveOutcome& out) const {
    Model fixed = m_;
    fixed.controls_.polish = false;
    fixed.controls_.dump_path.clear();
    fixed.hint_.clear();
    for (std::size_t j = 0; j < fixed.types_.size(); ++j) {
      if (fixed.types_[j] != VarType::Binary) continue;
      const double r = std::round(out.values[j]);
      fixed.types_[j] = VarType::Continuous;
      fixed.lower_[j] = fixed.upper_[j] = r;
    }
    const SolveOutcome lp = Backend(fixed).run();
    if (lp.status != Status::Optimal || lp.values.empty()) return;
    out.values = lp.values;
    out.objective = lp.objective;
  }

  const Model& m_;
};

SolveOutcome solve(const Model& model) {
  model.validate();
  return Backend(model).run();
}

double value(const SolveOutcome& outcome, Var v, const Model& model) {
  const double raw = value(outcome, v);
  if (!model.is_binary(v)) return raw;
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) > outcome.integrality_tol)
    throw SolverError("binary variable '" + model.name(v) + "' is fractional: " + std::to_string(raw));
  return rounded;
}

double value(const SolveOutcome& outcome, Var v) {
  if (outcome.values.empty())
    throw UsageError(std::string("no assignment available for a solve with status ") +
                     to_string(outcome.status));
  return outcome.values.at(v.index);
}

std::vector<double> values(const SolveOutcome& outcome, const std::vector<Var>& vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(value(outcome, v));
  return out;
}

Model warm_start(Model model, std::vector<std::pair<Var, double>> hint) {
  model.set_hint(std::move(hint));
  return model;
}

SolveOutcome solve_with_fixed_binaries(const Model& model,
                                       const std::vector<std::pair<Var, double>>& assignment) {
  Model fixed = model;
  for (const auto& [v, x] : assignment) {
    if (!fixed.is_binary(v)) throw UsageError("assignment names a non-binary variable");
    fixed.fix(v, std::round(x));
  }
  fixed.set_hint({});
  return solve(fixed);
}

}  // namespace elicit::solver
