#pragma once

// Thin modelling layer over a linear / mixed-binary linear optimizer.
//
// Every optimization in the library is expressed through Model and solved
// through solve(); nothing else talks to the backend directly.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace elicit::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Var {
  int index = -1;
  friend bool operator==(Var, Var) = default;
};

enum class VarType { Continuous, Binary };
enum class Sense { LessEqual, GreaterEqual, Equal };
enum class ObjSense { Minimize, Maximize };

class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
  LinExpr(Var v, double coef = 1.0) { add(v, coef); }  // NOLINT(google-explicit-constructor)

  LinExpr& add(Var v, double coef) {
    if (coef != 0.0) terms_.emplace_back(v.index, coef);
    return *this;
  }
  LinExpr& add(double c) {
    constant_ += c;
    return *this;
  }
  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double scale);

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

LinExpr operator+(LinExpr lhs, const LinExpr& rhs);
LinExpr operator-(LinExpr lhs, const LinExpr& rhs);
LinExpr operator*(double scale, LinExpr expr);

struct Controls {
  double time_limit = kInf;  // seconds
  double mip_rel_gap = 1e-6;
  double mip_abs_gap = 1e-9;
  double feasibility_tol = 1e-7;
  double integrality_tol = 1e-6;
  int threads = 1;
  int seed = 0;
  // Re-solve the LP with binaries fixed at their rounded values so the
  // reported objective is consistent with an exactly integral assignment.
  bool polish = true;
  // Non-empty: write the model in LP format before solving.
  std::string dump_path;
};

class Model {
 public:
  Var add_continuous(double lo, double hi, std::string name = {});
  Var add_binary(std::string name = {});

  void add_constraint(const LinExpr& expr, Sense sense, double rhs);
  void add_range(const LinExpr& expr, double lo, double hi);

  void set_objective(LinExpr expr, ObjSense sense);
  void set_bounds(Var v, double lo, double hi);
  void fix(Var v, double value) { set_bounds(v, value, value); }

  // Advisory starting point over binary variables.
  void set_hint(std::vector<std::pair<Var, double>> hint);
  const std::vector<std::pair<Var, double>>& hint() const { return hint_; }

  Controls& controls() { return controls_; }
  const Controls& controls() const { return controls_; }

  std::size_t num_vars() const { return lower_.size(); }
  std::size_t num_rows() const { return row_lower_.size(); }
  std::size_t num_binaries() const;
  bool is_binary(Var v) const { return types_.at(v.index) == VarType::Binary; }
  double lower(Var v) const { return lower_.at(v.index); }
  double upper(Var v) const { return upper_.at(v.index); }
  const std::string& name(Var v) const { return names_.at(v.index); }

  // Throws UsageError if any row references an unregistered variable or a
  // bound pair is inverted.
  void validate() const;

 private:
  friend class Backend;

  std::vector<double> lower_, upper_, cost_;
  std::vector<VarType> types_;
  std::vector<std::string> names_;
  std::vector<int> row_start_{0};
  std::vector<int> row_index_;
  std::vector<double> row_value_;
  std::vector<double> row_lower_, row_upper_;
  ObjSense obj_sense_ = ObjSense::Minimize;
  double obj_offset_ = 0.0;
  std::vector<std::pair<Var, double>> hint_;
  Controls controls_;
};

enum class Status { Optimal, Infeasible, Unbounded, TimeLimit, Error };

const char* to_string(Status s);

struct SolveOutcome {
  Status status = Status::Error;
  std::optional<double> objective;
  std::vector<double> values;
  // Binary assignment witnessing unboundedness, when the backend has one.
  std::vector<double> ray_witness;
  std::optional<double> mip_gap;
  double integrality_tol = 1e-6;
  std::string message;
  double wall_seconds = 0.0;

  bool optimal() const { return status == Status::Optimal; }
};

SolveOutcome solve(const Model& model);

// Value of a variable; binaries are rounded after checking they are within
// the integrality tolerance. Throws UsageError without an assignment.
double value(const SolveOutcome& outcome, Var v, const Model& model);
double value(const SolveOutcome& outcome, Var v);
std::vector<double> values(const SolveOutcome& outcome, const std::vector<Var>& vars);

// Returns a copy of the model carrying the hint. Throws UsageError if the hint
// names a non-binary variable.
Model warm_start(Model model, std::vector<std::pair<Var, double>> hint);

// Solves the LP left after fixing every binary to the given assignment.
// Used to check that a hint is feasible without relying on the backend's
// repair heuristics.
SolveOutcome solve_with_fixed_binaries(const Model& model,
                                       const std::vector<std::pair<Var, double>>& assignment);

}  // namespace elicit::solver
