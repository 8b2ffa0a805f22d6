#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "elicit/errors.hpp"
#include "elicit/log.hpp"
#include "elicit/offline.hpp"
#include "elicit/service.hpp"
#include "elicit/simulate.hpp"

namespace elicit::cli {

namespace {

struct Options {
  std::string bank_path;
  int items = 0;  // synthetic bank size when no --bank
  int dim = 4;
  std::string criterion = "mmu";
  std::string prior = "simplex";
  int k = 1;
  std::vector<int> ks{1};
  std::optional<double> gamma;
  double sigma = 0.0;
  std::optional<double> sigma_assumed;
  double p = 0.9;
  std::string method = "ccg";
  std::string symmetry = "on";
  double delta = 1e-3;
  double time_limit = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
  bool json = false;
  int jobs = 1;
  std::string plan;
  int draws = 50;
  int agents = 50;
  int k_max = 10;
  bool no_rand = false;
  bool per_agent_vfull = false;
  std::string data_dir;
  std::string listen;
  std::string static_dir;
  std::string cors_origin = "*";
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string plan_text(const QueryPlan& plan) {
  std::string s;
  for (const auto& q : plan.queries) {
    if (!s.empty()) s += ',';
    s += std::to_string(q.first + 1) + ':' + std::to_string(q.second + 1);
  }
  return s;
}

QueryPlan parse_plan(const std::string& text, const ItemBank& bank) {
  QueryPlan plan;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw ValidationError("plan entry '" + part + "' is not of the form i:j");
    int a = 0, b = 0;
    try {
      std::size_t used_a = 0, used_b = 0;
      a = std::stoi(part.substr(0, colon), &used_a);
      b = std::stoi(part.substr(colon + 1), &used_b);
      if (used_a != colon || used_b != part.size() - colon - 1) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ValidationError("plan entry '" + part + "' is not of the form i:j");
    }
    if (a > b) std::swap(a, b);
    plan.queries.push_back({a - 1, b - 1});
  }
  if (plan.queries.empty()) throw ValidationError("plan is empty");
  validate_plan(plan, bank);
  return plan;
}

ItemBank load_bank(const Options& o) {
  if (!o.bank_path.empty()) return load_item_bank_file(o.bank_path);
  if (o.items < 2) throw ValidationError("either --bank or --items >= 2 is required");
  std::mt19937_64 rng(derive_seed(o.seed, 0x62616e6bULL));
  return synthetic_bank(o.items, o.dim, rng);
}

PreferencePolyhedron load_prior(const Options& o, int dim) {
  if (o.prior == "simplex") return PreferencePolyhedron::simplex(dim);
  if (o.prior == "box") return PreferencePolyhedron::box(dim, -1.0, 1.0);
  std::ifstream in(o.prior);
  if (!in) throw ValidationError("prior must be simplex, box or a readable CSV file, got '" + o.prior + "'");
  return load_polyhedron(in);
}

CcgOptions ccg_options(const Options& o) {
  CcgOptions c;
  c.delta = o.delta;
  c.use_symmetry = o.symmetry == "on";
  c.controls.seed = static_cast<int>(o.seed & 0x7fffffff);
  if (o.time_limit > 0) c.controls.time_limit = o.time_limit;
  return c;
}

// Writes to --out when given, else to the console stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& console) : os_(&console) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ValidationError("cannot write '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

int solve_offline(const Options& o, std::ostream& out) {
  if (o.k < 1) throw ValidationError("--k must be >= 1");
  const ItemBank bank = load_bank(o);
  const auto base = load_prior(o, bank.dim());
  const Criterion c = parse_criterion(o.criterion);
  const OfflineMethod method = parse_method(o.method);
  const NoiseConfig noise{o.sigma, o.p};
  const double gamma = o.gamma ? *o.gamma : budget_gamma(noise, o.k);
  const UncertaintyModel prior(base, gamma);
  const CcgOptions opts = ccg_options(o);

  QueryPlan plan;
  double value = 0.0;
  Json extra = Json::object();
  if (method == OfflineMethod::Ccg) {
    const auto r = ccg(c, bank, prior, o.k, opts);
    plan = r.plan;
    value = r.value;
    extra = {{"iterations", r.state.main_solves}, {"gap", r.state.gap()}, {"converged", r.state.converged}};
    if (!r.state.note.empty()) extra["note"] = r.state.note;
  } else if (method == OfflineMethod::Milp) {
    const auto r = solve_formulation(c, bank, prior, o.k, all_scenarios(o.k), opts);
    if (r.status != solver::Status::Optimal) throw SolverError(std::string("MILP ") + solver::to_string(r.status));
    plan = r.plan;
    value = r.value;
    extra = {{"dual_escalations", r.dual_escalations}};
  } else {
    const auto r = greedy(c, bank, prior, o.k, opts);
    if (!r.complete) throw ValidationError(r.warning);
    plan = r.plan;
    value = r.trace.back();
    extra = {{"trace", r.trace}};
  }
  const auto bm = benchmarks(c, bank, base);
  const double normalized = normalize(value, bm.v0, bm.vfull, c);

  Sink sink(o.out_path, out);
  if (o.json) {
    Json j = {{"plan", plan_text(plan)}, {"value", value},  {"normalized", normalized},
              {"gamma", gamma},          {"criterion", to_string(c)}, {"method", to_string(method)}};
    j.update(extra);
    *sink << j.dump(2) << '\n';
  } else {
    *sink << "plan        " << plan_text(plan) << '\n'
          << "value       " << num(value) << '\n'
          << "normalized  " << num(normalized) << '\n'
          << "gamma       " << num(gamma) << '\n';
  }
  return 0;
}

int evaluate(const Options& o, std::ostream& out) {
  const ItemBank bank = load_bank(o);
  const auto base = load_prior(o, bank.dim());
  const Criterion c = parse_criterion(o.criterion);
  const QueryPlan plan = parse_plan(o.plan, bank);
  const int K = static_cast<int>(plan.size());
  const double gamma = o.gamma ? *o.gamma : budget_gamma({o.sigma, o.p}, K);
  const auto r = evaluate_plan(c, plan, bank, UncertaintyModel(base, gamma), ccg_options(o));
  const auto bm = benchmarks(c, bank, base);
  const double normalized = normalize(r.value, bm.v0, bm.vfull, c);
  std::string worst;
  for (int s : responses_of(r.worst, K)) worst += s > 0 ? '+' : '-';

  Sink sink(o.out_path, out);
  if (o.json)
    *sink << Json{{"plan", plan_text(plan)}, {"value", r.value}, {"normalized", normalized},
                  {"gamma", gamma},          {"worst_scenario", worst}}
                 .dump(2)
          << '\n';
  else
    *sink << "plan            " << plan_text(plan) << '\n'
          << "value           " << num(r.value) << '\n'
          << "normalized      " << num(normalized) << '\n'
          << "worst scenario  " << worst << '\n';
  return 0;
}

int report(const Options& o, const ExperimentResult& res, std::ostream& out, bool online) {
  if (!o.out_path.empty()) {
    std::ofstream f(o.out_path);
    if (!f) throw ValidationError("cannot write '" + o.out_path + "'");
    write_csv(f, res.rows);
  }
  const auto summary = summarize(res.rows);
  if (o.json) {
    Json rows = Json::array();
    for (const auto& s : summary) {
      Json r = {{"method", s.method}, {"criterion", to_string(s.criterion)}, {"K", s.K},
                {"count", s.count},   {"mean_normalized", s.mean_normalized},
                {"median_normalized", s.median_normalized}, {"worst_normalized", s.worst_normalized},
                {"mean_wall_ms", s.mean_wall_ms}};
      if (s.mean_rank) r["mean_rank"] = *s.mean_rank;
      if (s.mean_regret) r["mean_regret"] = *s.mean_regret;
      rows.push_back(r);
    }
    Json j = {{"summary", rows}, {"escalations", res.escalations}, {"failures", res.failures}};
    if (online) j["outside_final_set"] = res.outside_final_set;
    out << j.dump(2) << '\n';
  } else {
    write_summary(out, summary);
    out << "budget escalations: " << res.escalations << '\n';
    if (online) out << "agents outside final set: " << res.outside_final_set << '\n';
    for (const auto& f : res.failures) out << "failure: " << f << '\n';
  }
  return res.failures.empty() ? 0 : 1;
}

int simulate_offline(const Options& o, std::ostream& out) {
  const ItemBank bank = load_bank(o);
  OfflineExperimentConfig cfg;
  cfg.criterion = parse_criterion(o.criterion);
  cfg.Ks = o.ks;
  cfg.gamma = o.gamma;
  cfg.noise = {o.sigma, o.p};
  cfg.method = parse_method(o.method);
  cfg.rand_draws = o.draws;
  cfg.seed = o.seed;
  cfg.jobs = o.jobs;
  cfg.ccg = ccg_options(o);
  for (int K : cfg.Ks)
    if (K < 0) throw ValidationError("--ks entries must be >= 0");
  return report(o, run_offline_experiment(bank, load_prior(o, bank.dim()), cfg), out, false);
}

int simulate_online(const Options& o, std::ostream& out) {
  const ItemBank bank = load_bank(o);
  OnlineExperimentConfig cfg;
  cfg.criterion = parse_criterion(o.criterion);
  cfg.agents = o.agents;
  cfg.k_max = o.k_max;
  cfg.sigma_true = o.sigma;
  cfg.sigma_assumed = o.sigma_assumed.value_or(o.sigma);
  cfg.confidence = o.p;
  cfg.seed = o.seed;
  cfg.jobs = o.jobs;
  cfg.rand_baseline = !o.no_rand;
  cfg.per_agent_vfull = o.per_agent_vfull;
  cfg.ccg = ccg_options(o);
  return report(o, run_online_experiment(bank, load_prior(o, bank.dim()), cfg), out, true);
}

std::string env_or(const char* name, const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  if (const char* v = std::getenv(name)) return v;
  return fallback;
}

int run_serve(const Options& o) {
  ServiceConfig cfg;
  cfg.data_dir = env_or("ELICIT_DATA_DIR", o.data_dir, "elicit-data");
  const std::string listen = env_or("ELICIT_LISTEN", o.listen, "127.0.0.1:8080");
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--listen must be host:port");
  cfg.host = listen.substr(0, colon);
  try {
    cfg.port = std::stoi(listen.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw ValidationError("--listen must be host:port");
  }
  const std::string limit = env_or("ELICIT_TIME_LIMIT", o.time_limit > 0 ? std::to_string(o.time_limit) : "", "0");
  cfg.time_limit = std::stod(limit);
  cfg.static_dir = env_or("ELICIT_STATIC_DIR", o.static_dir, "");
  cfg.cors_origin = o.cors_origin;
  if (!serve(cfg)) {
    log(LogLevel::Error, "cannot listen on " + listen);
    return 1;
  }
  return 0;
}

void bank_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--bank", o.bank_path, "Item bank CSV")->check(CLI::ExistingFile);
  cmd->add_option("--items", o.items, "Synthetic bank size when --bank is absent")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dim", o.dim, "Synthetic bank dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--criterion", o.criterion, "mmu or mmr")->check(CLI::IsMember({"mmu", "mmr"}));
  cmd->add_option("--prior", o.prior, "simplex, box, or a CSV of rows coef . u >= rhs");
  cmd->add_option("--gamma", o.gamma, "Fixed inconsistency budget (default: schedule)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--sigma", o.sigma, "Response noise standard deviation")->check(CLI::NonNegativeNumber);
  cmd->add_option("--p", o.p, "Budget confidence level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--delta", o.delta, "CCG optimality tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--symmetry", o.symmetry, "Symmetry-breaking rows")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--time-limit", o.time_limit, "Seconds per solve")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out_path, "Output path");
  cmd->add_flag("--json", o.json, "Machine-readable output");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Robust active preference elicitation", "elicit"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve-offline", "Best K-query plan");
  bank_flags(solve, o);
  solve->add_option("--k", o.k, "Number of queries")->required();
  solve->add_option("--method", o.method, "milp, ccg or greedy")->check(CLI::IsMember({"milp", "ccg", "greedy"}));

  auto* eval = app.add_subcommand("evaluate", "Worst-case value of a plan");
  bank_flags(eval, o);
  eval->add_option("--plan", o.plan, "Queries as i:j,i:j (1-based)")->required();

  auto* sim_off = app.add_subcommand("simulate-offline", "Offline method against random plans");
  bank_flags(sim_off, o);
  sim_off->add_option("--ks", o.ks, "Query counts")->delimiter(',');
  sim_off->add_option("--method", o.method, "milp, ccg or greedy")->check(CLI::IsMember({"milp", "ccg", "greedy"}));
  sim_off->add_option("--draws", o.draws, "Random plans per K")->check(CLI::NonNegativeNumber);
  sim_off->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* sim_on = app.add_subcommand("simulate-online", "Online elicitation with simulated agents");
  bank_flags(sim_on, o);
  sim_on->add_option("--agents", o.agents, "Number of agents")->check(CLI::NonNegativeNumber);
  sim_on->add_option("--k-max", o.k_max, "Queries per agent")->check(CLI::NonNegativeNumber);
  sim_on->add_option("--sigma-assumed", o.sigma_assumed, "Noise level used for the budget (default: --sigma)")
      ->check(CLI::NonNegativeNumber);
  sim_on->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sim_on->add_flag("--no-rand", o.no_rand, "Skip the random-query baseline");
  sim_on->add_flag("--per-agent-vfull", o.per_agent_vfull, "Normalize by each agent's best utility");

  auto* srv = app.add_subcommand("serve", "HTTP session service");
  srv->add_option("--data-dir", o.data_dir, "Session and bank storage (env ELICIT_DATA_DIR)");
  srv->add_option("--listen", o.listen, "host:port (env ELICIT_LISTEN)");
  srv->add_option("--time-limit", o.time_limit, "Seconds per solve (env ELICIT_TIME_LIMIT)")
      ->check(CLI::NonNegativeNumber);
  srv->add_option("--static-dir", o.static_dir, "Static UI assets (env ELICIT_STATIC_DIR)");
  srv->add_option("--cors-origin", o.cors_origin, "Allowed CORS origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve) return solve_offline(o, out);
    if (*eval) return evaluate(o, out);
    if (*sim_off) return simulate_offline(o, out);
    if (*sim_on) return simulate_online(o, out);
    return run_serve(o);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"elicit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace elicit::cli
