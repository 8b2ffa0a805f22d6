#include "elicit/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <tuple>

#include "elicit/errors.hpp"
#include "elicit/log.hpp"

namespace elicit {

namespace {

double ms_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
}

// Runs body(i) for i in [0, n) on up to `jobs` threads; results go to
// per-index slots so the output order never depends on scheduling.
template <class Body>
void parallel_for(int n, int jobs, Body body) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SimAgent sample_agent(int J, std::mt19937_64& rng) {
  if (J < 1) throw ValidationError("agent dimension must be >= 1");
  std::normal_distribution<double> n01(0.0, 1.0);
  SimAgent a;
  double norm = 0.0;
  while (norm == 0.0) {
    a.u.assign(J, 0.0);
    for (double& x : a.u) x = n01(rng);
    norm = std::sqrt(dot(a.u, a.u));
  }
  for (double& x : a.u) x /= norm;
  return a;
}

SimAgent sample_agent(int J, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto a = sample_agent(J, rng);
  a.seed = seed;
  return a;
}

int simulate_response(const SimAgent& agent, const Query& q, const ItemBank& bank, double sigma,
                      std::mt19937_64& rng) {
  if (sigma < 0.0) throw DomainError("sigma must be >= 0");
  double shock = 0.0;
  if (sigma > 0.0) shock = std::normal_distribution<double>(0.0, sigma)(rng);
  return dot(agent.u, difference(bank.item(q.first), bank.item(q.second))) + shock >= 0.0 ? 1 : -1;
}

double normalize(double value, double v0, double vfull, Criterion c) {
  if (std::abs(vfull - v0) < 1e-12) {
    log_warning("no-information and full-information values coincide; normalized value set by convention");
    return c == Criterion::Mmu ? 1.0 : 0.0;
  }
  return c == Criterion::Mmu ? (value - v0) / (vfull - v0) : (value - vfull) / (v0 - vfull);
}

QueryPlan random_plan(const ItemBank& bank, int K, std::mt19937_64& rng) {
  auto all = all_queries(bank);
  if (K < 0 || K > static_cast<int>(all.size()))
    throw ValidationError("cannot draw " + std::to_string(K) + " distinct queries from " + std::to_string(all.size()));
  // Partial Fisher-Yates.
  for (int k = 0; k < K; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  QueryPlan p{{all.begin(), all.begin() + K}};
  std::sort(p.queries.begin(), p.queries.end());
  return p;
}

ItemBank synthetic_bank(int I, int J, std::mt19937_64& rng, double radius) {
  std::vector<std::string> ids;
  std::vector<Vector> items;
  for (int i = 0; i < I; ++i) {
    auto x = sample_agent(J, rng).u;
    for (double& v : x) v *= radius;
    ids.push_back(std::to_string(i + 1));
    items.push_back(std::move(x));
  }
  return ItemBank(std::move(ids), std::move(items));
}

Benchmarks benchmarks(Criterion c, const ItemBank& bank, const PreferencePolyhedron& base) {
  const UncertaintyModel none(base, 0.0);
  if (c == Criterion::Mmu) return {recommend_mmu(bank, none).guarantee, full_information_utility(bank, base)};
  return {recommend_mmr(bank, none).guarantee, 0.0};
}

const char* to_string(OfflineMethod m) {
  switch (m) {
    case OfflineMethod::Milp:
      return "milp";
    case OfflineMethod::Ccg:
      return "ccg";
    case OfflineMethod::Greedy:
      return "greedy";
  }
  return "?";
}

OfflineMethod parse_method(const std::string& text) {
  if (text == "milp") return OfflineMethod::Milp;
  if (text == "ccg") return OfflineMethod::Ccg;
  if (text == "greedy") return OfflineMethod::Greedy;
  throw ValidationError("method must be milp, ccg or greedy, got '" + text + "'");
}

ExperimentResult run_offline_experiment(const ItemBank& bank, const PreferencePolyhedron& base,
                                        const OfflineExperimentConfig& config) {
  const Criterion c = config.criterion;
  const auto bm = benchmarks(c, bank, base);
  ExperimentResult out;
  std::mutex failures_mutex;
  auto fail = [&](const std::string& what) {
    std::lock_guard lock(failures_mutex);
    out.failures.push_back(what);
    log_warning(what);
  };

  for (int K : config.Ks) {
    if (K < 0) throw ValidationError("K must be >= 0");
    const double gamma = config.gamma ? *config.gamma : budget_gamma(config.noise, K);
    const UncertaintyModel prior(base, gamma);
    MetricRow proto;
    proto.criterion = c;
    proto.K = K;
    proto.sigma_true = proto.sigma_assumed = config.noise.sigma;

    MetricRow best = proto;
    best.method = to_string(config.method);
    const auto start = std::chrono::steady_clock::now();
    try {
      if (K == 0) {
        best.guarantee = bm.v0;
      } else if (config.method == OfflineMethod::Milp) {
        const auto r = solve_formulation(c, bank, prior, K, all_scenarios(K), config.ccg);
        if (r.status != solver::Status::Optimal) throw SolverError(solver::to_string(r.status));
        best.guarantee = r.value;
      } else if (config.method == OfflineMethod::Ccg) {
        best.guarantee = ccg(c, bank, prior, K, config.ccg).value;
      } else {
        const auto g = greedy(c, bank, prior, K, config.ccg);
        if (!g.complete) throw ValidationError(g.warning);
        best.guarantee = g.trace.back();
      }
      best.wall_ms = ms_since(start);
      best.normalized = normalize(best.guarantee, bm.v0, bm.vfull, c);
      out.rows.push_back(best);
    } catch (const Error& e) {
      fail(std::string(to_string(config.method)) + " at K=" + std::to_string(K) + ": " + e.what());
    }

    std::vector<std::optional<MetricRow>> draws(config.rand_draws);
    parallel_for(config.rand_draws, config.jobs, [&](int d) {
      MetricRow row = proto;
      row.method = "rand";
      row.agent_seed = derive_seed(config.seed, static_cast<std::uint64_t>(K) * 1000003ULL + d);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        std::mt19937_64 rng(*row.agent_seed);
        const auto plan = random_plan(bank, K, rng);
        row.guarantee = K == 0 ? bm.v0 : evaluate_plan(c, plan, bank, prior, config.ccg).value;
        row.wall_ms = ms_since(t0);
        row.normalized = normalize(row.guarantee, bm.v0, bm.vfull, c);
        draws[d] = row;
      } catch (const Error& e) {
        fail("rand draw " + std::to_string(d) + " at K=" + std::to_string(K) + ": " + e.what());
      }
    });
    for (auto& d : draws)
      if (d) out.rows.push_back(*d);
  }
  return out;
}

ExperimentResult run_online_experiment(const ItemBank& bank, const PreferencePolyhedron& base,
                                       const OnlineExperimentConfig& config) {
  if (config.agents < 0) throw ValidationError("agent count must be >= 0");
  if (config.k_max < 0) throw ValidationError("K_max must be >= 0");
  budget_gamma({config.sigma_assumed, config.confidence}, 0);
  const Criterion c = config.criterion;
  const auto bm = benchmarks(c, bank, base);
  const auto shared = std::make_shared<const ItemBank>(bank);

  struct AgentOutcome {
    std::vector<MetricRow> rows;
    int escalations = 0;
    bool outside = false;
    std::string failure;
  };
  std::vector<AgentOutcome> per_agent(config.agents);

  parallel_for(config.agents, config.jobs, [&](int a) {
    auto& res = per_agent[a];
    const std::uint64_t seed = derive_seed(config.seed, a);
    const auto agent = sample_agent(bank.dim(), seed);
    double vfull = bm.vfull;
    if (config.per_agent_vfull && c == Criterion::Mmu) {
      vfull = -std::numeric_limits<double>::infinity();
      for (int r : bank.rec_ids()) vfull = std::max(vfull, dot(agent.u, bank.item(r)));
    }
    const NoiseConfig assumed{config.sigma_assumed, config.confidence};

    auto run = [&](const std::string& method, QueryPolicy policy, std::uint64_t stream) {
      OnlineOptions opts;
      opts.ccg = config.ccg;
      opts.policy = policy;
      opts.random_seed = derive_seed(seed, stream);
      Session s(shared, base, c, assumed, config.k_max, opts);
      std::mt19937_64 noise_rng(derive_seed(seed, stream + 1));
      for (int k = 0;; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto rec = s.current_recommendation();
        MetricRow row;
        row.method = method;
        row.criterion = c;
        row.K = k;
        row.sigma_true = config.sigma_true;
        row.sigma_assumed = config.sigma_assumed;
        row.agent_seed = seed;
        row.guarantee = rec.guarantee;
        row.normalized = normalize(rec.guarantee, bm.v0, vfull, c);
        row.true_rank = true_rank(rec.item, agent.u, bank);
        row.true_regret = true_regret(rec.item, agent.u, bank);
        if (k == config.k_max) {
          row.wall_ms = ms_since(t0);
          res.rows.push_back(row);
          break;
        }
        const Query q = s.next_query();
        s.record_response(simulate_response(agent, q, bank, config.sigma_true, noise_rng));
        row.wall_ms = ms_since(t0);
        res.rows.push_back(row);
      }
      res.escalations += static_cast<int>(s.escalations().size());
      if (policy == QueryPolicy::Lookahead) res.outside = !contains(bank, s.model_at(s.k()), agent.u);
    };
    try {
      run("online", QueryPolicy::Lookahead, 1);
      if (config.rand_baseline) run("rand", QueryPolicy::Random, 3);
    } catch (const Error& e) {
      res.failure = "agent " + std::to_string(a) + ": " + e.what();
    }
  });

  ExperimentResult out;
  for (auto& r : per_agent) {
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.escalations += r.escalations;
    out.outside_final_set += r.outside;
    if (!r.failure.empty()) {
      log_warning(r.failure);
      out.failures.push_back(r.failure);
    }
  }
  return out;
}

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "method,criterion,K,sigma_true,sigma_assumed,agent_seed,guarantee,normalized,true_rank,true_regret,wall_ms\n";
  for (const auto& r : rows) {
    out << r.method << ',' << to_string(r.criterion) << ',' << r.K << ',' << fmt_double(r.sigma_true) << ','
        << fmt_double(r.sigma_assumed) << ',' << (r.agent_seed ? std::to_string(*r.agent_seed) : "") << ','
        << fmt_double(r.guarantee) << ',' << fmt_double(r.normalized) << ','
        << (r.true_rank ? std::to_string(*r.true_rank) : "") << ','
        << (r.true_regret ? fmt_double(*r.true_regret) : "") << ',' << fmt_double(r.wall_ms) << '\n';
  }
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  std::map<std::tuple<std::string, int, int>, std::vector<const MetricRow*>> groups;
  for (const auto& r : rows) groups[{r.method, static_cast<int>(r.criterion), r.K}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    s.method = std::get<0>(key);
    s.criterion = static_cast<Criterion>(std::get<1>(key));
    s.K = std::get<2>(key);
    s.count = static_cast<int>(members.size());
    std::vector<double> norm;
    double rank = 0.0, regret = 0.0;
    int ranked = 0, regrets = 0;
    for (const auto* m : members) {
      norm.push_back(m->normalized);
      s.mean_wall_ms += m->wall_ms;
      if (m->true_rank) {
        rank += *m->true_rank;
        ++ranked;
      }
      if (m->true_regret) {
        regret += *m->true_regret;
        ++regrets;
      }
    }
    std::sort(norm.begin(), norm.end());
    const std::size_t n = norm.size();
    for (double v : norm) s.mean_normalized += v;
    s.mean_normalized /= static_cast<double>(n);
    s.median_normalized = n % 2 ? norm[n / 2] : 0.5 * (norm[n / 2 - 1] + norm[n / 2]);
    s.worst_normalized = s.criterion == Criterion::Mmu ? norm.front() : norm.back();
    s.mean_wall_ms /= static_cast<double>(n);
    if (ranked) s.mean_rank = rank / ranked;
    if (regrets) s.mean_regret = regret / regrets;
    out.push_back(s);
  }
  return out;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& summary) {
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-4s %3s %5s %10s %10s %10s %9s %10s %10s\n", "method", "crit", "K", "n",
                "mean_norm", "median", "worst", "mean_rank", "mean_regr", "wall_ms");
  out << line;
  for (const auto& s : summary) {
    char rank[16] = "-", regret[16] = "-";
    if (s.mean_rank) std::snprintf(rank, sizeof rank, "%.2f", *s.mean_rank);
    if (s.mean_regret) std::snprintf(regret, sizeof regret, "%.4f", *s.mean_regret);
    std::snprintf(line, sizeof line, "%-8s %-4s %3d %5d %10.4f %10.4f %10.4f %9s %10s %10.1f\n", s.method.c_str(),
                  to_string(s.criterion), s.K, s.count, s.mean_normalized, s.median_normalized, s.worst_normalized,
                  rank, regret, s.mean_wall_ms);
    out << line;
  }
}

}  // namespace elicit
