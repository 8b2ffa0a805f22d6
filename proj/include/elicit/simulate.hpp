#pragma once

// Synthetic experiments: agents with hidden utilities answer queries with
// normal response shocks; plans and sessions are scored by normalized
// guarantees, rank and regret in hindsight.

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "elicit/model.hpp"
#include "elicit/offline.hpp"
#include "elicit/online.hpp"
#include "elicit/recommend.hpp"

namespace elicit {

struct SimAgent {
  Vector u;
  std::uint64_t seed = 0;
};

// u = g / |g| for standard normal g.
SimAgent sample_agent(int J, std::mt19937_64& rng);
SimAgent sample_agent(int J, std::uint64_t seed);

// +1 iff u.(x1 - x2) + delta >= 0 with delta ~ N(0, sigma).
int simulate_response(const SimAgent& agent, const Query& q, const ItemBank& bank, double sigma,
                      std::mt19937_64& rng);

// Mmu: (value - v0) / (vfull - v0). Mmr: value / v0 (1 = no information).
double normalize(double value, double v0, double vfull, Criterion c);

// K distinct queries drawn without replacement, sorted.
QueryPlan random_plan(const ItemBank& bank, int K, std::mt19937_64& rng);

// Items uniform on the sphere of the given radius.
ItemBank synthetic_bank(int I, int J, std::mt19937_64& rng, double radius = 10.0);

// Deterministic per-index seed derivation.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct Benchmarks {
  double v0 = 0.0;     // no-query guarantee
  double vfull = 0.0;  // full-information guarantee
};
Benchmarks benchmarks(Criterion c, const ItemBank& bank, const PreferencePolyhedron& base);

struct MetricRow {
  std::string method;
  Criterion criterion = Criterion::Mmu;
  int K = 0;
  double sigma_true = 0.0;
  double sigma_assumed = 0.0;
  std::optional<std::uint64_t> agent_seed;
  double guarantee = 0.0;
  double normalized = 0.0;
  std::optional<int> true_rank;
  std::optional<double> true_regret;
  double wall_ms = 0.0;
};

enum class OfflineMethod { Milp, Ccg, Greedy };
const char* to_string(OfflineMethod m);
OfflineMethod parse_method(const std::string& text);

struct OfflineExperimentConfig {
  Criterion criterion = Criterion::Mmu;
  std::vector<int> Ks{1};
  // Fixed budget; when unset the budget follows the schedule at each K.
  std::optional<double> gamma;
  NoiseConfig noise;
  OfflineMethod method = OfflineMethod::Ccg;
  int rand_draws = 50;
  std::uint64_t seed = 0;
  int jobs = 1;
  CcgOptions ccg;
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  int escalations = 0;
  // Online agents whose true u is not in their final uncertainty set.
  int outside_final_set = 0;
  std::vector<std::string> failures;
};

ExperimentResult run_offline_experiment(const ItemBank& bank, const PreferencePolyhedron& base,
                                        const OfflineExperimentConfig& config);

struct OnlineExperimentConfig {
  Criterion criterion = Criterion::Mmu;
  int agents = 50;
  int k_max = 10;
  double sigma_true = 0.0;
  double sigma_assumed = 0.0;
  double confidence = 0.9;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool rand_baseline = true;
  // Use max_x u.x of each agent as the full-information value (Mmu).
  bool per_agent_vfull = false;
  CcgOptions ccg;
};

// Rows per agent and k = 0..k_max, method "online" (and "rand").
ExperimentResult run_online_experiment(const ItemBank& bank, const PreferencePolyhedron& base,
                                       const OnlineExperimentConfig& config);

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows);

struct SummaryRow {
  std::string method;
  Criterion criterion = Criterion::Mmu;
  int K = 0;
  int count = 0;
  double mean_normalized = 0.0;
  double median_normalized = 0.0;
  double worst_normalized = 0.0;  // min for Mmu, max for Mmr
  std::optional<double> mean_rank;
  std::optional<double> mean_regret;
  double mean_wall_ms = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& summary);

}  // namespace elicit
