#pragma once

// Local better response (LBR) dynamics: each creator tries one random
// direction of length eta and keeps it if its utility does not drop.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "creatorsim/environment.hpp"
#include "creatorsim/matching_cache.hpp"
#include "creatorsim/rng.hpp"

namespace creatorsim {

enum class AcceptancePoint {
  PreProjection,   // compare utility at s + eta g, then project
  PostProjection,  // compare utility at project(s + eta g)
};

struct LbrConfig {
  double eta = 0.2;
  std::uint64_t rng_seed = 0;
  AcceptancePoint acceptance_point = AcceptancePoint::PreProjection;
  int rounds = 1;

  void validate() const;
};

struct Projection {
  Vector point;
  int catalog_position = -1;
};

// Ball: radial scaling onto the boundary when outside. Catalog: nearest item
// by Euclidean distance, lowest catalog position on ties.
Projection project(const Vector& candidate, const StrategySet& set);

struct StepOutcome {
  bool accepted = false;
  bool improved = false;  // accepted with strictly higher utility
};

// One creator population playing LBR on a fixed instance. Creator utilities,
// welfare and user utilities all follow the deployed MatchingPlan.
class Simulation {
 public:
  Simulation(const EnvironmentSpec& env, const LbrConfig& config);

  // Swap the matching plan creators are rewarded under.
  void deploy(const MatchingPlan& plan);

  StepOutcome lbr_step(int creator);

  // One step per creator, in a fresh uniform random order.
  std::vector<StepOutcome> run_round();

  double creator_utility(int creator) const;
  double welfare() const;
  // Exact expected relevance for every user under the deployed matching.
  std::vector<double> user_utilities() const;
  // One sampled interaction per user under the deployed matching.
  std::vector<double> sampled_user_utilities(std::mt19937_64& engine) const;

  const std::vector<CreatorState>& creators() const { return creators_; }
  const EnvironmentSpec& environment() const { return env_; }
  const MatchingPlan& plan() const { return plan_; }
  const LbrConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  void compute_scores(const Vector& s, std::span<double> out) const;
  std::span<const double> column(int creator) const;
  void utility_pair(int creator, std::span<const double> candidate, double& before, double& after) const;
  void commit(int creator, const Projection& target, std::span<const double> target_scores);

  EnvironmentSpec env_;
  LbrConfig config_;
  Rng rng_;
  std::vector<CreatorState> creators_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> users_;  // d x m, row-major
  std::vector<double> scores_;  // creator-major n x m
  MatchingPlan plan_;
  std::vector<double> user_weight_;  // mass * reward scale
  MatchingCache cache_;
  mutable std::vector<double> scratch_;
  mutable std::vector<double> scratch_final_;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double welfare = 0.0;
  std::vector<double> group_utilities;
  std::vector<double> weights;
  std::vector<std::uint8_t> accepted;
  std::vector<std::uint8_t> improved;
  // Present on recorded rounds only.
  std::optional<std::vector<Vector>> strategies;
};

struct SimulationTrace {
  std::vector<StepRecord> records;
  std::vector<double> final_weights;
  std::vector<CreatorState> final_creators;
  std::vector<double> final_user_utilities;

  double final_welfare() const { return records.empty() ? 0.0 : records.back().welfare; }
};

// Strategies are stored every round for n <= 10, every 10th round otherwise,
// or every round when full_fidelity is set.
bool store_strategies_at(int step, int num_creators, bool full_fidelity);

// Per-group mean of per-user utilities.
std::vector<double> group_means(std::span<const double> user_values, const UserPopulation& population);

// Plain LBR for config.rounds rounds under the baseline matching.
SimulationTrace simulate(const EnvironmentSpec& env, const LbrConfig& config, bool full_fidelity = false);

// Approximate LNE test: true iff no creator made a strictly improving move in
// the last `window` records. A window longer than the trace covers all of it.
bool detect_local_equilibrium(std::span<const StepRecord> records, int window = 50);

}  // namespace creatorsim
