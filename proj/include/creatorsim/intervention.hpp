#pragma once

// Platform side: per-group weights, the three ways of deploying them (reward
// reweighting, temperature mapping, truncation mapping) and the adaptive
// multiplicative reweighting loop that drives them.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "creatorsim/dynamics.hpp"

namespace creatorsim {

struct GroupWeights {
  std::vector<double> w;
  double w_min = 0.2;
  double w_max = 5.0;

  int size() const { return static_cast<int>(w.size()); }
  static GroupWeights ones(int L, double w_min = 0.2, double w_max = 5.0);
  void validate() const;
};

// Multiplicative step, renormalize to sum L, then clip. Input is unchanged.
GroupWeights update_weights(const GroupWeights& weights, std::span<const double> pi_bar, double alpha);

// Piecewise-constant map: the first row with w < upper_bound wins; the last
// row's bound is +inf.
struct ThresholdTable {
  struct Row {
    double upper_bound;
    double value;
  };
  std::vector<Row> rows;

  double lookup(double w) const;
  void validate() const;
};

// CSV with header `weight_upper_bound,value`; the last bound is `inf`.
ThresholdTable read_threshold_table(const std::filesystem::path& path);
ThresholdTable parse_threshold_table(const std::string& text, const std::string& source = "<table>");
// The weight-to-percentile table used by the production truncation rollout.
ThresholdTable production_percentile_table();

enum class MechanismKind { None, UIR, SMT, HMT };

std::string to_string(MechanismKind kind);
MechanismKind mechanism_from_string(const std::string& name);

struct SmtMap {
  enum class Kind {
    Linear,  // beta(w) = beta * w
    Table,   // beta(w) = table(w)
  };
  Kind kind = Kind::Linear;
  ThresholdTable table;

  double operator()(double w, double base_beta) const;
};

struct HmtMap {
  enum class Kind {
    CeilScaled,       // K(w) = ceil(K * w)
    CountTable,       // K(w) = table(w)
    PercentileTable,  // K(w) = max(1, ceil((1 - table(w)) * n))
  };
  Kind kind = Kind::CeilScaled;
  ThresholdTable table;

  // Unclamped value; deploy() clamps to n.
  int operator()(double w, int base_K, int num_creators) const;
};

struct MechanismConfig {
  MechanismKind kind = MechanismKind::None;
  SmtMap smt_map;
  HmtMap hmt_map;
};

struct Deployment {
  MatchingPlan plan;
  int clamped_users = 0;  // users whose mapped K exceeded n
};

// Per-user plan for the next epoch. Weights are looked up through the
// population's group assignment.
Deployment deploy(const MechanismConfig& mechanism, const GroupWeights& weights,
                  const UserPopulation& population, const MatchingParams& base, int num_creators);

// Piecewise-constant alpha: phase k applies while epoch / total < until[k].
struct AlphaSchedule {
  struct Phase {
    double until_fraction;
    double alpha;
  };
  std::vector<Phase> phases;

  static AlphaSchedule constant(double alpha);
  // 0.5 for the first half of the epochs, 0.1 afterwards.
  static AlphaSchedule two_phase(double first = 0.5, double second = 0.1, double switch_fraction = 0.5);
  void validate() const;
};

double alpha_at(const AlphaSchedule& schedule, int epoch, int total_epochs);

enum class UtilityHook {
  ExpectedRelevance,   // exact expected sigma of the matched item
  SampledInteraction,  // sigma of one sampled match per user and round
};

struct ReweightConfig {
  int epochs = 600;
  int epoch_length = 5;
  AlphaSchedule alpha = AlphaSchedule::two_phase();
  double w_min = 0.2;
  double w_max = 5.0;
  UtilityHook utility_hook = UtilityHook::ExpectedRelevance;
  std::vector<double> initial_weights;  // empty: all ones
  bool full_fidelity = false;

  void validate(int num_groups) const;
};

// pi_bar_l over an epoch: mean over the M observed rounds and the members of
// group l. Each element of `per_step_utilities` is one round's per-user values.
double group_mean_utility(std::span<const std::vector<double>> per_step_utilities,
                          const UserPopulation& population, int group);

std::vector<double> group_mean_utilities(std::span<const std::vector<double>> per_step_utilities,
                                         const UserPopulation& population);

// Runs exactly `epochs` epochs of `epoch_length` LBR rounds each, updating the
// group weights between epochs and carrying strategies over.
SimulationTrace run_adaptive_reweighting(const EnvironmentSpec& env, const LbrConfig& dynamics,
                                         const ReweightConfig& reweight, const MechanismConfig& mechanism);

}  // namespace creatorsim
