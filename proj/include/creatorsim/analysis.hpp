#pragma once

// Numerical checks of the game's theory plus experiment metrics:
//  - the second-order monotonicity condition E[d2 sigma + grad grad'] <= 0,
//  - finite-difference welfare response to a group-weight bump,
//  - brute-force oracles for matching / welfare / utilities on tiny instances,
//  - summary statistics over simulation traces.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creatorsim/intervention.hpp"

namespace creatorsim {

inline constexpr int kReportSchemaVersion = 1;

// sigma(., x) with analytic first and second derivatives in s.
struct RelevanceDerivatives {
  std::function<double(const Vector&, const Vector&)> value;
  std::function<Vector(const Vector&, const Vector&)> gradient;
  std::function<Matrix(const Vector&, const Vector&)> hessian;
  // False at kinks, where the derivatives above are not defined.
  std::function<bool(const Vector&, const Vector&)> smooth_at;
};

// Kinks of the truncated linear model (zero distance and the truncation
// radius) are excluded within this radius.
inline constexpr double kKinkExclusion = 1e-6;

RelevanceDerivatives derivatives_of(const RelevanceModel& model);

// sigma = c - ||s - x||^2 / 2, a smooth concave test model.
RelevanceDerivatives quadratic_relevance(double c);

// Central differences of value() in s.
Vector numeric_gradient(const RelevanceDerivatives& model, const Vector& s, const Vector& x, double h = 1e-6);

struct MonotoneCheckReport {
  std::vector<double> max_eigenvalues;  // one per evaluated sample point
  std::vector<int> evaluated;           // sample indices behind max_eigenvalues
  std::vector<int> skipped;             // sample indices hitting a kink
  bool holds = false;
  double tolerance = 0.0;
};

// Evaluates E_x[d2 sigma/ds2 + grad grad'] exactly over the population at
// each sample strategy and reports its largest eigenvalue.
MonotoneCheckReport check_monotone_condition(const UserPopulation& population, const RelevanceDerivatives& model,
                                             std::span<const Vector> sample_points, double tolerance);

nlohmann::json to_json(const MonotoneCheckReport& report);
MonotoneCheckReport monotone_report_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------

struct WeightGradientEntry {
  int group = 0;
  double delta = 0.0;
  double pi_bar = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> delta_welfare;  // W_perturbed - W_baseline per paired seed
  double mean_delta_welfare = 0.0;
  double fraction_nonnegative = 0.0;
};

struct GradientCheckReport {
  std::vector<WeightGradientEntry> entries;
  std::vector<double> weights;
  std::vector<double> pi_bar;
  // Spearman correlation between measured responses and -pi_bar.
  double rank_agreement = 0.0;
  bool baseline_converged = false;
  std::vector<std::string> notes;
};

struct WeightGradientOptions {
  double delta = 0.1;
  int settle_rounds = 200;
  LbrConfig dynamics;
  MechanismConfig mechanism{MechanismKind::UIR, {}, {}};
};

// Re-runs the dynamics from `env`'s creator profile with weights w and
// w + delta e_group under identical seeds; records the final welfare gap.
WeightGradientEntry finite_diff_weight_gradient(const EnvironmentSpec& env, std::span<const double> weights,
                                                int group, std::span<const std::uint64_t> seeds,
                                                const WeightGradientOptions& options);

struct GradientCheckOptions {
  WeightGradientOptions perturbation;
  ReweightConfig baseline;  // run before perturbing; its final state is the start point
  int lne_window = 50;
  std::vector<std::uint64_t> seeds;
};

// Baseline reweighting run, then one finite-difference entry per group.
GradientCheckReport check_weight_gradient(const EnvironmentSpec& env, const GradientCheckOptions& options);

nlohmann::json to_json(const GradientCheckReport& report);
GradientCheckReport gradient_report_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Brute-force oracles. These deliberately share no code with game.cpp or the
// matching cache: full sort, explicit softmax in long double, double loops.

namespace oracle {

std::vector<double> match_distribution(std::span<const double> scores, int K, double beta);
double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, int K, double beta);
// Per-user weights w_j (not group weights) and the default mappings.
double creator_utility(int i, std::span<const CreatorState> creators, const UserPopulation& population,
                       const RelevanceModel& model, int K, double beta, RewardScheme reward,
                       MechanismKind mechanism, std::span<const double> user_weights);

}  // namespace oracle

struct OracleReport {
  double max_abs_deviation = 0.0;
  int comparisons = 0;
};

// Compares game-core, the dynamics engine and the oracle on one small
// instance (n <= 6, m <= 6) under every mechanism with the given weights.
OracleReport brute_force_oracles(const EnvironmentSpec& env, const GroupWeights& weights);

// ---------------------------------------------------------------------------

// Average ranks (ties share the mean rank), then Pearson. Zero variance on
// either side gives 0.
double spearman(std::span<const double> a, std::span<const double> b);
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct PairedTest {
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;  // one-sided, H1: treatment > baseline
  int pairs = 0;
};

PairedTest paired_t_test(std::span<const double> treatment, std::span<const double> baseline);

// |W(t2) - W(t1)| / |W(t1)| where t = ceil(fraction * T) - 1.
double welfare_relative_change(const SimulationTrace& trace, double from_fraction, double to_fraction);

// Mean weight seen by the users of each true cluster.
std::vector<double> weight_by_label(const UserPopulation& population, std::span<const int> labels,
                                    std::span<const double> group_weights, int num_labels);

struct ExperimentMetrics {
  std::vector<int> steps;
  std::vector<double> welfare_curve;
  std::vector<double> final_group_utilities;
  std::vector<double> final_weights;
  std::vector<int> group_sizes;
  double weight_size_spearman = 0.0;
  double utility_size_spearman = 0.0;
  // Same correlations against the generator's clusters, when labels exist.
  std::vector<int> true_cluster_sizes;
  std::vector<double> true_cluster_weights;
  std::vector<double> true_cluster_utilities;
  double true_weight_size_spearman = 0.0;
  double true_utility_size_spearman = 0.0;
  double plateau_relative_change = 0.0;
  bool plateaued = false;
};

ExperimentMetrics experiment_metrics(const SimulationTrace& trace, const EnvironmentSpec& env,
                                     double plateau_from = 1.0 / 3.0, double plateau_threshold = 0.02);

nlohmann::json to_json(const ExperimentMetrics& metrics);
ExperimentMetrics metrics_from_json(const nlohmann::json& doc);
// step,welfare rows.
std::string welfare_curve_csv(const ExperimentMetrics& metrics);

}  // namespace creatorsim
