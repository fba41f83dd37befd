#pragma once

// Data model and closed-form quantities of the creator competition game:
// relevance, top-K softmax matching, user welfare and creator utility.
//
// Everything here is a pure function of its inputs and evaluates expectations
// exactly over the finite user support. The dynamics engine keeps an
// incremental version of the same computation (see matching_cache.hpp).

#include <limits>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "creatorsim/common.hpp"

namespace creatorsim {

// Finite user support. Column j of `embeddings` is user j.
struct UserPopulation {
  Matrix embeddings;         // d x m
  std::vector<int> group_of; // user -> group in [0, num_groups)
  int num_groups = 1;
  Vector mass;               // per-user probability, sums to 1

  int dim() const { return static_cast<int>(embeddings.rows()); }
  int size() const { return static_cast<int>(embeddings.cols()); }
  std::vector<int> group_sizes() const;

  // Throws ValidationError on any broken invariant.
  void validate() const;

  // Uniform mass, every user in group 0.
  static UserPopulation uniform(Matrix embeddings);
};

struct BallSet {
  double radius = 1.0;
  Vector center;
};

// Discrete action set: indices into a shared item table (d x N). The first
// `shared_count` indices are common to every creator, the rest are private.
struct CatalogSet {
  std::shared_ptr<const Matrix> items;
  std::vector<int> indices;
  int shared_count = 0;

  Vector item(int position) const { return items->col(indices.at(static_cast<std::size_t>(position))); }
};

using StrategySet = std::variant<BallSet, CatalogSet>;

void validate_strategy_set(const StrategySet& set, int dim);
int strategy_set_dim(const StrategySet& set);

struct CreatorState {
  Vector strategy;
  StrategySet strategy_set;
  // Position inside CatalogSet::indices for catalog creators, -1 otherwise.
  int catalog_position = -1;
};

// Membership check: within 1e-9 of the ball, exact item equality for catalogs.
bool is_member(const CreatorState& creator);

// max{c0 - ||s - x|| / c1, 0}
struct TruncatedLinearDistance {
  double c0 = 1.0;
  double c1 = 1.0;
};

// (s'x - offset) / scale
struct DotProduct {
  double offset = 0.0;
  double scale = 1.0;
};

using RelevanceModel = std::variant<TruncatedLinearDistance, DotProduct>;

void validate_relevance_model(const RelevanceModel& model);

struct MatchingParams {
  // beta == kUniformLimit selects uniform matching over the top-K.
  static constexpr double kUniformLimit = std::numeric_limits<double>::infinity();

  int K = 1;
  double beta = 0.0;  // 0 is the deterministic argmax limit
};

void validate_matching(const MatchingParams& params, int num_creators);

enum class RewardScheme { Engagement, Traffic };

// Per-user matching and post-matching reward adjustment. A deployed
// intervention mechanism is expressed entirely through one of these.
struct MatchingPlan {
  std::vector<double> reward_scale;  // multiplies R(s_i, x); UIR weights
  std::vector<double> beta;          // per-user temperature
  std::vector<int> K;                // per-user truncation level

  int size() const { return static_cast<int>(K.size()); }
  bool same_matching(const MatchingPlan& other) const;

  static MatchingPlan uniform(int num_users, const MatchingParams& params);
};

double relevance(const RelevanceModel& model, const Vector& s, const Vector& x);

// Scores of one strategy against every user, written to `out` (length m).
void relevance_to_users(const RelevanceModel& model, const Vector& s, const Matrix& users,
                        std::span<double> out);

// Indices of the K largest scores, descending; ties go to the lower index.
std::vector<int> top_k_set(std::span<const double> scores, int K);

// Softmax over the top-K with temperature beta, zero elsewhere.
std::vector<double> match_distribution(std::span<const double> scores, const MatchingParams& params);

// Scores of every creator for user x.
std::vector<double> creator_scores(std::span<const CreatorState> creators, const Vector& x,
                                   const RelevanceModel& model);

// sum_i sigma(s_i, x) P_i(s, x)
double user_expected_utility(std::span<const CreatorState> creators, const Vector& x,
                             const RelevanceModel& model, const MatchingParams& params);

// Mass-weighted mean of user_expected_utility over the population.
double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, const MatchingParams& params);

// Welfare under a per-user matching; reward_scale is ignored.
double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, const MatchingPlan& plan);

// E_x[reward_scale(x) R(s_i, x) P_i(s, x; beta(x), K(x))].
double creator_utility(int i, std::span<const CreatorState> creators,
                       const UserPopulation& population, const RelevanceModel& model,
                       RewardScheme reward, const MatchingPlan& plan);

// Baseline form with a single (beta, K) for everyone.
double creator_utility(int i, std::span<const CreatorState> creators,
                       const UserPopulation& population, const RelevanceModel& model,
                       const MatchingParams& params, RewardScheme reward);

}  // namespace creatorsim
