#include "creatorsim/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace creatorsim {

std::vector<int> UserPopulation::group_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_groups), 0);
  for (int g : group_of) {
    if (g >= 0 && g < num_groups) ++sizes[static_cast<std::size_t>(g)];
  }
  return sizes;
}

void UserPopulation::validate() const {
  if (size() < 1 || dim() < 1) throw ValidationError("population needs m >= 1 users of dimension d >= 1");
  if (static_cast<int>(group_of.size()) != size())
    throw DimensionError("population group_of", size(), static_cast<long>(group_of.size()));
  if (mass.size() != size()) throw DimensionError("population mass", size(), mass.size());
  if (num_groups < 1) throw ValidationError("population needs at least one group");
  for (int g : group_of) {
    if (g < 0 || g >= num_groups)
      throw ValidationError("group index " + std::to_string(g) + " outside [0, " +
                            std::to_string(num_groups) + ")");
  }
  for (int s : group_sizes()) {
    if (s == 0) throw ValidationError("population has an empty group");
  }
  if ((mass.array() < 0.0).any()) throw ValidationError("population mass must be nonnegative");
  if (std::abs(mass.sum() - 1.0) > 1e-12) throw ValidationError("population mass must sum to 1");
  if (!embeddings.allFinite()) throw ValidationError("population embeddings must be finite");
}

UserPopulation UserPopulation::uniform(Matrix embeddings) {
  UserPopulation pop;
  const auto m = embeddings.cols();
  pop.embeddings = std::move(embeddings);
  pop.group_of.assign(static_cast<std::size_t>(m), 0);
  pop.num_groups = 1;
  pop.mass = Vector::Constant(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
  return pop;
}

int strategy_set_dim(const StrategySet& set) {
  if (const auto* ball = std::get_if<BallSet>(&set)) return static_cast<int>(ball->center.size());
  const auto& cat = std::get<CatalogSet>(set);
  return cat.items ? static_cast<int>(cat.items->rows()) : 0;
}

void validate_strategy_set(const StrategySet& set, int dim) {
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    if (!(ball->radius > 0.0)) throw ValidationError("ball strategy set needs radius > 0");
    if (ball->center.size() != dim) throw DimensionError("ball center", dim, ball->center.size());
    return;
  }
  const auto& cat = std::get<CatalogSet>(set);
  if (!cat.items) throw ValidationError("catalog strategy set has no item table");
  if (cat.items->rows() != dim) throw DimensionError("catalog items", dim, cat.items->rows());
  if (cat.indices.empty()) throw ValidationError("catalog strategy set is empty");
  for (int idx : cat.indices) {
    if (idx < 0 || idx >= cat.items->cols())
      throw ValidationError("catalog index " + std::to_string(idx) + " out of range");
  }
  if (cat.shared_count < 0 || cat.shared_count > static_cast<int>(cat.indices.size()))
    throw ValidationError("catalog shared_count out of range");
}

bool is_member(const CreatorState& creator) {
  if (const auto* ball = std::get_if<BallSet>(&creator.strategy_set)) {
    if (creator.strategy.size() != ball->center.size()) return false;
    return (creator.strategy - ball->center).norm() <= ball->radius + 1e-9;
  }
  const auto& cat = std::get<CatalogSet>(creator.strategy_set);
  if (creator.catalog_position < 0 || creator.catalog_position >= static_cast<int>(cat.indices.size()))
    return false;
  return creator.strategy == cat.item(creator.catalog_position);
}

void validate_relevance_model(const RelevanceModel& model) {
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&model)) {
    if (!(tld->c1 > 0.0) || !std::isfinite(tld->c0))
      throw ValidationError("truncated linear distance needs finite c0 and c1 > 0");
    return;
  }
  const auto& dot = std::get<DotProduct>(model);
  if (!(dot.scale > 0.0) || !std::isfinite(dot.offset))
    throw ValidationError("dot product relevance needs finite offset and scale > 0");
}

void validate_matching(const MatchingParams& params, int num_creators) {
  if (params.K < 1 || params.K > num_creators)
    throw ValidationError("matching K=" + std::to_string(params.K) + " must lie in [1, " +
                          std::to_string(num_creators) + "]");
  if (!(params.beta >= 0.0)) throw ValidationError("matching beta must be >= 0");
}

bool MatchingPlan::same_matching(const MatchingPlan& other) const {
  return K == other.K && beta == other.beta;
}

MatchingPlan MatchingPlan::uniform(int num_users, const MatchingParams& params) {
  const auto m = static_cast<std::size_t>(num_users);
  return MatchingPlan{std::vector<double>(m, 1.0), std::vector<double>(m, params.beta),
                      std::vector<int>(m, params.K)};
}

double relevance(const RelevanceModel& model, const Vector& s, const Vector& x) {
  if (s.size() != x.size()) throw DimensionError("relevance", s.size(), x.size());
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&model)) {
    return std::max(tld->c0 - (s - x).norm() / tld->c1, 0.0);
  }
  const auto& dot = std::get<DotProduct>(model);
  return (s.dot(x) - dot.offset) / dot.scale;
}

void relevance_to_users(const RelevanceModel& model, const Vector& s, const Matrix& users,
                        std::span<double> out) {
  if (s.size() != users.rows()) throw DimensionError("relevance", users.rows(), s.size());
  if (static_cast<long>(out.size()) != users.cols())
    throw DimensionError("relevance output", users.cols(), static_cast<long>(out.size()));
  Eigen::Map<Vector> dst(out.data(), static_cast<Eigen::Index>(out.size()));
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&model)) {
    dst = (tld->c0 - (users.colwise() - s).colwise().norm().array() / tld->c1).max(0.0).transpose();
    return;
  }
  const auto& dot = std::get<DotProduct>(model);
  dst = ((users.transpose() * s).array() - dot.offset) / dot.scale;
}

std::vector<int> top_k_set(std::span<const double> scores, int K) {
  const int n = static_cast<int>(scores.size());
  if (K < 1 || K > n)
    throw ValidationError("top_k_set: K=" + std::to_string(K) + " must lie in [1, " + std::to_string(n) + "]");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto before = [&](int a, int b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + K, order.end(), before);
  order.resize(static_cast<std::size_t>(K));
  return order;
}

std::vector<double> match_distribution(std::span<const double> scores, const MatchingParams& params) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("match_distribution: non-finite score");
  }
  if (!(params.beta >= 0.0)) throw ValidationError("match_distribution: beta must be >= 0");
  std::vector<double> p(scores.size(), 0.0);
  if (params.beta == 0.0) {
    p[static_cast<std::size_t>(top_k_set(scores, 1).front())] = 1.0;
    return p;
  }
  const auto top = top_k_set(scores, params.K);
  if (params.beta == MatchingParams::kUniformLimit) {
    for (int i : top) p[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(top.size());
    return p;
  }
  const double shift = scores[static_cast<std::size_t>(top.front())];
  double z = 0.0;
  for (int i : top) {
    const double e = std::exp((scores[static_cast<std::size_t>(i)] - shift) / params.beta);
    p[static_cast<std::size_t>(i)] = e;
    z += e;
  }
  for (int i : top) p[static_cast<std::size_t>(i)] /= z;
  return p;
}

std::vector<double> creator_scores(std::span<const CreatorState> creators, const Vector& x,
                                   const RelevanceModel& model) {
  std::vector<double> scores;
  scores.reserve(creators.size());
  for (const auto& c : creators) scores.push_back(relevance(model, c.strategy, x));
  return scores;
}

double user_expected_utility(std::span<const CreatorState> creators, const Vector& x,
                             const RelevanceModel& model, const MatchingParams& params) {
  const auto scores = creator_scores(creators, x, model);
  const auto p = match_distribution(scores, params);
  double u = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) u += scores[i] * p[i];
  return u;
}

double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, const MatchingParams& params) {
  double w = 0.0;
  for (int j = 0; j < population.size(); ++j) {
    w += population.mass[j] *
         user_expected_utility(creators, population.embeddings.col(j), model, params);
  }
  return w;
}

double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, const MatchingPlan& plan) {
  if (plan.size() != population.size()) throw DimensionError("welfare plan", population.size(), plan.size());
  const int n = static_cast<int>(creators.size());
  double w = 0.0;
  for (int j = 0; j < population.size(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    const MatchingParams params{std::min(plan.K[sj], n), plan.beta[sj]};
    w += population.mass[j] * user_expected_utility(creators, population.embeddings.col(j), model, params);
  }
  return w;
}

double creator_utility(int i, std::span<const CreatorState> creators,
                       const UserPopulation& population, const RelevanceModel& model,
                       RewardScheme reward, const MatchingPlan& plan) {
  const int n = static_cast<int>(creators.size());
  if (i < 0 || i >= n) throw ValidationError("creator_utility: creator index out of range");
  if (plan.size() != population.size())
    throw DimensionError("creator_utility plan", population.size(), plan.size());
  double u = 0.0;
  for (int j = 0; j < population.size(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    const auto scores = creator_scores(creators, population.embeddings.col(j), model);
    const MatchingParams params{std::min(plan.K[sj], n), plan.beta[sj]};
    const auto p = match_distribution(scores, params);
    const double r = reward == RewardScheme::Engagement ? scores[static_cast<std::size_t>(i)] : 1.0;
    u += population.mass[j] * plan.reward_scale[sj] * r * p[static_cast<std::size_t>(i)];
  }
  return u;
}

double creator_utility(int i, std::span<const CreatorState> creators,
                       const UserPopulation& population, const RelevanceModel& model,
                       const MatchingParams& params, RewardScheme reward) {
  return creator_utility(i, creators, population, model, reward,
                         MatchingPlan::uniform(population.size(), params));
}

}  // namespace creatorsim
