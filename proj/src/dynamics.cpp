#include "creatorsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace creatorsim {

void LbrConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("LBR step size eta must be > 0");
  if (rounds < 1) throw ValidationError("LBR rounds must be >= 1");
}

Projection project(const Vector& candidate, const StrategySet& set) {
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    if (candidate.size() != ball->center.size())
      throw DimensionError("project", ball->center.size(), candidate.size());
    const Vector offset = candidate - ball->center;
    const double r = offset.norm();
    if (r <= ball->radius) return {candidate, -1};
    return {ball->center + offset * (ball->radius / r), -1};
  }
  const auto& cat = std::get<CatalogSet>(set);
  if (!cat.items || cat.indices.empty()) throw ValidationError("project: empty catalog");
  if (candidate.size() != cat.items->rows()) throw DimensionError("project", cat.items->rows(), candidate.size());
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int p = 0; p < static_cast<int>(cat.indices.size()); ++p) {
    const double d2 = (cat.items->col(cat.indices[static_cast<std::size_t>(p)]) - candidate).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = p;
    }
  }
  return {cat.item(best), best};
}

Simulation::Simulation(const EnvironmentSpec& env, const LbrConfig& config)
    : env_(env), config_(config), rng_(config.rng_seed), creators_(env.creators) {
  env_.validate();
  config_.validate();
  const int m = env_.population.size();
  const int n = env_.num_creators();
  users_ = env_.population.embeddings;
  scores_.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    compute_scores(creators_[static_cast<std::size_t>(i)].strategy,
                   std::span<double>(scores_).subspan(static_cast<std::size_t>(i) * m, static_cast<std::size_t>(m)));
  }
  plan_ = MatchingPlan::uniform(m, env_.matching);
  user_weight_.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) user_weight_[static_cast<std::size_t>(j)] = env_.population.mass[j] * plan_.reward_scale[static_cast<std::size_t>(j)];
  cache_ = MatchingCache(m, n);
  cache_.rebuild(scores_, plan_.K, plan_.beta);
  scratch_.resize(static_cast<std::size_t>(m));
  scratch_final_.resize(static_cast<std::size_t>(m));
}

void Simulation::deploy(const MatchingPlan& plan) {
  if (plan.size() != env_.population.size())
    throw DimensionError("deploy plan", env_.population.size(), plan.size());
  const bool matching_changed = !plan.same_matching(plan_);
  plan_ = plan;
  for (std::size_t j = 0; j < user_weight_.size(); ++j) user_weight_[j] = env_.population.mass[static_cast<Eigen::Index>(j)] * plan_.reward_scale[j];
  if (matching_changed) cache_.rebuild(scores_, plan_.K, plan_.beta);
}

std::span<const double> Simulation::column(int creator) const {
  const auto m = static_cast<std::size_t>(env_.population.size());
  return std::span<const double>(scores_).subspan(static_cast<std::size_t>(creator) * m, m);
}

void Simulation::compute_scores(const Vector& s, std::span<double> out) const {
  Eigen::Map<Eigen::ArrayXd> dst(out.data(), static_cast<Eigen::Index>(out.size()));
  const int d = static_cast<int>(users_.rows());
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&env_.relevance)) {
    dst = (users_.row(0).array().transpose() - s[0]).square();
    for (int k = 1; k < d; ++k) dst += (users_.row(k).array().transpose() - s[k]).square();
    dst = (tld->c0 - dst.sqrt() / tld->c1).max(0.0);
    return;
  }
  const auto& dot = std::get<DotProduct>(env_.relevance);
  dst = users_.row(0).array().transpose() * s[0];
  for (int k = 1; k < d; ++k) dst += users_.row(k).array().transpose() * s[k];
  dst = (dst - dot.offset) / dot.scale;
}

void Simulation::utility_pair(int creator, std::span<const double> candidate, double& before,
                              double& after) const {
  cache_.utility_pair(creator, column(creator), candidate, user_weight_, env_.reward == RewardScheme::Engagement,
                     before, after);
}

void Simulation::commit(int creator, const Projection& target, std::span<const double> target_scores) {
  const auto m = static_cast<std::size_t>(env_.population.size());
  std::copy(target_scores.begin(), target_scores.end(), scores_.begin() + static_cast<std::ptrdiff_t>(creator * m));
  const auto col = column(creator);
  cache_.update_creator(creator, col, scores_);
  auto& state = creators_[static_cast<std::size_t>(creator)];
  state.strategy = target.point;
  state.catalog_position = target.catalog_position;
}

StepOutcome Simulation::lbr_step(int creator) {
  if (creator < 0 || creator >= env_.num_creators()) throw ValidationError("lbr_step: creator index out of range");
  const auto& state = creators_[static_cast<std::size_t>(creator)];
  const Vector direction = rng_.unit_direction(env_.population.dim());
  const Vector candidate = state.strategy + config_.eta * direction;
  const Projection target = project(candidate, state.strategy_set);
  // Catalog creators can only ever be evaluated at a catalog item.
  const bool at_projection = config_.acceptance_point == AcceptancePoint::PostProjection ||
                             std::holds_alternative<CatalogSet>(state.strategy_set);
  compute_scores(at_projection ? target.point : candidate, scratch_);

  double before = 0.0;
  double after = 0.0;
  utility_pair(creator, scratch_, before, after);
  StepOutcome outcome{after >= before, after > before};
  if (!outcome.accepted) return outcome;

  if (!at_projection && target.point != candidate) {
    compute_scores(target.point, scratch_final_);
    commit(creator, target, scratch_final_);
  } else {
    commit(creator, target, scratch_);
  }
  return outcome;
}

std::vector<StepOutcome> Simulation::run_round() {
  const auto order = rng_.permutation(env_.num_creators());
  std::vector<StepOutcome> outcomes(order.size());
  for (int i : order) outcomes[static_cast<std::size_t>(i)] = lbr_step(i);
  return outcomes;
}

double Simulation::creator_utility(int creator) const {
  double before = 0.0;
  double after = 0.0;
  utility_pair(creator, column(creator), before, after);
  return before;
}

double Simulation::welfare() const {
  double w = 0.0;
  for (int j = 0; j < env_.population.size(); ++j) w += env_.population.mass[j] * cache_.expected_score(j);
  return w;
}

std::vector<double> Simulation::user_utilities() const {
  std::vector<double> out(static_cast<std::size_t>(env_.population.size()));
  for (int j = 0; j < env_.population.size(); ++j) out[static_cast<std::size_t>(j)] = cache_.expected_score(j);
  return out;
}

std::vector<double> Simulation::sampled_user_utilities(std::mt19937_64& engine) const {
  const int m = env_.population.size();
  std::vector<double> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const int c = cache_.sample(j, engine);
    out[static_cast<std::size_t>(j)] = scores_[static_cast<std::size_t>(c) * m + j];
  }
  return out;
}

bool store_strategies_at(int step, int num_creators, bool full_fidelity) {
  return full_fidelity || num_creators <= 10 || step % 10 == 0;
}

std::vector<double> group_means(std::span<const double> user_values, const UserPopulation& population) {
  if (static_cast<int>(user_values.size()) != population.size())
    throw DimensionError("group_means", population.size(), static_cast<long>(user_values.size()));
  std::vector<double> sums(static_cast<std::size_t>(population.num_groups), 0.0);
  const auto sizes = population.group_sizes();
  for (int j = 0; j < population.size(); ++j) {
    sums[static_cast<std::size_t>(population.group_of[static_cast<std::size_t>(j)])] += user_values[static_cast<std::size_t>(j)];
  }
  for (std::size_t l = 0; l < sums.size(); ++l) {
    if (sizes[l] == 0) throw ValidationError("group_means: empty group " + std::to_string(l));
    sums[l] /= sizes[l];
  }
  return sums;
}

SimulationTrace simulate(const EnvironmentSpec& env, const LbrConfig& config, bool full_fidelity) {
  Simulation sim(env, config);
  SimulationTrace trace;
  const std::vector<double> unit(static_cast<std::size_t>(env.population.num_groups), 1.0);
  trace.records.reserve(static_cast<std::size_t>(config.rounds));
  for (int r = 0; r < config.rounds; ++r) {
    const auto outcomes = sim.run_round();
    StepRecord rec;
    rec.step = r;
    rec.epoch = 0;
    rec.welfare = sim.welfare();
    const auto utilities = sim.user_utilities();
    rec.group_utilities = group_means(utilities, env.population);
    rec.weights = unit;
    for (const auto& o : outcomes) {
      rec.accepted.push_back(o.accepted ? 1 : 0);
      rec.improved.push_back(o.improved ? 1 : 0);
    }
    if (store_strategies_at(r, env.num_creators(), full_fidelity)) {
      std::vector<Vector> s;
      for (const auto& c : sim.creators()) s.push_back(c.strategy);
      rec.strategies = std::move(s);
    }
    trace.records.push_back(std::move(rec));
  }
  trace.final_weights = unit;
  trace.final_creators = sim.creators();
  trace.final_user_utilities = sim.user_utilities();
  return trace;
}

bool detect_local_equilibrium(std::span<const StepRecord> records, int window) {
  if (window < 1) throw ValidationError("detect_local_equilibrium: window must be >= 1");
  if (records.empty()) throw ValidationError("detect_local_equilibrium: no rounds recorded");
  const std::size_t count = std::min(records.size(), static_cast<std::size_t>(window));
  for (std::size_t k = records.size() - count; k < records.size(); ++k) {
    for (auto flag : records[k].improved) {
      if (flag) return false;
    }
  }
  return true;
}

}  // namespace creatorsim
