#include "creatorsim/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "creatorsim/io.hpp"

namespace creatorsim {

GroupWeights GroupWeights::ones(int L, double w_min, double w_max) {
  return GroupWeights{std::vector<double>(static_cast<std::size_t>(L), 1.0), w_min, w_max};
}

void GroupWeights::validate() const {
  if (w.empty()) throw ValidationError("group weights are empty");
  if (!(w_min > 0.0) || !(w_max >= w_min)) throw ValidationError("group weights need 0 < w_min <= w_max");
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("group weights must be positive and finite");
  }
}

GroupWeights update_weights(const GroupWeights& weights, std::span<const double> pi_bar, double alpha) {
  if (pi_bar.size() != weights.w.size())
    throw DimensionError("update_weights pi_bar", weights.size(), static_cast<long>(pi_bar.size()));
  for (double p : pi_bar) {
    if (!std::isfinite(p)) throw ValidationError("update_weights: non-finite group utility");
  }
  if (!std::isfinite(alpha)) throw ValidationError("update_weights: non-finite alpha");
  const std::size_t L = weights.w.size();
  GroupWeights next = weights;
  // Shift the exponent by its max so the largest factor is exp(0); the shift
  // cancels in the normalization.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < L; ++l) shift = std::max(shift, -alpha * pi_bar[l]);
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    next.w[l] = weights.w[l] * std::exp(-alpha * pi_bar[l] - shift);
    total += next.w[l];
  }
  for (std::size_t l = 0; l < L; ++l) {
    next.w[l] = static_cast<double>(L) * next.w[l] / total;
    next.w[l] = std::clamp(next.w[l], weights.w_min, weights.w_max);
  }
  return next;
}

double ThresholdTable::lookup(double w) const {
  for (const auto& row : rows) {
    if (w < row.upper_bound) return row.value;
  }
  return rows.back().value;
}

void ThresholdTable::validate() const {
  if (rows.empty()) throw ValidationError("threshold table is empty");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (!(rows[k].upper_bound > rows[k - 1].upper_bound))
      throw ValidationError("threshold table bounds must be strictly increasing");
  }
  if (rows.back().upper_bound != std::numeric_limits<double>::infinity())
    throw ValidationError("threshold table must end with an inf bound");
}

ThresholdTable parse_threshold_table(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  ThresholdTable table;
  bool header = false;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
  };
  auto number = [&](const std::string& cell, bool allow_inf) {
    const auto t = trim(cell);
    if (allow_inf && (t == "inf" || t == "+inf" || t == "Inf")) return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ParseError(source, lineno, "bad number '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) throw ParseError(source, lineno, "bad number '" + t + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError(source, lineno, "expected two columns");
    if (!header) {
      if (trim(line.substr(0, comma)) != "weight_upper_bound" || trim(line.substr(comma + 1)) != "value")
        throw ParseError(source, lineno, "header must be weight_upper_bound,value");
      header = true;
      continue;
    }
    table.rows.push_back({number(line.substr(0, comma), true), number(line.substr(comma + 1), false)});
  }
  if (!header) throw ParseError(source, 0, "missing header");
  try {
    table.validate();
  } catch (const ValidationError& e) {
    throw ParseError(source, lineno, e.what());
  }
  return table;
}

ThresholdTable read_threshold_table(const std::filesystem::path& path) {
  return parse_threshold_table(read_text_file(path), path.string());
}

ThresholdTable production_percentile_table() {
  const double inf = std::numeric_limits<double>::infinity();
  return ThresholdTable{{{1.0, 0.99}, {1.19, 0.95}, {1.79, 0.90}, {2.13, 0.85}, {2.36, 0.75}, {2.68, 0.7}, {inf, 0.1}}};
}

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::None: return "none";
    case MechanismKind::UIR: return "uir";
    case MechanismKind::SMT: return "smt";
    case MechanismKind::HMT: return "hmt";
  }
  return "none";
}

MechanismKind mechanism_from_string(const std::string& name) {
  if (name == "none") return MechanismKind::None;
  if (name == "uir") return MechanismKind::UIR;
  if (name == "smt") return MechanismKind::SMT;
  if (name == "hmt") return MechanismKind::HMT;
  throw ValidationError("unknown mechanism '" + name + "' (expected none, uir, smt or hmt)");
}

double SmtMap::operator()(double w, double base_beta) const {
  const double beta = kind == Kind::Linear ? base_beta * w : table.lookup(w);
  if (!(beta >= 0.0)) throw ValidationError("SMT mapping produced a negative temperature");
  return beta;
}

namespace {

// ceil that ignores representation error, so (1 - 0.85) * 200 gives 30.
double ceil_exact(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : std::ceil(x);
}

}  // namespace

int HmtMap::operator()(double w, int base_K, int num_creators) const {
  double k = 0.0;
  switch (kind) {
    case Kind::CeilScaled: k = ceil_exact(base_K * w); break;
    case Kind::CountTable: k = ceil_exact(table.lookup(w)); break;
    case Kind::PercentileTable: k = ceil_exact((1.0 - table.lookup(w)) * num_creators); break;
  }
  k = std::max(k, 1.0);
  if (!std::isfinite(k)) throw ValidationError("HMT mapping produced a non-finite K");
  return static_cast<int>(std::min(k, static_cast<double>(std::numeric_limits<int>::max())));
}

Deployment deploy(const MechanismConfig& mechanism, const GroupWeights& weights,
                  const UserPopulation& population, const MatchingParams& base, int num_creators) {
  if (weights.size() != population.num_groups)
    throw DimensionError("deploy weights", population.num_groups, weights.size());
  const int m = population.size();
  Deployment out{MatchingPlan::uniform(m, base), 0};
  if (mechanism.kind == MechanismKind::None) return out;
  for (int j = 0; j < m; ++j) {
    const auto sj = static_cast<std::size_t>(j);
    const double w = weights.w[static_cast<std::size_t>(population.group_of[sj])];
    switch (mechanism.kind) {
      case MechanismKind::UIR: out.plan.reward_scale[sj] = w; break;
      case MechanismKind::SMT: out.plan.beta[sj] = mechanism.smt_map(w, base.beta); break;
      case MechanismKind::HMT: {
        const int k = mechanism.hmt_map(w, base.K, num_creators);
        if (k > num_creators) ++out.clamped_users;
        out.plan.K[sj] = std::min(k, num_creators);
        break;
      }
      case MechanismKind::None: break;
    }
  }
  return out;
}

AlphaSchedule AlphaSchedule::constant(double alpha) { return AlphaSchedule{{{1.0, alpha}}}; }

AlphaSchedule AlphaSchedule::two_phase(double first, double second, double switch_fraction) {
  return AlphaSchedule{{{switch_fraction, first}, {1.0, second}}};
}

void AlphaSchedule::validate() const {
  if (phases.empty()) throw ValidationError("alpha schedule is empty");
  for (std::size_t k = 0; k < phases.size(); ++k) {
    if (!(phases[k].alpha >= 0.0) || !std::isfinite(phases[k].alpha))
      throw ValidationError("alpha values must be finite and >= 0");
    if (k > 0 && !(phases[k].until_fraction > phases[k - 1].until_fraction))
      throw ValidationError("alpha schedule phases must be increasing");
  }
}

double alpha_at(const AlphaSchedule& schedule, int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs)
    throw ValidationError("alpha_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  const double fraction = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  for (const auto& phase : schedule.phases) {
    if (fraction < phase.until_fraction) return phase.alpha;
  }
  return schedule.phases.back().alpha;
}

void ReweightConfig::validate(int num_groups) const {
  if (epochs < 1 || epoch_length < 1) throw ValidationError("reweighting needs epochs >= 1 and epoch_length >= 1");
  alpha.validate();
  if (!(w_min > 0.0) || !(w_max >= w_min)) throw ValidationError("reweighting needs 0 < w_min <= w_max");
  if (!initial_weights.empty() && static_cast<int>(initial_weights.size()) != num_groups)
    throw DimensionError("initial weights", num_groups, static_cast<long>(initial_weights.size()));
}

double group_mean_utility(std::span<const std::vector<double>> per_step_utilities,
                          const UserPopulation& population, int group) {
  if (per_step_utilities.empty()) throw ValidationError("group_mean_utility: empty trace slice");
  if (group < 0 || group >= population.num_groups) throw ValidationError("group_mean_utility: group out of range");
  double sum = 0.0;
  int members = 0;
  for (int j = 0; j < population.size(); ++j) {
    if (population.group_of[static_cast<std::size_t>(j)] != group) continue;
    ++members;
    for (const auto& step : per_step_utilities) sum += step[static_cast<std::size_t>(j)];
  }
  if (members == 0) throw ValidationError("group_mean_utility: empty group");
  return sum / (static_cast<double>(members) * static_cast<double>(per_step_utilities.size()));
}

std::vector<double> group_mean_utilities(std::span<const std::vector<double>> per_step_utilities,
                                         const UserPopulation& population) {
  if (per_step_utilities.empty()) throw ValidationError("group_mean_utility: empty trace slice");
  std::vector<double> sums(static_cast<std::size_t>(population.num_groups), 0.0);
  for (const auto& step : per_step_utilities) {
    if (static_cast<int>(step.size()) != population.size())
      throw DimensionError("group_mean_utility step", population.size(), static_cast<long>(step.size()));
    for (int j = 0; j < population.size(); ++j) {
      sums[static_cast<std::size_t>(population.group_of[static_cast<std::size_t>(j)])] += step[static_cast<std::size_t>(j)];
    }
  }
  const auto sizes = population.group_sizes();
  for (std::size_t l = 0; l < sums.size(); ++l) {
    if (sizes[l] == 0) throw ValidationError("group_mean_utility: empty group");
    sums[l] /= static_cast<double>(sizes[l]) * static_cast<double>(per_step_utilities.size());
  }
  return sums;
}

SimulationTrace run_adaptive_reweighting(const EnvironmentSpec& env, const LbrConfig& dynamics,
                                         const ReweightConfig& reweight, const MechanismConfig& mechanism) {
  const auto& population = env.population;
  reweight.validate(population.num_groups);
  Simulation sim(env, dynamics);
  std::mt19937_64 hook_engine(derive_seed(dynamics.rng_seed, "utility-hook"));

  GroupWeights weights = reweight.initial_weights.empty()
                             ? GroupWeights::ones(population.num_groups, reweight.w_min, reweight.w_max)
                             : GroupWeights{reweight.initial_weights, reweight.w_min, reweight.w_max};
  weights.validate();

  SimulationTrace trace;
  trace.records.reserve(static_cast<std::size_t>(reweight.epochs) * static_cast<std::size_t>(reweight.epoch_length));
  std::vector<std::vector<double>> epoch_utilities;
  bool warned_clamp = false;
  for (int e = 0; e < reweight.epochs; ++e) {
    const auto deployment = deploy(mechanism, weights, population, env.matching, env.num_creators());
    if (deployment.clamped_users > 0 && !warned_clamp) {
      std::clog << "warning: HMT mapping exceeded n=" << env.num_creators() << " for " << deployment.clamped_users
                << " users in epoch " << e << "; clamped to n\n";
      warned_clamp = true;
    }
    sim.deploy(deployment.plan);
    epoch_utilities.clear();
    for (int r = 0; r < reweight.epoch_length; ++r) {
      const int step = e * reweight.epoch_length + r;
      const auto outcomes = sim.run_round();
      auto utilities = sim.user_utilities();
      StepRecord rec;
      rec.step = step;
      rec.epoch = e;
      rec.welfare = sim.welfare();
      rec.group_utilities = group_means(utilities, population);
      rec.weights = weights.w;
      for (const auto& o : outcomes) {
        rec.accepted.push_back(o.accepted ? 1 : 0);
        rec.improved.push_back(o.improved ? 1 : 0);
      }
      if (store_strategies_at(step, env.num_creators(), reweight.full_fidelity)) {
        std::vector<Vector> s;
        for (const auto& c : sim.creators()) s.push_back(c.strategy);
        rec.strategies = std::move(s);
      }
      trace.records.push_back(std::move(rec));
      if (reweight.utility_hook == UtilityHook::SampledInteraction) utilities = sim.sampled_user_utilities(hook_engine);
      epoch_utilities.push_back(std::move(utilities));
    }
    const auto pi_bar = group_mean_utilities(epoch_utilities, population);
    weights = update_weights(weights, pi_bar, alpha_at(reweight.alpha, e, reweight.epochs));
  }
  trace.final_weights = weights.w;
  trace.final_creators = sim.creators();
  trace.final_user_utilities = sim.user_utilities();
  return trace;
}

}  // namespace creatorsim
