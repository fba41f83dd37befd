#include "creatorsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace creatorsim {

RelevanceDerivatives derivatives_of(const RelevanceModel& model) {
  RelevanceDerivatives out;
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&model)) {
    const double c0 = tld->c0;
    const double c1 = tld->c1;
    out.value = [c0, c1](const Vector& s, const Vector& x) { return std::max(c0 - (s - x).norm() / c1, 0.0); };
    out.gradient = [c0, c1](const Vector& s, const Vector& x) -> Vector {
      const Vector diff = s - x;
      const double r = diff.norm();
      if (r >= c0 * c1) return Vector::Zero(s.size());
      return -diff / (c1 * r);
    };
    out.hessian = [c0, c1](const Vector& s, const Vector& x) -> Matrix {
      const Vector diff = s - x;
      const double r = diff.norm();
      const auto d = s.size();
      if (r >= c0 * c1) return Matrix::Zero(d, d);
      const Vector u = diff / r;
      return -(Matrix::Identity(d, d) - u * u.transpose()) / (c1 * r);
    };
    out.smooth_at = [c0, c1](const Vector& s, const Vector& x) {
      const double r = (s - x).norm();
      return r > kKinkExclusion && std::abs(r - c0 * c1) > kKinkExclusion;
    };
    return out;
  }
  const auto dot = std::get<DotProduct>(model);
  out.value = [dot](const Vector& s, const Vector& x) { return (s.dot(x) - dot.offset) / dot.scale; };
  out.gradient = [dot](const Vector&, const Vector& x) -> Vector { return x / dot.scale; };
  out.hessian = [](const Vector& s, const Vector&) -> Matrix { return Matrix::Zero(s.size(), s.size()); };
  out.smooth_at = [](const Vector&, const Vector&) { return true; };
  return out;
}

RelevanceDerivatives quadratic_relevance(double c) {
  RelevanceDerivatives out;
  out.value = [c](const Vector& s, const Vector& x) { return c - 0.5 * (s - x).squaredNorm(); };
  out.gradient = [](const Vector& s, const Vector& x) -> Vector { return -(s - x); };
  out.hessian = [](const Vector& s, const Vector&) -> Matrix { return -Matrix::Identity(s.size(), s.size()); };
  out.smooth_at = [](const Vector&, const Vector&) { return true; };
  return out;
}

Vector numeric_gradient(const RelevanceDerivatives& model, const Vector& s, const Vector& x, double h) {
  Vector g(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    Vector up = s;
    Vector down = s;
    up[k] += h;
    down[k] -= h;
    g[k] = (model.value(up, x) - model.value(down, x)) / (2.0 * h);
  }
  return g;
}

MonotoneCheckReport check_monotone_condition(const UserPopulation& population, const RelevanceDerivatives& model,
                                             std::span<const Vector> sample_points, double tolerance) {
  population.validate();
  MonotoneCheckReport report;
  report.tolerance = tolerance;
  const int d = population.dim();
  for (std::size_t p = 0; p < sample_points.size(); ++p) {
    const Vector& s = sample_points[p];
    if (s.size() != d) throw DimensionError("check_monotone_condition sample", d, s.size());
    bool smooth = true;
    Matrix acc = Matrix::Zero(d, d);
    for (int j = 0; j < population.size() && smooth; ++j) {
      const Vector x = population.embeddings.col(j);
      if (!model.smooth_at(s, x)) {
        smooth = false;
        break;
      }
      const Vector g = model.gradient(s, x);
      acc += population.mass[j] * (model.hessian(s, x) + g * g.transpose());
    }
    if (!smooth) {
      report.skipped.push_back(static_cast<int>(p));
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (acc + acc.transpose()), Eigen::EigenvaluesOnly);
    report.max_eigenvalues.push_back(solver.eigenvalues().maxCoeff());
    report.evaluated.push_back(static_cast<int>(p));
  }
  report.holds = !report.max_eigenvalues.empty() &&
                 std::all_of(report.max_eigenvalues.begin(), report.max_eigenvalues.end(),
                             [tolerance](double v) { return v <= tolerance; });
  return report;
}

nlohmann::json to_json(const MonotoneCheckReport& report) {
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "monotone_check"},
          {"max_eigenvalues", report.max_eigenvalues},
          {"evaluated", report.evaluated},
          {"skipped", report.skipped},
          {"verdict", report.holds ? "holds" : "fails"},
          {"tolerance", report.tolerance}};
}

MonotoneCheckReport monotone_report_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kReportSchemaVersion || doc.at("kind") != "monotone_check")
    throw ParseError("monotone report", 0, "unexpected schema");
  MonotoneCheckReport r;
  r.max_eigenvalues = doc.at("max_eigenvalues").get<std::vector<double>>();
  r.evaluated = doc.at("evaluated").get<std::vector<int>>();
  r.skipped = doc.at("skipped").get<std::vector<int>>();
  r.holds = doc.at("verdict").get<std::string>() == "holds";
  r.tolerance = doc.at("tolerance").get<double>();
  return r;
}

// ---------------------------------------------------------------------------

WeightGradientEntry finite_diff_weight_gradient(const EnvironmentSpec& env, std::span<const double> weights,
                                                int group, std::span<const std::uint64_t> seeds,
                                                const WeightGradientOptions& options) {
  const int L = env.population.num_groups;
  if (static_cast<int>(weights.size()) != L) throw DimensionError("finite_diff weights", L, static_cast<long>(weights.size()));
  if (group < 0 || group >= L) throw ValidationError("finite_diff_weight_gradient: group out of range");
  if (seeds.empty()) throw ValidationError("finite_diff_weight_gradient: no seeds");
  WeightGradientEntry entry;
  entry.group = group;
  entry.delta = options.delta;

  ReweightConfig settle;
  settle.epochs = 1;
  settle.epoch_length = options.settle_rounds;
  settle.alpha = AlphaSchedule::constant(0.0);
  settle.w_min = std::numeric_limits<double>::min();
  settle.w_max = std::numeric_limits<double>::max();
  std::vector<double> bumped(weights.begin(), weights.end());
  bumped[static_cast<std::size_t>(group)] += options.delta;
  if (!(bumped[static_cast<std::size_t>(group)] > 0.0))
    throw ValidationError("finite_diff_weight_gradient: perturbed weight must stay positive");

  for (auto seed : seeds) {
    LbrConfig lbr = options.dynamics;
    lbr.rng_seed = seed;
    settle.initial_weights.assign(weights.begin(), weights.end());
    const double base = run_adaptive_reweighting(env, lbr, settle, options.mechanism).final_welfare();
    settle.initial_weights = bumped;
    const double pert = run_adaptive_reweighting(env, lbr, settle, options.mechanism).final_welfare();
    entry.seeds.push_back(seed);
    entry.delta_welfare.push_back(pert - base);
  }
  const double n = static_cast<double>(entry.delta_welfare.size());
  entry.mean_delta_welfare = std::accumulate(entry.delta_welfare.begin(), entry.delta_welfare.end(), 0.0) / n;
  entry.fraction_nonnegative =
      static_cast<double>(std::count_if(entry.delta_welfare.begin(), entry.delta_welfare.end(), [](double v) { return v >= 0.0; })) / n;
  return entry;
}

GradientCheckReport check_weight_gradient(const EnvironmentSpec& env, const GradientCheckOptions& options) {
  if (options.seeds.empty()) throw ValidationError("check_weight_gradient: no seeds");
  GradientCheckReport report;
  LbrConfig lbr = options.perturbation.dynamics;
  lbr.rng_seed = derive_seed(options.seeds.front(), "gradient-baseline");
  const auto baseline = run_adaptive_reweighting(env, lbr, options.baseline, options.perturbation.mechanism);
  report.baseline_converged = detect_local_equilibrium(baseline.records, options.lne_window);
  if (!report.baseline_converged)
    report.notes.push_back("baseline did not pass the approximate LNE test; using the state at the horizon");
  report.notes.push_back("pi_bar is measured at an approximately converged profile and is a proxy for utility at the equilibrium");

  EnvironmentSpec start = env;
  start.creators = baseline.final_creators;
  report.weights = baseline.final_weights;
  // pi_bar over the last epoch of the baseline.
  const int M = options.baseline.epoch_length;
  report.pi_bar.assign(static_cast<std::size_t>(env.population.num_groups), 0.0);
  const auto& recs = baseline.records;
  for (std::size_t k = recs.size() - static_cast<std::size_t>(M); k < recs.size(); ++k) {
    for (std::size_t l = 0; l < report.pi_bar.size(); ++l) report.pi_bar[l] += recs[k].group_utilities[l] / M;
  }
  std::vector<double> responses;
  std::vector<double> predicted;
  for (int l = 0; l < env.population.num_groups; ++l) {
    auto entry = finite_diff_weight_gradient(start, report.weights, l, options.seeds, options.perturbation);
    entry.pi_bar = report.pi_bar[static_cast<std::size_t>(l)];
    responses.push_back(entry.mean_delta_welfare);
    predicted.push_back(-entry.pi_bar);
    report.entries.push_back(std::move(entry));
  }
  report.rank_agreement = spearman(responses, predicted);
  return report;
}

nlohmann::json to_json(const GradientCheckReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"group", e.group},
                       {"delta", e.delta},
                       {"pi_bar", e.pi_bar},
                       {"seeds", e.seeds},
                       {"delta_welfare", e.delta_welfare},
                       {"mean_delta_welfare", e.mean_delta_welfare},
                       {"fraction_nonnegative", e.fraction_nonnegative}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "gradient_check"},
          {"entries", entries},
          {"weights", report.weights},
          {"pi_bar", report.pi_bar},
          {"rank_agreement", report.rank_agreement},
          {"baseline_converged", report.baseline_converged},
          {"approximate", true},
          {"notes", report.notes}};
}

GradientCheckReport gradient_report_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kReportSchemaVersion || doc.at("kind") != "gradient_check")
    throw ParseError("gradient report", 0, "unexpected schema");
  GradientCheckReport r;
  for (const auto& je : doc.at("entries")) {
    WeightGradientEntry e;
    e.group = je.at("group").get<int>();
    e.delta = je.at("delta").get<double>();
    e.pi_bar = je.at("pi_bar").get<double>();
    e.seeds = je.at("seeds").get<std::vector<std::uint64_t>>();
    e.delta_welfare = je.at("delta_welfare").get<std::vector<double>>();
    e.mean_delta_welfare = je.at("mean_delta_welfare").get<double>();
    e.fraction_nonnegative = je.at("fraction_nonnegative").get<double>();
    r.entries.push_back(std::move(e));
  }
  r.weights = doc.at("weights").get<std::vector<double>>();
  r.pi_bar = doc.at("pi_bar").get<std::vector<double>>();
  r.rank_agreement = doc.at("rank_agreement").get<double>();
  r.baseline_converged = doc.at("baseline_converged").get<bool>();
  r.notes = doc.at("notes").get<std::vector<std::string>>();
  return r;
}

// ---------------------------------------------------------------------------

namespace oracle {

namespace {

double score(const RelevanceModel& model, const Vector& s, const Vector& x) {
  double acc = 0.0;
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&model)) {
    for (Eigen::Index k = 0; k < s.size(); ++k) acc += (s[k] - x[k]) * (s[k] - x[k]);
    const double v = tld->c0 - std::sqrt(acc) / tld->c1;
    return v > 0.0 ? v : 0.0;
  }
  const auto& dot = std::get<DotProduct>(model);
  for (Eigen::Index k = 0; k < s.size(); ++k) acc += s[k] * x[k];
  return (acc - dot.offset) / dot.scale;
}

}  // namespace

std::vector<double> match_distribution(std::span<const double> scores, int K, double beta) {
  const int n = static_cast<int>(scores.size());
  std::vector<std::pair<double, int>> ranked;
  for (int i = 0; i < n; ++i) ranked.emplace_back(scores[static_cast<std::size_t>(i)], i);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  if (beta == 0.0) {
    p[static_cast<std::size_t>(ranked[0].second)] = 1.0;
    return p;
  }
  long double z = 0.0L;
  std::vector<long double> e(static_cast<std::size_t>(K));
  for (int t = 0; t < K; ++t) {
    e[static_cast<std::size_t>(t)] = std::isinf(beta) ? 1.0L : std::exp(static_cast<long double>(ranked[static_cast<std::size_t>(t)].first) / beta);
    z += e[static_cast<std::size_t>(t)];
  }
  for (int t = 0; t < K; ++t) p[static_cast<std::size_t>(ranked[static_cast<std::size_t>(t)].second)] = static_cast<double>(e[static_cast<std::size_t>(t)] / z);
  return p;
}

double welfare(std::span<const CreatorState> creators, const UserPopulation& population,
               const RelevanceModel& model, int K, double beta) {
  double total = 0.0;
  for (int j = 0; j < population.size(); ++j) {
    std::vector<double> s;
    for (const auto& c : creators) s.push_back(score(model, c.strategy, population.embeddings.col(j)));
    const auto p = match_distribution(s, K, beta);
    double u = 0.0;
    for (std::size_t i = 0; i < creators.size(); ++i) u += s[i] * p[i];
    total += population.mass[j] * u;
  }
  return total;
}

double creator_utility(int i, std::span<const CreatorState> creators, const UserPopulation& population,
                       const RelevanceModel& model, int K, double beta, RewardScheme reward,
                       MechanismKind mechanism, std::span<const double> user_weights) {
  const int n = static_cast<int>(creators.size());
  double total = 0.0;
  for (int j = 0; j < population.size(); ++j) {
    const double w = user_weights[static_cast<std::size_t>(j)];
    std::vector<double> s;
    for (const auto& c : creators) s.push_back(score(model, c.strategy, population.embeddings.col(j)));
    int k = K;
    double b = beta;
    double scale = 1.0;
    if (mechanism == MechanismKind::UIR) scale = w;
    if (mechanism == MechanismKind::SMT) b = beta * w;
    if (mechanism == MechanismKind::HMT) k = std::min(n, static_cast<int>(std::ceil(K * w)));
    const auto p = match_distribution(s, k, b);
    const double r = reward == RewardScheme::Engagement ? s[static_cast<std::size_t>(i)] : 1.0;
    total += population.mass[j] * scale * r * p[static_cast<std::size_t>(i)];
  }
  return total;
}

}  // namespace oracle

OracleReport brute_force_oracles(const EnvironmentSpec& env, const GroupWeights& weights) {
  if (env.num_creators() > 6 || env.population.size() > 6)
    throw ValidationError("brute_force_oracles: instance exceeds n <= 6, m <= 6");
  env.validate();
  OracleReport report;
  auto compare = [&report](double a, double b) {
    report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(a - b));
    ++report.comparisons;
  };
  const auto& pop = env.population;
  const int K = env.matching.K;
  const double beta = env.matching.beta;

  for (int j = 0; j < pop.size(); ++j) {
    const auto s = creator_scores(env.creators, pop.embeddings.col(j), env.relevance);
    const auto p = match_distribution(s, env.matching);
    const auto q = oracle::match_distribution(s, K, beta);
    for (std::size_t i = 0; i < p.size(); ++i) compare(p[i], q[i]);
  }

  const double w_oracle = oracle::welfare(env.creators, pop, env.relevance, K, beta);
  compare(welfare(env.creators, pop, env.relevance, env.matching), w_oracle);
  LbrConfig lbr;
  Simulation sim(env, lbr);
  compare(sim.welfare(), w_oracle);

  std::vector<double> user_weights;
  for (int g : pop.group_of) user_weights.push_back(weights.w[static_cast<std::size_t>(g)]);
  for (auto kind : {MechanismKind::None, MechanismKind::UIR, MechanismKind::SMT, MechanismKind::HMT}) {
    const MechanismConfig mech{kind, {}, {}};
    const auto deployment = deploy(mech, weights, pop, env.matching, env.num_creators());
    sim.deploy(deployment.plan);
    double w_deployed = 0.0;
    for (int j = 0; j < pop.size(); ++j) {
      const auto sj = static_cast<std::size_t>(j);
      const auto s = creator_scores(env.creators, pop.embeddings.col(j), env.relevance);
      const auto q = oracle::match_distribution(s, deployment.plan.K[sj], deployment.plan.beta[sj]);
      double u = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) u += s[i] * q[i];
      w_deployed += pop.mass[j] * u;
    }
    compare(sim.welfare(), w_deployed);
    compare(welfare(env.creators, pop, env.relevance, deployment.plan), w_deployed);
    for (int i = 0; i < env.num_creators(); ++i) {
      const double expected = oracle::creator_utility(i, env.creators, pop, env.relevance, K, beta, env.reward,
                                                      kind, user_weights);
      compare(creator_utility(i, env.creators, pop, env.relevance, env.reward, deployment.plan), expected);
      compare(sim.creator_utility(i), expected);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[static_cast<std::size_t>(a)] < v[static_cast<std::size_t>(b)]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[static_cast<std::size_t>(order[j + 1])] == v[static_cast<std::size_t>(order[i])]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[static_cast<std::size_t>(order[k])] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman", static_cast<long>(a.size()), static_cast<long>(b.size()));
  if (a.size() < 2) return 0.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return std::clamp(pearson(ra, rb), -1.0, 1.0);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DimensionError("adjusted_rand_index", static_cast<long>(a.size()), static_cast<long>(b.size()));
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ca;
  std::map<int, long> cb;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ++joint[{a[k], b[k]}];
    ++ca[a[k]];
    ++cb[b[k]];
  }
  auto pairs = [](long c) { return static_cast<double>(c) * static_cast<double>(c - 1) / 2.0; };
  double index = 0.0;
  for (const auto& [key, c] : joint) index += pairs(c);
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& [key, c] : ca) sa += pairs(c);
  for (const auto& [key, c] : cb) sb += pairs(c);
  const double total = pairs(static_cast<long>(a.size()));
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

PairedTest paired_t_test(std::span<const double> treatment, std::span<const double> baseline) {
  if (treatment.size() != baseline.size()) throw DimensionError("paired_t_test", static_cast<long>(baseline.size()), static_cast<long>(treatment.size()));
  if (treatment.size() < 2) throw ValidationError("paired_t_test needs at least two pairs");
  PairedTest out;
  out.pairs = static_cast<int>(treatment.size());
  std::vector<double> diff;
  for (std::size_t k = 0; k < treatment.size(); ++k) diff.push_back(treatment[k] - baseline[k]);
  const double n = static_cast<double>(diff.size());
  out.mean_difference = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : diff) ss += (d - out.mean_difference) * (d - out.mean_difference);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    out.t_statistic = out.mean_difference > 0.0 ? std::numeric_limits<double>::infinity()
                                                : (out.mean_difference < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    out.p_value = out.mean_difference > 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t_statistic = out.mean_difference / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
  return out;
}

double welfare_relative_change(const SimulationTrace& trace, double from_fraction, double to_fraction) {
  const auto T = static_cast<double>(trace.records.size());
  if (trace.records.empty()) throw ValidationError("welfare_relative_change: empty trace");
  auto index = [T](double f) {
    const auto idx = static_cast<long>(std::ceil(f * T)) - 1;
    return static_cast<std::size_t>(std::clamp(idx, 0L, static_cast<long>(T) - 1));
  };
  const double a = trace.records[index(from_fraction)].welfare;
  const double b = trace.records[index(to_fraction)].welfare;
  if (a == 0.0) return b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(b - a) / std::abs(a);
}

std::vector<double> weight_by_label(const UserPopulation& population, std::span<const int> labels,
                                    std::span<const double> group_weights, int num_labels) {
  if (static_cast<int>(labels.size()) != population.size())
    throw DimensionError("weight_by_label labels", population.size(), static_cast<long>(labels.size()));
  std::vector<double> sums(static_cast<std::size_t>(num_labels), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(num_labels), 0);
  for (int j = 0; j < population.size(); ++j) {
    const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(j)]);
    sums[l] += group_weights[static_cast<std::size_t>(population.group_of[static_cast<std::size_t>(j)])];
    ++counts[l];
  }
  for (std::size_t l = 0; l < sums.size(); ++l) sums[l] = counts[l] > 0 ? sums[l] / counts[l] : 0.0;
  return sums;
}

ExperimentMetrics experiment_metrics(const SimulationTrace& trace, const EnvironmentSpec& env,
                                     double plateau_from, double plateau_threshold) {
  if (trace.records.empty()) throw ValidationError("experiment_metrics: empty trace");
  ExperimentMetrics m;
  for (const auto& r : trace.records) {
    m.steps.push_back(r.step);
    m.welfare_curve.push_back(r.welfare);
  }
  m.final_group_utilities = trace.records.back().group_utilities;
  m.final_weights = trace.final_weights.empty() ? trace.records.back().weights : trace.final_weights;
  m.group_sizes = env.population.group_sizes();
  const std::vector<double> sizes(m.group_sizes.begin(), m.group_sizes.end());
  m.weight_size_spearman = spearman(m.final_weights, sizes);
  m.utility_size_spearman = spearman(m.final_group_utilities, sizes);
  if (!env.true_labels.empty()) {
    const int labels = *std::max_element(env.true_labels.begin(), env.true_labels.end()) + 1;
    m.true_cluster_sizes.assign(static_cast<std::size_t>(labels), 0);
    for (int l : env.true_labels) ++m.true_cluster_sizes[static_cast<std::size_t>(l)];
    m.true_cluster_weights = weight_by_label(env.population, env.true_labels, m.final_weights, labels);
    const auto& users = trace.final_user_utilities;
    m.true_cluster_utilities.assign(static_cast<std::size_t>(labels), 0.0);
    if (static_cast<int>(users.size()) == env.population.size()) {
      for (int j = 0; j < env.population.size(); ++j) {
        const auto l = static_cast<std::size_t>(env.true_labels[static_cast<std::size_t>(j)]);
        m.true_cluster_utilities[l] += users[static_cast<std::size_t>(j)] / m.true_cluster_sizes[l];
      }
    }
    const std::vector<double> tsizes(m.true_cluster_sizes.begin(), m.true_cluster_sizes.end());
    m.true_weight_size_spearman = spearman(m.true_cluster_weights, tsizes);
    m.true_utility_size_spearman = spearman(m.true_cluster_utilities, tsizes);
  }
  m.plateau_relative_change = welfare_relative_change(trace, plateau_from, 1.0);
  m.plateaued = m.plateau_relative_change < plateau_threshold;
  return m;
}

nlohmann::json to_json(const ExperimentMetrics& m) {
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "experiment_metrics"},
          {"steps", m.steps},
          {"welfare_curve", m.welfare_curve},
          {"final_group_utilities", m.final_group_utilities},
          {"final_weights", m.final_weights},
          {"group_sizes", m.group_sizes},
          {"weight_size_spearman", m.weight_size_spearman},
          {"utility_size_spearman", m.utility_size_spearman},
          {"true_cluster_sizes", m.true_cluster_sizes},
          {"true_cluster_weights", m.true_cluster_weights},
          {"true_cluster_utilities", m.true_cluster_utilities},
          {"true_weight_size_spearman", m.true_weight_size_spearman},
          {"true_utility_size_spearman", m.true_utility_size_spearman},
          {"plateau_relative_change", m.plateau_relative_change},
          {"plateaued", m.plateaued}};
}

ExperimentMetrics metrics_from_json(const nlohmann::json& doc) {
  if (doc.at("schema_version").get<int>() != kReportSchemaVersion || doc.at("kind") != "experiment_metrics")
    throw ParseError("metrics", 0, "unexpected schema");
  ExperimentMetrics m;
  m.steps = doc.at("steps").get<std::vector<int>>();
  m.welfare_curve = doc.at("welfare_curve").get<std::vector<double>>();
  m.final_group_utilities = doc.at("final_group_utilities").get<std::vector<double>>();
  m.final_weights = doc.at("final_weights").get<std::vector<double>>();
  m.group_sizes = doc.at("group_sizes").get<std::vector<int>>();
  m.weight_size_spearman = doc.at("weight_size_spearman").get<double>();
  m.utility_size_spearman = doc.at("utility_size_spearman").get<double>();
  m.true_cluster_sizes = doc.at("true_cluster_sizes").get<std::vector<int>>();
  m.true_cluster_weights = doc.at("true_cluster_weights").get<std::vector<double>>();
  m.true_cluster_utilities = doc.at("true_cluster_utilities").get<std::vector<double>>();
  m.true_weight_size_spearman = doc.at("true_weight_size_spearman").get<double>();
  m.true_utility_size_spearman = doc.at("true_utility_size_spearman").get<double>();
  m.plateau_relative_change = doc.at("plateau_relative_change").get<double>();
  m.plateaued = doc.at("plateaued").get<bool>();
  return m;
}

std::string welfare_curve_csv(const ExperimentMetrics& metrics) {
  std::ostringstream out;
  out.precision(17);
  out << "step,welfare\n";
  for (std::size_t k = 0; k < metrics.steps.size(); ++k) out << metrics.steps[k] << ',' << metrics.welfare_curve[k] << '\n';
  return out.str();
}

}  // namespace creatorsim
