#include <doctest.h>

#include <cmath>
#include <random>

#include "creatorsim/analysis.hpp"
#include "creatorsim/environment.hpp"
#include "creatorsim/experiment.hpp"

using namespace creatorsim;

TEST_CASE("spearman") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{5, 6, 7, 8, 7};
  CHECK(spearman(a, a) == doctest::Approx(1.0));
  const std::vector<double> rev{5, 4, 3, 2, 1};
  CHECK(spearman(a, rev) == doctest::Approx(-1.0));
  // Ranks of b with ties: 1, 2, 3.5, 5, 3.5.
  CHECK(spearman(a, b) == doctest::Approx(0.8207826817).epsilon(1e-9));
  CHECK(spearman(a, std::vector<double>(5, 1.0)) == 0.0);
}

TEST_CASE("adjusted rand index") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
  CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(1.0));
  const std::vector<int> b{0, 0, 1, 2, 1, 2};
  // Contingency sums: sum C(n_ij,2) = 1, rows 3, cols 3, C(6,2) = 15.
  const double expected = (1.0 - 9.0 / 15.0) / (3.0 - 9.0 / 15.0);
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(expected));
}

TEST_CASE("paired t-test") {
  const std::vector<double> t{1.1, 2.2, 3.1, 4.3};
  const std::vector<double> b{1.0, 2.0, 3.0, 4.0};
  const auto r = paired_t_test(t, b);
  // d = 0.1, 0.2, 0.1, 0.3; mean 0.175, sd 0.0957427, t = 3.6556
  CHECK(r.mean_difference == doctest::Approx(0.175));
  CHECK(r.t_statistic == doctest::Approx(3.655631).epsilon(1e-5));
  CHECK(r.p_value == doctest::Approx(0.0176764).epsilon(1e-4));
  CHECK(r.pairs == 4);
  CHECK(paired_t_test(b, t).p_value > 0.9);
}

TEST_CASE("analytic derivatives match central differences") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<RelevanceDerivatives> models{derivatives_of(TruncatedLinearDistance{2.0, 1.0}),
                                                 derivatives_of(DotProduct{1.0, 2.0}), quadratic_relevance(1.0)};
  int checked = 0;
  for (const auto& model : models) {
    for (int k = 0; k < 100; ++k) {
      const Vector s = Vector::NullaryExpr(3, [&] { return u(rng); });
      const Vector x = Vector::NullaryExpr(3, [&] { return u(rng); });
      if (!model.smooth_at(s, x)) continue;
      const Vector g = model.gradient(s, x);
      const Vector fd = numeric_gradient(model, s, x);
      if (g.norm() == 0.0) {
        CHECK(fd.norm() < 1e-8);
      } else {
        CHECK((g - fd).norm() / g.norm() < 1e-5);
      }
      ++checked;
    }
  }
  CHECK(checked >= 250);
}

TEST_CASE("monotone condition verdicts") {
  const auto dot = monotone_case("dot_orthogonal", 1, 50);
  const auto r1 = check_monotone_condition(dot.population, dot.model, dot.samples, dot.tolerance);
  CHECK_FALSE(r1.holds);
  for (double e : r1.max_eigenvalues) CHECK(e == doctest::Approx(0.05).epsilon(1e-9));

  const auto quad = monotone_case("bounded_quadratic", 1, 50);
  const auto r2 = check_monotone_condition(quad.population, quad.model, quad.samples, quad.tolerance);
  CHECK(r2.holds);
  CHECK(r2.evaluated.size() == 50);

  const auto back = monotone_report_from_json(to_json(r2));
  CHECK(back.holds == r2.holds);
  CHECK(back.max_eigenvalues == r2.max_eigenvalues);
  CHECK(back.evaluated == r2.evaluated);
  CHECK_THROWS_AS(monotone_case("no_such_case", 1), ValidationError);
}

TEST_CASE("welfare relative change and metrics round trip") {
  SimulationTrace trace;
  for (int t = 0; t < 9; ++t) {
    StepRecord r;
    r.step = t;
    r.welfare = t < 3 ? 1.0 + t : 3.0;
    r.group_utilities = {0.1, 0.2};
    r.weights = {1.0, 1.0};
    trace.records.push_back(r);
  }
  CHECK(welfare_relative_change(trace, 1.0 / 3.0, 1.0) == doctest::Approx(0.0));
  CHECK(welfare_relative_change(trace, 1.0 / 9.0, 1.0) == doctest::Approx(2.0));

  auto env = failure_example_env(0);
  env.population.num_groups = 2;
  env.population.group_of = {0, 0, 1, 1, 1};
  trace.final_weights = {0.8, 1.2};
  trace.final_creators = env.creators;
  trace.final_user_utilities = {0.1, 0.2, 0.3, 0.4, 0.5};
  const auto m = experiment_metrics(trace, env);
  CHECK(m.plateaued);
  CHECK(m.group_sizes == std::vector<int>{2, 3});
  const auto back = metrics_from_json(to_json(m));
  CHECK(to_json(back).dump() == to_json(m).dump());
  CHECK(welfare_curve_csv(m).rfind("step,welfare\n", 0) == 0);
}

TEST_CASE("weight gradient report round trip") {
  GradientCheckReport r;
  r.weights = {0.5, 1.5};
  r.pi_bar = {0.3, 0.1};
  r.rank_agreement = 0.5;
  r.baseline_converged = true;
  r.notes = {"approximate"};
  WeightGradientEntry e;
  e.group = 1;
  e.delta = 0.1;
  e.seeds = {1, 2};
  e.delta_welfare = {0.01, -0.002};
  e.mean_delta_welfare = 0.004;
  e.fraction_nonnegative = 0.5;
  r.entries.push_back(e);
  CHECK(to_json(gradient_report_from_json(to_json(r))).dump() == to_json(r).dump());
}
