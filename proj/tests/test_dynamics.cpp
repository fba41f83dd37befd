#include <doctest.h>

#include <cmath>

#include "creatorsim/analysis.hpp"
#include "creatorsim/dynamics.hpp"
#include "creatorsim/environment.hpp"

using namespace creatorsim;

namespace {

bool same_profile(const std::vector<CreatorState>& a, const std::vector<CreatorState>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].strategy != b[i].strategy || a[i].catalog_position != b[i].catalog_position) return false;
  return true;
}

EnvironmentSpec small_synthetic(std::uint64_t seed) {
  SyntheticOptions o;
  o.cluster_sizes = {30, 20, 10};
  o.num_creators = 12;
  o.K = 4;
  auto env = gen_synthetic(seed, o);
  kmeans_groups(env.population, 3, seed);
  return env;
}

}  // namespace

TEST_CASE("projection onto a ball") {
  Vector c(2);
  c << 3.0, 4.0;
  const auto p = project(c, BallSet{1.0, Vector::Zero(2)});
  CHECK(p.point.norm() == doctest::Approx(1.0));
  CHECK(p.point[0] == doctest::Approx(0.6));
  Vector inside(2);
  inside << 0.1, 0.2;
  CHECK(project(inside, BallSet{1.0, Vector::Zero(2)}).point == inside);
}

TEST_CASE("projection onto a catalog picks the nearest item, lowest position on ties") {
  auto items = std::make_shared<Matrix>(1, 3);
  *items << 0.0, 1.0, 2.0;
  CatalogSet set{items, {2, 0, 1}, 0};
  Vector q(1);
  q << 0.5;
  const auto p = project(q, set);
  CHECK(p.catalog_position == 1);  // items 0 and 1 tie; position 1 (item 0) < position 2 (item 1)
  q << 1.9;
  CHECK(project(q, set).catalog_position == 0);
}

TEST_CASE("one direction per step and one permutation per round") {
  const auto env = small_synthetic(3);
  Simulation sim(env, LbrConfig{0.2, 9});
  sim.run_round();
  CHECK(sim.rng().direction_draws() == static_cast<std::uint64_t>(env.num_creators()));
  CHECK(sim.rng().permutation_draws() == 1);
  sim.lbr_step(0);
  CHECK(sim.rng().direction_draws() == static_cast<std::uint64_t>(env.num_creators() + 1));
  CHECK(sim.rng().permutation_draws() == 1);
}

TEST_CASE("rejected steps leave strategies bit-identical; accepted steps stay in the set") {
  const auto env = small_synthetic(4);
  Simulation sim(env, LbrConfig{0.3, 17});
  int rejected = 0;
  for (int r = 0; r < 30; ++r) {
    for (int i = 0; i < env.num_creators(); ++i) {
      const auto before = sim.creators();
      const auto out = sim.lbr_step(i);
      if (!out.accepted) {
        ++rejected;
        CHECK(same_profile(before, sim.creators()));
      }
      CHECK(is_member(sim.creators()[i]));
      if (out.improved) CHECK(out.accepted);
    }
  }
  CHECK(rejected > 0);
}

TEST_CASE("post-projection acceptance never lowers a creator's own utility") {
  const auto env = small_synthetic(5);
  LbrConfig cfg{0.5, 23};
  cfg.acceptance_point = AcceptancePoint::PostProjection;
  Simulation sim(env, cfg);
  for (int r = 0; r < 40; ++r) {
    for (int i = 0; i < env.num_creators(); ++i) {
      const double before = sim.creator_utility(i);
      const auto out = sim.lbr_step(i);
      const double after = sim.creator_utility(i);
      if (out.accepted) CHECK(after >= before - 1e-12);
      else CHECK(after == before);
    }
  }
}

TEST_CASE("incremental welfare tracks a full recomputation") {
  const auto env = small_synthetic(6);
  Simulation sim(env, LbrConfig{0.2, 1});
  for (int r = 0; r < 25; ++r) {
    sim.run_round();
    const double full = welfare(sim.creators(), env.population, env.relevance, env.matching);
    CHECK(std::abs(sim.welfare() - full) < 1e-10);
  }
  const auto per_user = sim.user_utilities();
  for (int j = 0; j < env.population.size(); j += 7) {
    const double u = user_expected_utility(sim.creators(), env.population.embeddings.col(j), env.relevance,
                                           env.matching);
    CHECK(std::abs(per_user[j] - u) < 1e-10);
  }
}

TEST_CASE("same seed gives the same trajectory") {
  const auto env = small_synthetic(7);
  LbrConfig cfg{0.2, 99};
  cfg.rounds = 20;
  const auto a = simulate(env, cfg, true);
  const auto b = simulate(env, cfg, true);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK(a.records[t].welfare == b.records[t].welfare);
    CHECK(a.records[t].accepted == b.records[t].accepted);
  }
  CHECK(same_profile(a.final_creators, b.final_creators));
  cfg.rng_seed = 100;
  const auto c = simulate(env, cfg, true);
  CHECK_FALSE(same_profile(a.final_creators, c.final_creators));
}

TEST_CASE("strategy storage cadence") {
  CHECK(store_strategies_at(3, 10, false));
  CHECK_FALSE(store_strategies_at(3, 11, false));
  CHECK(store_strategies_at(10, 11, false));
  CHECK(store_strategies_at(3, 11, true));
}

TEST_CASE("local equilibrium detection") {
  std::vector<StepRecord> records(60);
  for (auto& r : records) r.improved = {0, 0, 0};
  CHECK(detect_local_equilibrium(records, 50));
  records[20].improved[1] = 1;
  CHECK(detect_local_equilibrium(records, 30));
  CHECK_FALSE(detect_local_equilibrium(records, 50));
  CHECK_FALSE(detect_local_equilibrium(records, 61));
  CHECK_THROWS_AS(detect_local_equilibrium(records, 0), ValidationError);
}

TEST_CASE("off-user start is not an equilibrium") {
  auto env = failure_example_env(0);
  for (auto& c : env.creators) c.strategy = Vector::Constant(2, 1.2);
  LbrConfig cfg{0.2, 3};
  cfg.rounds = 5;
  const auto trace = simulate(env, cfg);
  CHECK_FALSE(detect_local_equilibrium(trace.records, 5));
}

TEST_CASE("a lone creator on its only user is an equilibrium") {
  EnvironmentSpec env;
  env.population = UserPopulation::uniform(Matrix::Constant(2, 1, 0.3));
  CreatorState c;
  c.strategy = Vector::Constant(2, 0.3);
  c.strategy_set = BallSet{1.0, Vector::Zero(2)};
  env.creators.push_back(c);
  env.relevance = TruncatedLinearDistance{1.0, 1.0};
  env.matching = MatchingParams{1, 0.1};
  LbrConfig cfg{0.05, 8};
  cfg.rounds = 50;
  const auto trace = simulate(env, cfg);
  CHECK(detect_local_equilibrium(trace.records, 50));
  CHECK(trace.final_creators[0].strategy == c.strategy);
}

TEST_CASE("LBR config validation") {
  CHECK_THROWS_AS((LbrConfig{0.0, 1}.validate()), ValidationError);
  LbrConfig cfg;
  cfg.rounds = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
