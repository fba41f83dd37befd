#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "creatorsim/analysis.hpp"
#include "creatorsim/environment.hpp"

using namespace creatorsim;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("creatorsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void expect_same_env(const EnvironmentSpec& a, const EnvironmentSpec& b) {
  CHECK(a.population.embeddings == b.population.embeddings);
  CHECK(a.population.mass == b.population.mass);
  CHECK(a.population.group_of == b.population.group_of);
  CHECK(a.population.num_groups == b.population.num_groups);
  REQUIRE(a.creators.size() == b.creators.size());
  for (std::size_t i = 0; i < a.creators.size(); ++i) {
    CHECK(a.creators[i].strategy == b.creators[i].strategy);
    CHECK(a.creators[i].catalog_position == b.creators[i].catalog_position);
  }
  CHECK(a.matching.K == b.matching.K);
  CHECK(a.matching.beta == b.matching.beta);
  CHECK(a.reward == b.reward);
  CHECK(a.true_labels == b.true_labels);
  CHECK(a.relevance.index() == b.relevance.index());
}

}  // namespace

TEST_CASE("synthetic environment shape") {
  const auto env = gen_synthetic(1);
  CHECK(env.population.size() == 2000);
  CHECK(env.population.dim() == 5);
  CHECK(env.num_creators() == 200);
  CHECK(env.matching.K == 20);
  CHECK(env.matching.beta == 0.1);
  for (const auto& c : env.creators) CHECK(c.strategy.norm() <= 1.0 + 1e-12);
  std::vector<int> counts(10, 0);
  for (int l : env.true_labels) ++counts[l];
  CHECK(counts == std::vector<int>{1000, 500, 200, 100, 100, 50, 20, 10, 10, 10});
  CHECK_NOTHROW(env.validate());
  CHECK(env.warnings().empty());
}

TEST_CASE("generators are deterministic in the seed") {
  const auto a = gen_synthetic(42);
  const auto b = gen_synthetic(42);
  expect_same_env(a, b);
  const auto c = gen_synthetic(43);
  CHECK(a.population.embeddings != c.population.embeddings);
}

TEST_CASE("counterexample instance") {
  const auto env = failure_example_env(3);
  CHECK(env.population.size() == 5);
  CHECK(env.population.num_groups == 5);
  CHECK(env.matching.K == 3);
  for (const auto& c : env.creators) {
    CHECK(c.strategy[0] >= 0.0);
    CHECK(c.strategy[0] <= 1.0);
    CHECK(std::abs(c.strategy[1]) <= 0.2);
  }
  CHECK_FALSE(env.warnings().empty());  // relevance reaches 2
}

TEST_CASE("orthogonal basis instance") {
  const auto env = orthogonal_basis_env(2);
  CHECK(env.population.embeddings == Matrix::Identity(5, 5));
  CHECK(env.population.num_groups == 5);
  CHECK(env.num_creators() == 100);
  CHECK(env.reward == RewardScheme::Traffic);
  for (const auto& c : env.creators) CHECK(c.strategy.norm() <= 1.0 + 1e-12);
}

TEST_CASE("k-means recovers well separated clusters") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix pts(2, 90);
  std::vector<int> truth(90);
  const double cx[3] = {0.0, 5.0, -5.0};
  for (int j = 0; j < 90; ++j) {
    truth[j] = j % 3;
    pts(0, j) = cx[truth[j]] + noise(rng);
    pts(1, j) = noise(rng);
  }
  const auto res = kmeans(pts, 3, 4);
  CHECK(adjusted_rand_index(res.assignment, truth) == doctest::Approx(1.0));
  CHECK(res.centers.cols() == 3);
  const auto again = kmeans(pts, 3, 4);
  CHECK(again.assignment == res.assignment);
  CHECK_THROWS_AS(kmeans(pts, 0, 1), ValidationError);
  CHECK_THROWS_AS(kmeans(pts, 91, 1), ValidationError);
}

TEST_CASE("k-means never leaves a cluster empty") {
  Matrix pts(1, 6);
  pts << 0.0, 0.0, 0.0, 0.0, 1.0, 2.0;
  const auto res = kmeans(pts, 3, 1);
  std::vector<int> counts(3, 0);
  for (int a : res.assignment) ++counts[a];
  for (int c : counts) CHECK(c > 0);
}

TEST_CASE("k-means groups the synthetic population") {
  auto env = gen_synthetic(5);
  kmeans_groups(env.population, 20, 5);
  CHECK(env.population.num_groups == 20);
  for (int s : env.population.group_sizes()) CHECK(s > 0);
}

TEST_CASE("environment snapshot round trip") {
  const auto dir = scratch_dir("env");
  auto env = gen_synthetic(9);
  kmeans_groups(env.population, 20, 9);
  save_environment(dir / "env.json", env);
  const auto back = load_environment(dir / "env.json");
  expect_same_env(env, back);
  const auto fe = failure_example_env(1);
  expect_same_env(fe, environment_from_json(environment_to_json(fe)));
  CHECK(environment_to_json(fe).dump() == environment_to_json(environment_from_json(environment_to_json(fe))).dump());
  std::filesystem::remove_all(dir);
}

TEST_CASE("embedding CSV and catalog environment") {
  const auto dir = scratch_dir("emb");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingTable users{{}, Matrix(4, 30)};
  EmbeddingTable items{{}, Matrix(4, 50)};
  for (int j = 0; j < 30; ++j) {
    users.ids.push_back("u" + std::to_string(j));
    users.values.col(j) = Vector::NullaryExpr(4, [&] { return g(rng); }).normalized();
  }
  for (int j = 0; j < 50; ++j) {
    items.ids.push_back("i" + std::to_string(j));
    items.values.col(j) = Vector::NullaryExpr(4, [&] { return g(rng); }).normalized();
  }
  write_embedding_csv(dir / "users.csv", users);
  write_embedding_csv(dir / "items.csv", items);
  const auto back = read_embedding_csv(dir / "users.csv");
  CHECK(back.ids == users.ids);
  CHECK((back.values - users.values).cwiseAbs().maxCoeff() < 1e-15);

  EmbeddingEnvOptions o;
  o.num_creators = 4;
  o.shared_items = 20;
  o.private_items = 5;
  o.K = 2;
  const auto env = load_embedding_env(dir / "users.csv", dir / "items.csv", o);
  CHECK(env.num_creators() == 4);
  for (const auto& c : env.creators) {
    const auto& set = std::get<CatalogSet>(c.strategy_set);
    CHECK(set.indices.size() == 25);
    CHECK(set.shared_count == 20);
    CHECK(is_member(c));
  }
  expect_same_env(env, environment_from_json(environment_to_json(env)));

  o.shared_items = 46;
  CHECK_THROWS_AS(load_embedding_env(dir / "users.csv", dir / "items.csv", o), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed embedding files carry the line number") {
  const auto dir = scratch_dir("bad");
  {
    std::ofstream f(dir / "bad.csv");
    f << "id,dim0,dim1\na,0.1,0.2\nb,0.3\n";
  }
  try {
    read_embedding_csv(dir / "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::filesystem::remove_all(dir);
}
