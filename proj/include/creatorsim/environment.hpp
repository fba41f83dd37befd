#pragma once

// Game instance builders: the five-user counterexample, the clustered
// synthetic population, embedding-file catalogs, the orthogonal-basis
// instance used by the reweighting direction check, plus k-means grouping.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creatorsim/game.hpp"

namespace creatorsim {

inline constexpr int kEnvironmentSchemaVersion = 1;

struct EnvironmentSpec {
  UserPopulation population;
  std::vector<CreatorState> creators;
  RelevanceModel relevance;
  MatchingParams matching;
  RewardScheme reward = RewardScheme::Engagement;
  std::string provenance;
  std::uint64_t seed = 0;
  // Generator's cluster label per user, empty when unknown.
  std::vector<int> true_labels;

  int num_creators() const { return static_cast<int>(creators.size()); }
  // Throws ValidationError on a broken invariant.
  void validate() const;
  // Warnings that do not invalidate the instance (e.g. relevance outside [0, 1]).
  std::vector<std::string> warnings() const;
};

struct FailureExampleOptions {
  // Initial strategies are uniform on [x_lo, x_hi] x [y_lo, y_hi], the strip
  // between the center user (0,0) and (1,0).
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = -0.2;
  double y_hi = 0.2;
  double ball_radius = 10.0;
};

EnvironmentSpec failure_example_env(std::uint64_t seed, const FailureExampleOptions& options = {});

struct SyntheticOptions {
  int dim = 5;
  std::vector<int> cluster_sizes{1000, 500, 200, 100, 100, 50, 20, 10, 10, 10};
  double cluster_std = 0.5;
  int num_creators = 200;
  double init_noise = 0.05;
  double beta = 0.1;
  int K = 20;
};

EnvironmentSpec gen_synthetic(std::uint64_t seed, const SyntheticOptions& options = {});

struct OrthogonalBasisOptions {
  int dim = 5;
  int num_creators = 100;
  double beta = 0.1;
  RewardScheme reward = RewardScheme::Traffic;
};

// Users e_1..e_d, one group per user, sigma = (s'x + 1) / 2 on the unit ball,
// initial strategies uniform in the ball.
EnvironmentSpec orthogonal_basis_env(std::uint64_t seed, const OrthogonalBasisOptions& options = {});

// ---------------------------------------------------------------------------
// Embedding files: CSV with header `id,dim0,...,dim{d-1}`, one row per entity.

struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix values;  // d x rows
};

EmbeddingTable read_embedding_csv(const std::filesystem::path& path);
void write_embedding_csv(const std::filesystem::path& path, const EmbeddingTable& table);

struct EmbeddingEnvOptions {
  int num_creators = 20;
  int shared_items = 700;   // item file rows are in popularity order
  int private_items = 300;
  double beta = 0.1;
  int K = 20;
  std::uint64_t seed = 0;
};

EnvironmentSpec load_embedding_env(const std::filesystem::path& user_file,
                                   const std::filesystem::path& item_file,
                                   const EmbeddingEnvOptions& options = {});

// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centers;  // d x L
  int iterations = 0;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; empty clusters take the point
// farthest from its current center.
KMeansResult kmeans(const Matrix& points, int L, std::uint64_t seed, int max_iters = 100);

// Runs kmeans on the population embeddings and writes the groups back.
KMeansResult kmeans_groups(UserPopulation& population, int L, std::uint64_t seed, int max_iters = 100);

// ---------------------------------------------------------------------------
// JSON snapshot (schema in docs/schemas.md).

nlohmann::json environment_to_json(const EnvironmentSpec& env);
EnvironmentSpec environment_from_json(const nlohmann::json& doc);

void save_environment(const std::filesystem::path& path, const EnvironmentSpec& env);
EnvironmentSpec load_environment(const std::filesystem::path& path);

}  // namespace creatorsim
