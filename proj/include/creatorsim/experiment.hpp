#pragma once

// Batch orchestration: run configs, seeded (seed x arm) grids on a worker
// pool, and the on-disk artifacts (JSONL traces, summaries, manifest).
// File formats are described in docs/schemas.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creatorsim/analysis.hpp"
#include "creatorsim/environment.hpp"

namespace creatorsim {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

// Lists every problem found in a config, one per line.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class EnvironmentKind { Synthetic, FailureExample, OrthogonalBasis, Embedding, File };

std::string to_string(EnvironmentKind kind);
EnvironmentKind environment_kind_from_string(const std::string& name);

struct EnvironmentConfig {
  EnvironmentKind kind = EnvironmentKind::Synthetic;
  SyntheticOptions synthetic;
  FailureExampleOptions failure;
  OrthogonalBasisOptions orthogonal;
  EmbeddingEnvOptions embedding;
  std::string user_file;
  std::string item_file;
  std::string path;  // kind = file: a saved environment snapshot
  // k-means groups; 0 keeps the builder's own groups. Defaults: 20 for
  // synthetic, 15 for embedding, 0 otherwise.
  int groups = 0;
};

struct ArmConfig {
  std::string name;
  MechanismConfig mechanism;
  std::vector<double> initial_weights;  // empty: all ones
};

struct RunConfig {
  EnvironmentConfig environment;
  LbrConfig dynamics;  // rng_seed is ignored; each run derives its own
  int horizon = 3000;  // T
  // Adaptive weights when true; otherwise weights stay at their initial
  // values (alpha = 0, normalized to sum L).
  bool adaptive = true;
  ReweightConfig reweight;
  std::vector<ArmConfig> arms;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  int threads = 0;  // 0: hardware concurrency
  int lne_window = 50;

  void validate() const;
};

// Defaults: eta 0.2, M 5, T 3000 (E = T / M), weights clipped to
// [0.2, 5], alpha 0.5 then 0.1, arms none/uir/smt/hmt with default maps.
RunConfig default_run_config();

// Missing keys take defaults; unknown keys, type errors and broken
// invariants are all collected into one ConfigError. Relative file paths
// resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig parse_config_file(const std::filesystem::path& path);

// Fully resolved config; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const RunConfig& config);

// FNV-1a of the resolved config without output_dir and threads.
std::string config_hash(const RunConfig& config);

// Builds the environment for one seed, including its grouping.
EnvironmentSpec build_environment(const EnvironmentConfig& config, std::uint64_t seed);

// LBR seed of an arm: derive_seed(seed, arm name).
std::uint64_t arm_seed(std::uint64_t seed, const std::string& arm);

SimulationTrace run_arm(const RunConfig& config, const EnvironmentSpec& env, const ArmConfig& arm,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Traces: one header line, then one JSON object per step.

struct TraceHeader {
  std::uint64_t seed = 0;
  std::string arm;
  MechanismConfig mechanism;
  int num_creators = 0;
  int num_users = 0;
  int dim = 0;
  int epoch_length = 1;
};

std::string trace_to_jsonl(const TraceHeader& header, const SimulationTrace& trace);
SimulationTrace trace_from_jsonl(const std::string& text, TraceHeader* header = nullptr,
                                 const std::string& source = "<trace>");
SimulationTrace read_trace(const std::filesystem::path& path, TraceHeader* header = nullptr);

// Welfare of a stored record recomputed from its strategies and weights;
// nullopt when the record has no strategies.
std::optional<double> recompute_welfare(const StepRecord& record, const EnvironmentSpec& env,
                                        const MechanismConfig& mechanism);

nlohmann::json to_json(const MechanismConfig& mechanism);
MechanismConfig mechanism_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------

struct ArmSummary {
  std::string arm;
  std::string status = "ok";
  std::string error;
  double final_welfare = 0.0;
  bool local_equilibrium = false;
  ExperimentMetrics metrics;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  std::string provenance;
  std::vector<ArmSummary> arms;

  const ArmSummary* find(const std::string& arm) const;
};

nlohmann::json to_json(const SeedSummary& summary);
SeedSummary summary_from_json(const nlohmann::json& doc);

struct RunStatus {
  std::uint64_t seed = 0;
  std::string arm;
  std::string status = "ok";
  std::string error;
};

struct Manifest {
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<RunStatus> runs;
};

nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& doc);

struct ExperimentResult {
  std::vector<SeedSummary> seeds;
  Manifest manifest;
  std::filesystem::path output_dir;

  bool all_ok() const;
};

// Runs every (seed, arm) pair and writes, under the output directory:
//   manifest.json, summary.csv,
//   seed-<s>/environment.json, seed-<s>/summary.json,
//   seed-<s>/<arm>.trace.jsonl, seed-<s>/<arm>.welfare.csv.
// A failing run is recorded in the manifest and does not stop the others.
// Pass write = false to keep everything in memory. The output directory is
// used as given; see resolve_output_dir for the environment override.
ExperimentResult run_experiment(const RunConfig& config, bool write = true);

// seed,arm,status,final_welfare,plateau_relative_change,... rows.
std::string summary_csv(const std::vector<SeedSummary>& seeds);

// Output directory after the CREATORSIM_OUTPUT_DIR override.
std::string resolve_output_dir(const std::string& configured);

// ---------------------------------------------------------------------------
// Named setups for the theory checks.

struct MonotoneCase {
  std::string name;
  UserPopulation population;
  RelevanceDerivatives model;
  std::vector<Vector> samples;
  double tolerance = 1e-9;
};

// "dot_orthogonal": dot-product relevance, users e_1..e_d, samples in the
//   unit ball.
// "bounded_quadratic": c - ||s - x||^2 / 2, users 0.5 e_k, samples in the
//   ball of radius 0.5, so every ||s - x|| <= 1.
// "truncated_linear": the five-user counterexample, samples in [-1.5, 1.5]^2.
MonotoneCase monotone_case(const std::string& name, std::uint64_t seed, int samples = 100);
std::vector<std::string> monotone_case_names();

// Orthogonal-basis instance with n creators and its default check setup:
// UIR, delta 0.1, 200 settle rounds, baseline E=100, M=5 with fixed graded
// weights (0.2, 0.6, 1.0, 1.4, 1.8 for d = 5; alpha 0).
struct GradientCase {
  EnvironmentSpec env;
  GradientCheckOptions options;
};

GradientCase gradient_case(std::uint64_t seed, int num_seeds = 20, int num_creators = 100);

// Uniform points in the d-dimensional ball of the given radius.
std::vector<Vector> ball_samples(int d, double radius, int count, std::uint64_t seed);

}  // namespace creatorsim
