#include "creatorsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "creatorsim/io.hpp"

namespace creatorsim {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& problems) {
  std::string out = "invalid config:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

// One JSON object in the config. Reads known keys, remembers them, and
// reports type errors and leftover keys as problems.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& problems)
      : node_(node), path_(std::move(path)), problems_(problems) {
    if (node_ && !node_->is_object()) {
      problems_.push_back(path_ + ": expected an object");
      node_ = nullptr;
    }
  }

  bool has(const char* key) const { return node_ && node_->contains(key); }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    if (!has(key)) return false;
    try {
      out = node_->at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      problems_.push_back(name(key) + ": wrong type");
      return false;
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void problem(const std::string& key, const std::string& message) { problems_.push_back(name(key) + ": " + message); }

  void finish() {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!seen_.count(item.key())) problems_.push_back(name(item.key()) + ": unknown key");
    }
  }

 private:
  const json* node_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

std::string acceptance_name(AcceptancePoint p) {
  return p == AcceptancePoint::PreProjection ? "pre_projection" : "post_projection";
}

std::string hook_name(UtilityHook h) {
  return h == UtilityHook::ExpectedRelevance ? "expected_relevance" : "sampled_interaction";
}

std::string smt_kind_name(SmtMap::Kind k) { return k == SmtMap::Kind::Linear ? "linear" : "table"; }

std::string hmt_kind_name(HmtMap::Kind k) {
  switch (k) {
    case HmtMap::Kind::CeilScaled: return "ceil_scaled";
    case HmtMap::Kind::CountTable: return "count_table";
    case HmtMap::Kind::PercentileTable: return "percentile_table";
  }
  return "ceil_scaled";
}

json table_to_json(const ThresholdTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back(json::array({std::isinf(r.upper_bound) ? json("inf") : json(r.upper_bound), r.value}));
  }
  return rows;
}

// Rows [[bound, value], ...], the string "production", or a CSV path.
ThresholdTable table_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (doc.is_string()) {
    const auto s = doc.get<std::string>();
    if (s == "production") return production_percentile_table();
    return read_threshold_table(base_dir.empty() ? std::filesystem::path(s) : base_dir / s);
  }
  if (!doc.is_array()) throw ValidationError("threshold table must be rows, a CSV path or \"production\"");
  ThresholdTable table;
  for (const auto& row : doc) {
    if (!row.is_array() || row.size() != 2) throw ValidationError("threshold table rows are [upper_bound, value]");
    const double ub = row[0].is_string() && row[0].get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                                               : row[0].get<double>();
    table.rows.push_back({ub, row[1].get<double>()});
  }
  table.validate();
  return table;
}

bool safe_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
  });
}

std::vector<std::string> config_problems(const RunConfig& c) {
  std::vector<std::string> out;
  if (!(c.dynamics.eta > 0.0) || !std::isfinite(c.dynamics.eta)) out.push_back("dynamics.eta: must be > 0");
  if (c.horizon < 1) out.push_back("dynamics.horizon: must be >= 1");
  if (c.reweight.epochs < 1) out.push_back("reweighting.epochs: must be >= 1");
  if (c.reweight.epoch_length < 1) out.push_back("reweighting.epoch_length: must be >= 1");
  if (c.horizon >= 1 && c.reweight.epochs >= 1 && c.reweight.epoch_length >= 1 &&
      static_cast<long long>(c.reweight.epochs) * c.reweight.epoch_length != c.horizon) {
    out.push_back("T = E * M violated: E=" + std::to_string(c.reweight.epochs) + ", M=" +
                  std::to_string(c.reweight.epoch_length) + ", T=" + std::to_string(c.horizon));
  }
  if (!(c.reweight.w_min > 0.0) || !(c.reweight.w_max >= c.reweight.w_min))
    out.push_back("reweighting: need 0 < w_min <= w_max");
  try {
    c.reweight.alpha.validate();
  } catch (const ValidationError& e) {
    out.push_back(std::string("reweighting.alpha: ") + e.what());
  }
  if (c.seeds.empty()) out.push_back("seeds: must be non-empty");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    out.push_back("seeds: must be distinct");
  if (c.arms.empty()) out.push_back("arms: must be non-empty");
  std::set<std::string> names;
  for (const auto& arm : c.arms) {
    if (!safe_name(arm.name)) out.push_back("arms: name '" + arm.name + "' must be non-empty [A-Za-z0-9_.-]");
    if (!names.insert(arm.name).second) out.push_back("arms: duplicate name '" + arm.name + "'");
    for (double w : arm.initial_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) out.push_back("arms." + arm.name + ".initial_weights: must be positive");
    }
    if (c.environment.groups > 0 && !arm.initial_weights.empty() &&
        static_cast<int>(arm.initial_weights.size()) != c.environment.groups)
      out.push_back("arms." + arm.name + ".initial_weights: expected " + std::to_string(c.environment.groups) + " entries");
  }
  if (c.threads < 0) out.push_back("threads: must be >= 0");
  if (c.lne_window < 1) out.push_back("reweighting.lne_window: must be >= 1");
  if (c.environment.groups < 0) out.push_back("reweighting.groups: must be >= 0");
  if (c.environment.kind == EnvironmentKind::Embedding &&
      (c.environment.user_file.empty() || c.environment.item_file.empty()))
    out.push_back("environment.embedding: user_file and item_file are required");
  if (c.environment.kind == EnvironmentKind::File && c.environment.path.empty())
    out.push_back("environment.file.path: required");
  if (c.output_dir.empty()) out.push_back("output_dir: must be non-empty");
  return out;
}

int default_groups(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::Synthetic: return 20;
    case EnvironmentKind::Embedding: return 15;
    default: return 0;
  }
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base_dir / p).lexically_normal().string();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : ValidationError(join_lines(problems)), problems_(std::move(problems)) {}

std::string to_string(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::Synthetic: return "synthetic";
    case EnvironmentKind::FailureExample: return "failure_example";
    case EnvironmentKind::OrthogonalBasis: return "orthogonal_basis";
    case EnvironmentKind::Embedding: return "embedding";
    case EnvironmentKind::File: return "file";
  }
  return "synthetic";
}

EnvironmentKind environment_kind_from_string(const std::string& name) {
  for (auto k : {EnvironmentKind::Synthetic, EnvironmentKind::FailureExample, EnvironmentKind::OrthogonalBasis,
                 EnvironmentKind::Embedding, EnvironmentKind::File}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown environment kind '" + name +
                        "' (expected synthetic, failure_example, orthogonal_basis, embedding or file)");
}

void RunConfig::validate() const {
  auto problems = config_problems(*this);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

RunConfig default_run_config() {
  RunConfig c;
  c.dynamics.eta = 0.2;
  c.horizon = 3000;
  c.reweight.epoch_length = 5;
  c.reweight.epochs = 600;
  c.environment.groups = default_groups(c.environment.kind);
  for (auto kind : {MechanismKind::None, MechanismKind::UIR, MechanismKind::SMT, MechanismKind::HMT}) {
    c.arms.push_back(ArmConfig{to_string(kind), MechanismConfig{kind, {}, {}}, {}});
  }
  return c;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const MechanismConfig& mechanism) {
  json doc{{"kind", to_string(mechanism.kind)}};
  if (mechanism.kind == MechanismKind::SMT) {
    json map{{"kind", smt_kind_name(mechanism.smt_map.kind)}};
    if (mechanism.smt_map.kind == SmtMap::Kind::Table) map["table"] = table_to_json(mechanism.smt_map.table);
    doc["smt_map"] = map;
  }
  if (mechanism.kind == MechanismKind::HMT) {
    json map{{"kind", hmt_kind_name(mechanism.hmt_map.kind)}};
    if (mechanism.hmt_map.kind != HmtMap::Kind::CeilScaled) map["table"] = table_to_json(mechanism.hmt_map.table);
    doc["hmt_map"] = map;
  }
  return doc;
}

namespace {

MechanismConfig mechanism_from_section(Section& s, const std::filesystem::path& base_dir,
                                       std::vector<std::string>& problems, const std::string& path) {
  MechanismConfig m;
  std::string kind = "none";
  s.get("kind", kind);
  try {
    m.kind = mechanism_from_string(kind);
  } catch (const ValidationError& e) {
    s.problem("kind", e.what());
  }
  if (const json* node = s.child("smt_map")) {
    Section map(node, path + ".smt_map", problems);
    std::string k = "linear";
    map.get("kind", k);
    if (k == "linear") m.smt_map.kind = SmtMap::Kind::Linear;
    else if (k == "table") m.smt_map.kind = SmtMap::Kind::Table;
    else map.problem("kind", "expected linear or table");
    if (const json* t = map.child("table")) {
      try {
        m.smt_map.table = table_from_json(*t, base_dir);
      } catch (const Error& e) {
        map.problem("table", e.what());
      } catch (const json::exception& e) {
        map.problem("table", e.what());
      }
    } else if (m.smt_map.kind == SmtMap::Kind::Table) {
      map.problem("table", "required for kind table");
    }
    map.finish();
  }
  if (const json* node = s.child("hmt_map")) {
    Section map(node, path + ".hmt_map", problems);
    std::string k = "ceil_scaled";
    map.get("kind", k);
    if (k == "ceil_scaled") m.hmt_map.kind = HmtMap::Kind::CeilScaled;
    else if (k == "count_table") m.hmt_map.kind = HmtMap::Kind::CountTable;
    else if (k == "percentile_table") m.hmt_map.kind = HmtMap::Kind::PercentileTable;
    else map.problem("kind", "expected ceil_scaled, count_table or percentile_table");
    if (const json* t = map.child("table")) {
      try {
        m.hmt_map.table = table_from_json(*t, base_dir);
      } catch (const Error& e) {
        map.problem("table", e.what());
      } catch (const json::exception& e) {
        map.problem("table", e.what());
      }
    } else if (m.hmt_map.kind != HmtMap::Kind::CeilScaled) {
      map.problem("table", "required for table kinds");
    }
    map.finish();
  }
  return m;
}

}  // namespace

MechanismConfig mechanism_from_json(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  Section s(&doc, "mechanism", problems);
  auto m = mechanism_from_section(s, {}, problems, "mechanism");
  s.finish();
  if (!problems.empty()) throw ConfigError(problems);
  return m;
}

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  RunConfig c = default_run_config();
  std::vector<std::string> problems;
  Section root(&doc, "", problems);

  int version = kConfigSchemaVersion;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion) root.problem("schema_version", "unsupported version " + std::to_string(version));

  bool groups_given = false;
  if (const json* node = root.child("environment")) {
    Section env(node, "environment", problems);
    std::string kind = "synthetic";
    env.get("kind", kind);
    try {
      c.environment.kind = environment_kind_from_string(kind);
    } catch (const ValidationError& e) {
      env.problem("kind", e.what());
    }
    if (const json* n = env.child("synthetic")) {
      Section s(n, "environment.synthetic", problems);
      auto& o = c.environment.synthetic;
      s.get("dim", o.dim);
      s.get("cluster_sizes", o.cluster_sizes);
      s.get("cluster_std", o.cluster_std);
      s.get("num_creators", o.num_creators);
      s.get("init_noise", o.init_noise);
      s.get("beta", o.beta);
      s.get("K", o.K);
      s.finish();
    }
    if (const json* n = env.child("failure_example")) {
      Section s(n, "environment.failure_example", problems);
      auto& o = c.environment.failure;
      s.get("x_lo", o.x_lo);
      s.get("x_hi", o.x_hi);
      s.get("y_lo", o.y_lo);
      s.get("y_hi", o.y_hi);
      s.get("ball_radius", o.ball_radius);
      s.finish();
    }
    if (const json* n = env.child("orthogonal_basis")) {
      Section s(n, "environment.orthogonal_basis", problems);
      auto& o = c.environment.orthogonal;
      s.get("dim", o.dim);
      s.get("num_creators", o.num_creators);
      s.get("beta", o.beta);
      std::string reward = "traffic";
      if (s.get("reward", reward)) {
        if (reward == "traffic") o.reward = RewardScheme::Traffic;
        else if (reward == "engagement") o.reward = RewardScheme::Engagement;
        else s.problem("reward", "expected engagement or traffic");
      }
      s.finish();
    }
    if (const json* n = env.child("embedding")) {
      Section s(n, "environment.embedding", problems);
      auto& o = c.environment.embedding;
      s.get("user_file", c.environment.user_file);
      s.get("item_file", c.environment.item_file);
      c.environment.user_file = resolve_path(c.environment.user_file, base_dir);
      c.environment.item_file = resolve_path(c.environment.item_file, base_dir);
      s.get("num_creators", o.num_creators);
      s.get("shared_items", o.shared_items);
      s.get("private_items", o.private_items);
      s.get("beta", o.beta);
      s.get("K", o.K);
      s.finish();
    }
    if (const json* n = env.child("file")) {
      Section s(n, "environment.file", problems);
      s.get("path", c.environment.path);
      c.environment.path = resolve_path(c.environment.path, base_dir);
      s.finish();
    }
    env.finish();
  }

  bool horizon_given = false;
  if (const json* node = root.child("dynamics")) {
    Section s(node, "dynamics", problems);
    s.get("eta", c.dynamics.eta);
    horizon_given = s.get("horizon", c.horizon);
    std::string point = "pre_projection";
    if (s.get("acceptance_point", point)) {
      if (point == "pre_projection") c.dynamics.acceptance_point = AcceptancePoint::PreProjection;
      else if (point == "post_projection") c.dynamics.acceptance_point = AcceptancePoint::PostProjection;
      else s.problem("acceptance_point", "expected pre_projection or post_projection");
    }
    s.finish();
  }

  bool epochs_given = false;
  if (const json* node = root.child("reweighting")) {
    Section s(node, "reweighting", problems);
    s.get("adaptive", c.adaptive);
    epochs_given = s.get("epochs", c.reweight.epochs);
    s.get("epoch_length", c.reweight.epoch_length);
    s.get("w_min", c.reweight.w_min);
    s.get("w_max", c.reweight.w_max);
    groups_given = s.get("groups", c.environment.groups);
    s.get("lne_window", c.lne_window);
    s.get("full_fidelity", c.reweight.full_fidelity);
    std::string hook = "expected_relevance";
    if (s.get("utility_hook", hook)) {
      if (hook == "expected_relevance") c.reweight.utility_hook = UtilityHook::ExpectedRelevance;
      else if (hook == "sampled_interaction") c.reweight.utility_hook = UtilityHook::SampledInteraction;
      else s.problem("utility_hook", "expected expected_relevance or sampled_interaction");
    }
    if (const json* a = s.child("alpha")) {
      if (a->is_number()) {
        c.reweight.alpha = AlphaSchedule::constant(a->get<double>());
      } else if (a->is_array()) {
        AlphaSchedule schedule;
        for (const auto& phase : *a) {
          Section p(&phase, "reweighting.alpha[]", problems);
          AlphaSchedule::Phase ph{1.0, 0.0};
          if (!p.get("until", ph.until_fraction)) p.problem("until", "required");
          if (!p.get("alpha", ph.alpha)) p.problem("alpha", "required");
          p.finish();
          schedule.phases.push_back(ph);
        }
        c.reweight.alpha = schedule;
      } else {
        s.problem("alpha", "expected a number or a list of {until, alpha} phases");
      }
    }
    s.finish();
  }
  if (!groups_given) c.environment.groups = default_groups(c.environment.kind);

  if (const json* node = root.child("arms")) {
    if (!node->is_array()) {
      root.problem("arms", "expected a list");
    } else {
      c.arms.clear();
      for (std::size_t k = 0; k < node->size(); ++k) {
        const auto path = "arms[" + std::to_string(k) + "]";
        const json& item = (*node)[k];
        ArmConfig arm;
        if (item.is_string()) {
          arm.name = item.get<std::string>();
          try {
            arm.mechanism.kind = mechanism_from_string(arm.name);
          } catch (const ValidationError& e) {
            problems.push_back(path + ": " + e.what());
          }
        } else {
          Section s(&item, path, problems);
          s.get("name", arm.name);
          if (const json* m = s.child("mechanism")) {
            Section ms(m, path + ".mechanism", problems);
            arm.mechanism = mechanism_from_section(ms, base_dir, problems, path + ".mechanism");
            ms.finish();
          }
          s.get("initial_weights", arm.initial_weights);
          if (arm.name.empty()) arm.name = to_string(arm.mechanism.kind);
          s.finish();
        }
        c.arms.push_back(std::move(arm));
      }
    }
  }

  if (const json* node = root.child("seeds")) {
    try {
      c.seeds = node->get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
      root.problem("seeds", "expected a list of non-negative integers");
    }
  }
  root.get("output_dir", c.output_dir);
  root.get("threads", c.threads);
  root.finish();

  // T = E * M: fill whichever side is missing.
  if (epochs_given && !horizon_given) {
    c.horizon = c.reweight.epochs * c.reweight.epoch_length;
  } else if (!epochs_given && c.reweight.epoch_length >= 1) {
    if (c.horizon % c.reweight.epoch_length != 0) {
      problems.push_back("T = E * M violated: T=" + std::to_string(c.horizon) + " is not a multiple of M=" +
                         std::to_string(c.reweight.epoch_length));
    } else {
      c.reweight.epochs = c.horizon / c.reweight.epoch_length;
    }
  }

  for (auto& p : config_problems(c)) {
    if (std::find(problems.begin(), problems.end(), p) == problems.end()) problems.push_back(std::move(p));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  const auto doc = read_json_file(path);
  return parse_config(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

nlohmann::json config_to_json(const RunConfig& c) {
  json env{{"kind", to_string(c.environment.kind)}};
  switch (c.environment.kind) {
    case EnvironmentKind::Synthetic: {
      const auto& o = c.environment.synthetic;
      env["synthetic"] = {{"dim", o.dim},           {"cluster_sizes", o.cluster_sizes}, {"cluster_std", o.cluster_std},
                          {"num_creators", o.num_creators}, {"init_noise", o.init_noise}, {"beta", o.beta},
                          {"K", o.K}};
      break;
    }
    case EnvironmentKind::FailureExample: {
      const auto& o = c.environment.failure;
      env["failure_example"] = {
          {"x_lo", o.x_lo}, {"x_hi", o.x_hi}, {"y_lo", o.y_lo}, {"y_hi", o.y_hi}, {"ball_radius", o.ball_radius}};
      break;
    }
    case EnvironmentKind::OrthogonalBasis: {
      const auto& o = c.environment.orthogonal;
      env["orthogonal_basis"] = {{"dim", o.dim},
                                 {"num_creators", o.num_creators},
                                 {"beta", o.beta},
                                 {"reward", o.reward == RewardScheme::Traffic ? "traffic" : "engagement"}};
      break;
    }
    case EnvironmentKind::Embedding: {
      const auto& o = c.environment.embedding;
      env["embedding"] = {{"user_file", c.environment.user_file}, {"item_file", c.environment.item_file},
                          {"num_creators", o.num_creators},       {"shared_items", o.shared_items},
                          {"private_items", o.private_items},     {"beta", o.beta},
                          {"K", o.K}};
      break;
    }
    case EnvironmentKind::File: env["file"] = {{"path", c.environment.path}}; break;
  }
  json alpha = json::array();
  for (const auto& p : c.reweight.alpha.phases) alpha.push_back({{"until", p.until_fraction}, {"alpha", p.alpha}});
  json arms = json::array();
  for (const auto& arm : c.arms) {
    json a{{"name", arm.name}, {"mechanism", to_json(arm.mechanism)}};
    if (!arm.initial_weights.empty()) a["initial_weights"] = arm.initial_weights;
    arms.push_back(a);
  }
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"environment", env},
      {"dynamics",
       {{"eta", c.dynamics.eta}, {"horizon", c.horizon}, {"acceptance_point", acceptance_name(c.dynamics.acceptance_point)}}},
      {"reweighting",
       {{"adaptive", c.adaptive},
        {"epochs", c.reweight.epochs},
        {"epoch_length", c.reweight.epoch_length},
        {"alpha", alpha},
        {"w_min", c.reweight.w_min},
        {"w_max", c.reweight.w_max},
        {"groups", c.environment.groups},
        {"utility_hook", hook_name(c.reweight.utility_hook)},
        {"lne_window", c.lne_window},
        {"full_fidelity", c.reweight.full_fidelity}}},
      {"arms", arms},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
  };
}

std::string config_hash(const RunConfig& config) {
  auto doc = config_to_json(config);
  doc.erase("output_dir");
  doc.erase("threads");
  return hex64(fnv1a64(doc.dump()));
}

std::string resolve_output_dir(const std::string& configured) {
  if (const char* env = std::getenv("CREATORSIM_OUTPUT_DIR"); env && *env) return env;
  return configured;
}

// ---------------------------------------------------------------------------

EnvironmentSpec build_environment(const EnvironmentConfig& config, std::uint64_t seed) {
  EnvironmentSpec env;
  switch (config.kind) {
    case EnvironmentKind::Synthetic: env = gen_synthetic(seed, config.synthetic); break;
    case EnvironmentKind::FailureExample: env = failure_example_env(seed, config.failure); break;
    case EnvironmentKind::OrthogonalBasis: env = orthogonal_basis_env(seed, config.orthogonal); break;
    case EnvironmentKind::Embedding: {
      auto options = config.embedding;
      options.seed = seed;
      env = load_embedding_env(config.user_file, config.item_file, options);
      break;
    }
    case EnvironmentKind::File: env = load_environment(config.path); break;
  }
  if (config.groups > 0) kmeans_groups(env.population, config.groups, derive_seed(seed, "groups"));
  env.validate();
  return env;
}

std::uint64_t arm_seed(std::uint64_t seed, const std::string& arm) { return derive_seed(seed, arm); }

SimulationTrace run_arm(const RunConfig& config, const EnvironmentSpec& env, const ArmConfig& arm,
                        std::uint64_t seed) {
  LbrConfig lbr = config.dynamics;
  lbr.rng_seed = arm_seed(seed, arm.name);
  lbr.rounds = config.horizon;
  ReweightConfig rw = config.reweight;
  rw.initial_weights = arm.initial_weights;
  if (!config.adaptive) {
    // Frozen weights: alpha 0 keeps them fixed once they sum to L.
    const int L = env.population.num_groups;
    if (rw.initial_weights.empty()) rw.initial_weights.assign(static_cast<std::size_t>(L), 1.0);
    const double total = std::accumulate(rw.initial_weights.begin(), rw.initial_weights.end(), 0.0);
    for (double& w : rw.initial_weights) w = std::clamp(w * L / total, rw.w_min, rw.w_max);
    rw.alpha = AlphaSchedule::constant(0.0);
  }
  return run_adaptive_reweighting(env, lbr, rw, arm.mechanism);
}

// ---------------------------------------------------------------------------

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json record_json(const StepRecord& rec) {
  json doc{{"step", rec.step},
           {"epoch", rec.epoch},
           {"welfare", rec.welfare},
           {"weights", rec.weights},
           {"group_utilities", rec.group_utilities},
           {"accepted", rec.accepted},
           {"improved", rec.improved}};
  if (rec.strategies) {
    json s = json::array();
    for (const auto& v : *rec.strategies) s.push_back(vector_json(v));
    doc["strategies"] = s;
  }
  return doc;
}

}  // namespace

std::string trace_to_jsonl(const TraceHeader& header, const SimulationTrace& trace) {
  std::string out;
  out += json{{"kind", "trace_header"},
              {"schema_version", kTraceSchemaVersion},
              {"seed", header.seed},
              {"arm", header.arm},
              {"mechanism", to_json(header.mechanism)},
              {"num_creators", header.num_creators},
              {"num_users", header.num_users},
              {"dim", header.dim},
              {"epoch_length", header.epoch_length}}
             .dump();
  out += '\n';
  for (const auto& rec : trace.records) {
    out += record_json(rec).dump();
    out += '\n';
  }
  json strategies = json::array();
  json positions = json::array();
  for (const auto& c : trace.final_creators) {
    strategies.push_back(vector_json(c.strategy));
    positions.push_back(c.catalog_position);
  }
  out += json{{"kind", "trace_footer"},
              {"final_weights", trace.final_weights},
              {"final_user_utilities", trace.final_user_utilities},
              {"final_strategies", strategies},
              {"final_catalog_positions", positions}}
             .dump();
  out += '\n';
  return out;
}

SimulationTrace trace_from_jsonl(const std::string& text, TraceHeader* header, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  SimulationTrace trace;
  bool have_header = false;
  bool have_footer = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (have_footer) throw ParseError(source, lineno, "content after trace footer");
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, e.what());
    }
    try {
      if (!have_header) {
        if (doc.value("kind", "") != "trace_header") throw ParseError(source, lineno, "expected trace_header");
        if (doc.at("schema_version").get<int>() != kTraceSchemaVersion)
          throw ParseError(source, lineno, "unsupported trace schema_version");
        if (header) {
          header->seed = doc.at("seed").get<std::uint64_t>();
          header->arm = doc.at("arm").get<std::string>();
          header->mechanism = mechanism_from_json(doc.at("mechanism"));
          header->num_creators = doc.at("num_creators").get<int>();
          header->num_users = doc.at("num_users").get<int>();
          header->dim = doc.at("dim").get<int>();
          header->epoch_length = doc.at("epoch_length").get<int>();
        }
        have_header = true;
        continue;
      }
      if (doc.value("kind", "") == "trace_footer") {
        trace.final_weights = doc.at("final_weights").get<std::vector<double>>();
        trace.final_user_utilities = doc.at("final_user_utilities").get<std::vector<double>>();
        const auto& strategies = doc.at("final_strategies");
        const auto positions = doc.at("final_catalog_positions").get<std::vector<int>>();
        if (positions.size() != strategies.size()) throw ParseError(source, lineno, "footer size mismatch");
        for (std::size_t i = 0; i < strategies.size(); ++i) {
          CreatorState c;
          c.strategy = vector_from(strategies[i]);
          c.catalog_position = positions[i];
          trace.final_creators.push_back(std::move(c));
        }
        have_footer = true;
        continue;
      }
      StepRecord rec;
      rec.step = doc.at("step").get<int>();
      rec.epoch = doc.at("epoch").get<int>();
      rec.welfare = doc.at("welfare").get<double>();
      rec.weights = doc.at("weights").get<std::vector<double>>();
      rec.group_utilities = doc.at("group_utilities").get<std::vector<double>>();
      rec.accepted = doc.at("accepted").get<std::vector<std::uint8_t>>();
      rec.improved = doc.at("improved").get<std::vector<std::uint8_t>>();
      if (doc.contains("strategies")) {
        std::vector<Vector> s;
        for (const auto& v : doc.at("strategies")) s.push_back(vector_from(v));
        rec.strategies = std::move(s);
      }
      if (!trace.records.empty() && rec.step <= trace.records.back().step)
        throw ParseError(source, lineno, "step indices must increase");
      trace.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  if (!have_header) throw ParseError(source, 0, "missing trace_header");
  if (!have_footer) throw ParseError(source, 0, "missing trace_footer (truncated trace?)");
  return trace;
}

SimulationTrace read_trace(const std::filesystem::path& path, TraceHeader* header) {
  return trace_from_jsonl(read_text_file(path), header, path.string());
}

std::optional<double> recompute_welfare(const StepRecord& record, const EnvironmentSpec& env,
                                        const MechanismConfig& mechanism) {
  if (!record.strategies) return std::nullopt;
  if (static_cast<int>(record.strategies->size()) != env.num_creators())
    throw DimensionError("recompute_welfare strategies", env.num_creators(), static_cast<long>(record.strategies->size()));
  auto creators = env.creators;
  for (std::size_t i = 0; i < creators.size(); ++i) creators[i].strategy = (*record.strategies)[i];
  const GroupWeights weights{record.weights, 0.0, std::numeric_limits<double>::infinity()};
  const auto deployment = deploy(mechanism, weights, env.population, env.matching, env.num_creators());
  return welfare(creators, env.population, env.relevance, deployment.plan);
}

// ---------------------------------------------------------------------------

const ArmSummary* SeedSummary::find(const std::string& arm) const {
  for (const auto& a : arms) {
    if (a.arm == arm) return &a;
  }
  return nullptr;
}

nlohmann::json to_json(const SeedSummary& summary) {
  json arms = json::array();
  for (const auto& a : summary.arms) {
    json doc{{"arm", a.arm}, {"status", a.status}};
    if (a.status == "ok") {
      doc["final_welfare"] = a.final_welfare;
      doc["local_equilibrium"] = a.local_equilibrium;
      doc["metrics"] = to_json(a.metrics);
    } else {
      doc["error"] = a.error;
    }
    arms.push_back(doc);
  }
  return json{{"kind", "summary"},
              {"schema_version", kSummarySchemaVersion},
              {"seed", summary.seed},
              {"provenance", summary.provenance},
              {"arms", arms}};
}

SeedSummary summary_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind").get<std::string>() != "summary") throw ParseError("summary", 0, "kind must be summary");
    if (doc.at("schema_version").get<int>() != kSummarySchemaVersion)
      throw ParseError("summary", 0, "unsupported schema_version");
    SeedSummary s;
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.provenance = doc.at("provenance").get<std::string>();
    for (const auto& a : doc.at("arms")) {
      ArmSummary arm;
      arm.arm = a.at("arm").get<std::string>();
      arm.status = a.at("status").get<std::string>();
      if (arm.status == "ok") {
        arm.final_welfare = a.at("final_welfare").get<double>();
        arm.local_equilibrium = a.at("local_equilibrium").get<bool>();
        arm.metrics = metrics_from_json(a.at("metrics"));
      } else {
        arm.error = a.at("error").get<std::string>();
      }
      s.arms.push_back(std::move(arm));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError("summary", 0, e.what());
  }
}

nlohmann::json to_json(const Manifest& manifest) {
  json runs = json::array();
  for (const auto& r : manifest.runs) {
    json doc{{"seed", r.seed}, {"arm", r.arm}, {"status", r.status}};
    if (!r.error.empty()) doc["error"] = r.error;
    runs.push_back(doc);
  }
  return json{{"kind", "manifest"},
              {"schema_version", kManifestSchemaVersion},
              {"config_hash", manifest.config_hash},
              {"config", manifest.config},
              {"seeds", manifest.seeds},
              {"schema_versions",
               {{"config", kConfigSchemaVersion},
                {"trace", kTraceSchemaVersion},
                {"summary", kSummarySchemaVersion},
                {"manifest", kManifestSchemaVersion},
                {"environment", kEnvironmentSchemaVersion},
                {"report", kReportSchemaVersion}}},
              {"runs", runs}};
}

Manifest manifest_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind").get<std::string>() != "manifest") throw ParseError("manifest", 0, "kind must be manifest");
    if (doc.at("schema_version").get<int>() != kManifestSchemaVersion)
      throw ParseError("manifest", 0, "unsupported schema_version");
    Manifest m;
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.config = doc.at("config");
    m.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& r : doc.at("runs")) {
      m.runs.push_back(RunStatus{r.at("seed").get<std::uint64_t>(), r.at("arm").get<std::string>(),
                                 r.at("status").get<std::string>(), r.value("error", std::string())});
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError("manifest", 0, e.what());
  }
}

bool ExperimentResult::all_ok() const {
  return std::all_of(manifest.runs.begin(), manifest.runs.end(), [](const RunStatus& r) { return r.status == "ok"; });
}

std::string summary_csv(const std::vector<SeedSummary>& seeds) {
  std::ostringstream out;
  out.precision(17);
  out << "seed,arm,status,final_welfare,plateau_relative_change,plateaued,local_equilibrium,"
         "weight_size_spearman,utility_size_spearman,true_weight_size_spearman,true_utility_size_spearman\n";
  for (const auto& s : seeds) {
    for (const auto& a : s.arms) {
      out << s.seed << ',' << a.arm << ',' << a.status;
      if (a.status == "ok") {
        const auto& m = a.metrics;
        out << ',' << a.final_welfare << ',' << m.plateau_relative_change << ',' << (m.plateaued ? 1 : 0) << ','
            << (a.local_equilibrium ? 1 : 0) << ',' << m.weight_size_spearman << ',' << m.utility_size_spearman << ','
            << m.true_weight_size_spearman << ',' << m.true_utility_size_spearman;
      } else {
        out << ",,,,,,,,";
      }
      out << '\n';
    }
  }
  return out.str();
}

ExperimentResult run_experiment(const RunConfig& config, bool write) {
  config.validate();
  ExperimentResult result;
  result.output_dir = config.output_dir;
  const auto& dir = result.output_dir;
  const std::size_t num_arms = config.arms.size();
  const std::size_t jobs = config.seeds.size() * num_arms;

  struct JobResult {
    ArmSummary summary;
    std::string provenance;
    std::optional<EnvironmentSpec> env;
  };
  std::vector<JobResult> results(jobs);
  std::atomic<std::size_t> next{0};

  auto seed_dir = [&](std::uint64_t seed) { return dir / ("seed-" + std::to_string(seed)); };

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs; k = next++) {
      const auto seed = config.seeds[k / num_arms];
      const auto& arm = config.arms[k % num_arms];
      auto& out = results[k];
      out.summary.arm = arm.name;
      try {
        auto env = build_environment(config.environment, seed);
        out.provenance = env.provenance;
        auto trace = run_arm(config, env, arm, seed);
        out.summary.final_welfare = trace.final_welfare();
        out.summary.local_equilibrium = detect_local_equilibrium(trace.records, config.lne_window);
        out.summary.metrics = experiment_metrics(trace, env);
        if (write) {
          TraceHeader header{seed,           arm.name,         arm.mechanism, env.num_creators(),
                             env.population.size(), env.population.dim(), config.reweight.epoch_length};
          write_file_atomic(seed_dir(seed) / (arm.name + ".trace.jsonl"), trace_to_jsonl(header, trace));
          write_file_atomic(seed_dir(seed) / (arm.name + ".welfare.csv"), welfare_curve_csv(out.summary.metrics));
        }
        if (k % num_arms == 0) out.env = std::move(env);
      } catch (const std::exception& e) {
        out.summary.status = "failed";
        out.summary.error = e.what();
      }
    }
  };

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(jobs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  result.manifest.config = config_to_json(config);
  result.manifest.config.erase("output_dir");
  result.manifest.config.erase("threads");
  result.manifest.config_hash = config_hash(config);
  result.manifest.seeds = config.seeds;
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    SeedSummary summary;
    summary.seed = config.seeds[s];
    for (std::size_t a = 0; a < num_arms; ++a) {
      auto& job = results[s * num_arms + a];
      if (summary.provenance.empty()) summary.provenance = job.provenance;
      result.manifest.runs.push_back(RunStatus{summary.seed, job.summary.arm, job.summary.status, job.summary.error});
      summary.arms.push_back(std::move(job.summary));
    }
    if (write) {
      if (results[s * num_arms].env) save_environment(seed_dir(summary.seed) / "environment.json", *results[s * num_arms].env);
      write_file_atomic(seed_dir(summary.seed) / "summary.json", to_json(summary).dump(2) + "\n");
    }
    result.seeds.push_back(std::move(summary));
  }
  if (write) {
    write_file_atomic(dir / "summary.csv", summary_csv(result.seeds));
    write_file_atomic(dir / "manifest.json", to_json(result.manifest).dump(2) + "\n");
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<Vector> ball_samples(int d, double radius, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const Vector dir = rng.unit_direction(d);
    out.push_back(dir * radius * std::pow(unit(rng.engine()), 1.0 / d));
  }
  return out;
}

std::vector<std::string> monotone_case_names() { return {"dot_orthogonal", "bounded_quadratic", "truncated_linear"}; }

MonotoneCase monotone_case(const std::string& name, std::uint64_t seed, int samples) {
  if (samples < 1) throw ValidationError("monotone_case: need at least one sample");
  MonotoneCase out;
  out.name = name;
  if (name == "dot_orthogonal") {
    const auto env = orthogonal_basis_env(seed);
    out.population = env.population;
    out.model = derivatives_of(env.relevance);
    out.samples = ball_samples(env.population.dim(), 1.0, samples, derive_seed(seed, "samples"));
  } else if (name == "bounded_quadratic") {
    const int d = 5;
    out.population = UserPopulation::uniform(0.5 * Matrix::Identity(d, d));
    out.model = quadratic_relevance(1.0);
    out.samples = ball_samples(d, 0.5, samples, derive_seed(seed, "samples"));
  } else if (name == "truncated_linear") {
    const auto env = failure_example_env(seed);
    out.population = env.population;
    out.model = derivatives_of(env.relevance);
    std::mt19937_64 engine(derive_seed(seed, "samples"));
    std::uniform_real_distribution<double> box(-1.5, 1.5);
    for (int k = 0; k < samples; ++k) out.samples.push_back(Vector{{box(engine), box(engine)}});
  } else {
    throw ValidationError("unknown monotone case '" + name + "' (expected dot_orthogonal, bounded_quadratic or truncated_linear)");
  }
  return out;
}

GradientCase gradient_case(std::uint64_t seed, int num_seeds, int num_creators) {
  if (num_seeds < 1) throw ValidationError("gradient_case: need at least one seed");
  GradientCase out;
  OrthogonalBasisOptions options;
  options.num_creators = num_creators;
  out.env = orthogonal_basis_env(seed, options);
  auto& o = out.options;
  o.perturbation.delta = 0.1;
  o.perturbation.settle_rounds = 200;
  o.perturbation.dynamics.eta = 0.2;
  o.perturbation.mechanism = MechanismConfig{MechanismKind::UIR, {}, {}};
  o.baseline.epochs = 100;
  o.baseline.epoch_length = 5;
  o.baseline.alpha = AlphaSchedule::constant(0.0);
  // Graded weights 1 + 0.4 (l - (d - 1) / 2): uniform weights are a symmetric
  // stationary point of W where every group is served alike.
  const int d = out.env.population.num_groups;
  for (int l = 0; l < d; ++l) {
    o.baseline.initial_weights.push_back(std::max(0.05, 1.0 + 0.4 * (l - 0.5 * (d - 1))));
  }
  for (int k = 0; k < num_seeds; ++k) o.seeds.push_back(derive_seed(seed, "gradient-" + std::to_string(k)));
  return out;
}

}  // namespace creatorsim
