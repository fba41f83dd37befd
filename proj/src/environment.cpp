#include "creatorsim/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "creatorsim/io.hpp"

namespace creatorsim {

namespace {

Vector random_on_sphere(int d, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  double norm = 0.0;
  do {
    for (int k = 0; k < d; ++k) v[k] = normal(engine);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

Vector random_in_ball(int d, double radius, std::mt19937_64& engine) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vector dir = random_on_sphere(d, engine);
  return dir * (radius * std::pow(unit(engine), 1.0 / d));
}

}  // namespace

void EnvironmentSpec::validate() const {
  population.validate();
  if (creators.empty()) throw ValidationError("environment needs at least one creator");
  validate_relevance_model(relevance);
  validate_matching(matching, num_creators());
  const int d = population.dim();
  for (std::size_t i = 0; i < creators.size(); ++i) {
    const auto& c = creators[i];
    validate_strategy_set(c.strategy_set, d);
    if (c.strategy.size() != d) throw DimensionError("creator " + std::to_string(i) + " strategy", d, c.strategy.size());
    if (!is_member(c)) throw ValidationError("creator " + std::to_string(i) + " strategy is outside its strategy set");
  }
  if (!true_labels.empty() && static_cast<int>(true_labels.size()) != population.size())
    throw DimensionError("environment true_labels", population.size(), static_cast<long>(true_labels.size()));

  if (const auto* dot = std::get_if<DotProduct>(&relevance)) {
    // Catalog instances must score every offered item inside [0, 1].
    for (const auto& c : creators) {
      const auto* cat = std::get_if<CatalogSet>(&c.strategy_set);
      if (!cat) continue;
      for (int idx : cat->indices) {
        const Vector s = (population.embeddings.transpose() * cat->items->col(idx)).array() - dot->offset;
        const double lo = s.minCoeff() / dot->scale;
        const double hi = s.maxCoeff() / dot->scale;
        if (lo < -1e-9 || hi > 1.0 + 1e-9)
          throw ValidationError("dot-product relevance leaves [0, 1] on catalog item " + std::to_string(idx));
      }
    }
  }
}

std::vector<std::string> EnvironmentSpec::warnings() const {
  std::vector<std::string> out;
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&relevance)) {
    if (tld->c0 > 1.0)
      out.push_back("truncated linear relevance reaches " + std::to_string(tld->c0) + ", above the usual [0, 1] range");
  }
  return out;
}

EnvironmentSpec failure_example_env(std::uint64_t seed, const FailureExampleOptions& options) {
  EnvironmentSpec env;
  Matrix users(2, 5);
  users << 0.0, 1.0, 0.0, -1.0, 0.0,
           0.0, 0.0, 1.0, 0.0, -1.0;
  env.population = UserPopulation::uniform(users);
  env.population.num_groups = 5;
  std::iota(env.population.group_of.begin(), env.population.group_of.end(), 0);
  env.true_labels = env.population.group_of;
  env.relevance = TruncatedLinearDistance{2.0, 1.0};
  env.matching = MatchingParams{3, 10.0};
  env.reward = RewardScheme::Engagement;
  env.seed = seed;
  env.provenance = "failure_example";

  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> ux(options.x_lo, options.x_hi);
  std::uniform_real_distribution<double> uy(options.y_lo, options.y_hi);
  for (int i = 0; i < 5; ++i) {
    CreatorState c;
    c.strategy_set = BallSet{options.ball_radius, Vector::Zero(2)};
    c.strategy = Vector(2);
    c.strategy[0] = ux(engine);
    c.strategy[1] = uy(engine);
    env.creators.push_back(std::move(c));
  }
  return env;
}

EnvironmentSpec gen_synthetic(std::uint64_t seed, const SyntheticOptions& options) {
  if (options.dim < 1 || options.cluster_sizes.empty() || options.num_creators < 1)
    throw ValidationError("gen_synthetic: bad options");
  std::mt19937_64 engine(seed);
  const int d = options.dim;
  const int clusters = static_cast<int>(options.cluster_sizes.size());
  std::vector<Vector> centers;
  for (int c = 0; c < clusters; ++c) centers.push_back(random_on_sphere(d, engine));

  const int m = std::accumulate(options.cluster_sizes.begin(), options.cluster_sizes.end(), 0);
  Matrix users(d, m);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(m));
  std::normal_distribution<double> noise(0.0, options.cluster_std);
  int col = 0;
  for (int c = 0; c < clusters; ++c) {
    for (int u = 0; u < options.cluster_sizes[static_cast<std::size_t>(c)]; ++u) {
      for (int k = 0; k < d; ++k) users(k, col) = centers[static_cast<std::size_t>(c)][k] + noise(engine);
      labels.push_back(c);
      ++col;
    }
  }

  EnvironmentSpec env;
  env.population = UserPopulation::uniform(std::move(users));
  // Ground-truth groups until a grouping (k-means) is applied.
  env.population.group_of = labels;
  env.population.num_groups = clusters;
  env.true_labels = labels;
  env.relevance = TruncatedLinearDistance{1.0, 3.0};
  env.matching = MatchingParams{options.K, options.beta};
  env.reward = RewardScheme::Engagement;
  env.seed = seed;
  env.provenance = "synthetic";

  const auto largest = static_cast<std::size_t>(
      std::max_element(options.cluster_sizes.begin(), options.cluster_sizes.end()) - options.cluster_sizes.begin());
  std::normal_distribution<double> jitter(0.0, options.init_noise);
  const StrategySet ball = BallSet{1.0, Vector::Zero(d)};
  for (int i = 0; i < options.num_creators; ++i) {
    Vector s = centers[largest];
    for (int k = 0; k < d; ++k) s[k] += jitter(engine);
    const double r = s.norm();
    if (r > 1.0) s /= r;
    env.creators.push_back(CreatorState{s, ball, -1});
  }
  return env;
}

EnvironmentSpec orthogonal_basis_env(std::uint64_t seed, const OrthogonalBasisOptions& options) {
  const int d = options.dim;
  if (d < 1 || options.num_creators < 1) throw ValidationError("orthogonal_basis_env: bad options");
  EnvironmentSpec env;
  env.population = UserPopulation::uniform(Matrix::Identity(d, d));
  env.population.num_groups = d;
  std::iota(env.population.group_of.begin(), env.population.group_of.end(), 0);
  env.true_labels = env.population.group_of;
  env.relevance = DotProduct{-1.0, 2.0};
  env.matching = MatchingParams{options.num_creators, options.beta};
  env.reward = options.reward;
  env.seed = seed;
  env.provenance = "orthogonal_basis";
  std::mt19937_64 engine(seed);
  const StrategySet ball = BallSet{1.0, Vector::Zero(d)};
  for (int i = 0; i < options.num_creators; ++i) {
    env.creators.push_back(CreatorState{random_in_ball(d, 1.0, engine), ball, -1});
  }
  return env;
}

// ---------------------------------------------------------------------------

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  const std::string source = path.string();
  if (!in) throw ParseError(source, 0, "cannot open file");
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
  };

  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  ++lineno;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split(trim(line));
  if (header.size() < 2 || trim(header[0]) != "id") throw ParseError(source, lineno, "header must be id,dim0,...");
  const int d = static_cast<int>(header.size()) - 1;
  for (int k = 0; k < d; ++k) {
    if (trim(header[static_cast<std::size_t>(k) + 1]) != "dim" + std::to_string(k))
      throw ParseError(source, lineno, "header column " + std::to_string(k + 1) + " must be dim" + std::to_string(k));
  }

  EmbeddingTable table;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != d + 1)
      throw ParseError(source, lineno, "expected " + std::to_string(d + 1) + " columns, found " + std::to_string(cells.size()));
    const std::string id = trim(cells[0]);
    if (id.empty()) throw ParseError(source, lineno, "empty id");
    if (!seen.insert(id).second) throw ParseError(source, lineno, "duplicate id '" + id + "'");
    for (int k = 0; k < d; ++k) {
      const std::string cell = trim(cells[static_cast<std::size_t>(k) + 1]);
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError(source, lineno, "bad number '" + cell + "' in column dim" + std::to_string(k));
      values.push_back(v);
    }
    table.ids.push_back(id);
  }
  if (table.ids.empty()) throw ParseError(source, lineno, "no rows");
  table.values = Eigen::Map<const Matrix>(values.data(), d, static_cast<Eigen::Index>(table.ids.size()));
  return table;
}

void write_embedding_csv(const std::filesystem::path& path, const EmbeddingTable& table) {
  if (static_cast<Eigen::Index>(table.ids.size()) != table.values.cols())
    throw DimensionError("write_embedding_csv ids", table.values.cols(), static_cast<long>(table.ids.size()));
  std::ostringstream out;
  out << "id";
  for (Eigen::Index k = 0; k < table.values.rows(); ++k) out << ",dim" << k;
  out << '\n';
  char buf[64];
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    out << table.ids[static_cast<std::size_t>(c)];
    for (Eigen::Index k = 0; k < table.values.rows(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), table.values(k, c));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

EnvironmentSpec load_embedding_env(const std::filesystem::path& user_file, const std::filesystem::path& item_file,
                                   const EmbeddingEnvOptions& options) {
  const auto users = read_embedding_csv(user_file);
  const auto items = read_embedding_csv(item_file);
  if (users.values.rows() != items.values.rows())
    throw DimensionError("embedding files", users.values.rows(), items.values.rows());
  const int num_items = static_cast<int>(items.values.cols());
  if (options.num_creators < 1) throw ValidationError("load_embedding_env: need at least one creator");
  if (options.shared_items < 1 || options.shared_items > num_items)
    throw ValidationError("load_embedding_env: shared_items=" + std::to_string(options.shared_items) +
                          " exceeds the " + std::to_string(num_items) + " items available");
  if (options.private_items < 0 || options.private_items > num_items - options.shared_items)
    throw ValidationError("load_embedding_env: not enough non-shared items for private_items=" +
                          std::to_string(options.private_items));

  // Min-max normalization over the full user x item score grid.
  const Matrix grid = items.values.transpose() * users.values;  // items x users
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  if (!(hi > lo)) throw ValidationError("load_embedding_env: degenerate score grid (max == min)");

  EnvironmentSpec env;
  env.population = UserPopulation::uniform(users.values);
  env.relevance = DotProduct{lo, hi - lo};
  env.matching = MatchingParams{std::min(options.K, options.num_creators), options.beta};
  env.reward = RewardScheme::Engagement;
  env.seed = options.seed;
  env.provenance = "embedding:" + user_file.filename().string() + "," + item_file.filename().string();

  // Start everyone at the shared item with the highest mean score.
  const Vector mean_score = grid.rowwise().mean();
  int start = 0;
  for (int t = 1; t < options.shared_items; ++t) {
    if (mean_score[t] > mean_score[start]) start = t;
  }

  auto table = std::make_shared<const Matrix>(items.values);
  std::vector<int> pool(static_cast<std::size_t>(num_items - options.shared_items));
  std::iota(pool.begin(), pool.end(), options.shared_items);
  std::mt19937_64 engine(options.seed);
  for (int i = 0; i < options.num_creators; ++i) {
    CatalogSet cat;
    cat.items = table;
    cat.shared_count = options.shared_items;
    cat.indices.resize(static_cast<std::size_t>(options.shared_items));
    std::iota(cat.indices.begin(), cat.indices.end(), 0);
    std::vector<int> picked;
    std::sample(pool.begin(), pool.end(), std::back_inserter(picked), options.private_items, engine);
    cat.indices.insert(cat.indices.end(), picked.begin(), picked.end());
    CreatorState c;
    c.strategy = table->col(start);
    c.catalog_position = start;
    c.strategy_set = std::move(cat);
    env.creators.push_back(std::move(c));
  }
  return env;
}

// ---------------------------------------------------------------------------

KMeansResult kmeans(const Matrix& points, int L, std::uint64_t seed, int max_iters) {
  const int m = static_cast<int>(points.cols());
  const int d = static_cast<int>(points.rows());
  if (L < 1 || L > m) throw ValidationError("kmeans: need 1 <= L <= m (L=" + std::to_string(L) + ", m=" + std::to_string(m) + ")");
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  KMeansResult res;
  res.centers.resize(d, L);
  std::vector<double> d2(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(m), 0);
  int first = std::uniform_int_distribution<int>(0, m - 1)(engine);
  res.centers.col(0) = points.col(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  for (int c = 1; c < L; ++c) {
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      d2[static_cast<std::size_t>(j)] = std::min(d2[static_cast<std::size_t>(j)], (points.col(j) - res.centers.col(c - 1)).squaredNorm());
      total += d2[static_cast<std::size_t>(j)];
    }
    int pick = -1;
    if (total > 0.0) {
      const double target = unit(engine) * total;
      double acc = 0.0;
      for (int j = 0; j < m; ++j) {
        acc += d2[static_cast<std::size_t>(j)];
        if (acc > target && d2[static_cast<std::size_t>(j)] > 0.0) {
          pick = j;
          break;
        }
      }
    }
    if (pick < 0) {
      // Fewer distinct points than clusters: take the first unused point.
      for (int j = 0; j < m; ++j) {
        if (!chosen[static_cast<std::size_t>(j)]) {
          pick = j;
          break;
        }
      }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    res.centers.col(c) = points.col(pick);
  }

  res.assignment.assign(static_cast<std::size_t>(m), -1);
  std::vector<double> dist(static_cast<std::size_t>(m), 0.0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (int j = 0; j < m; ++j) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < L; ++c) {
        const double dd = (points.col(j) - res.centers.col(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      dist[static_cast<std::size_t>(j)] = best_d;
      if (res.assignment[static_cast<std::size_t>(j)] != best) {
        res.assignment[static_cast<std::size_t>(j)] = best;
        changed = true;
      }
    }
    // Repair empty clusters with the farthest point of a multi-member cluster.
    std::vector<int> counts(static_cast<std::size_t>(L), 0);
    for (int a : res.assignment) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < L; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      int far = -1;
      for (int j = 0; j < m; ++j) {
        if (counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(j)])] < 2) continue;
        if (far < 0 || dist[static_cast<std::size_t>(j)] > dist[static_cast<std::size_t>(far)]) far = j;
      }
      --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      dist[static_cast<std::size_t>(far)] = 0.0;
      changed = true;
    }
    Matrix sums = Matrix::Zero(d, L);
    for (int j = 0; j < m; ++j) sums.col(res.assignment[static_cast<std::size_t>(j)]) += points.col(j);
    for (int c = 0; c < L; ++c) res.centers.col(c) = sums.col(c) / counts[static_cast<std::size_t>(c)];
    res.iterations = it + 1;
    if (!changed) break;
  }
  res.inertia = 0.0;
  for (int j = 0; j < m; ++j) {
    res.inertia += (points.col(j) - res.centers.col(res.assignment[static_cast<std::size_t>(j)])).squaredNorm();
  }
  return res;
}

KMeansResult kmeans_groups(UserPopulation& population, int L, std::uint64_t seed, int max_iters) {
  auto res = kmeans(population.embeddings, L, seed, max_iters);
  population.group_of = res.assignment;
  population.num_groups = L;
  return res;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vector_json(m.col(c)));
  return cols;
}

Matrix matrix_from(const nlohmann::json& j, Eigen::Index rows) {
  Matrix m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Vector v = vector_from(j[c]);
    if (v.size() != rows) throw DimensionError("snapshot matrix column", rows, v.size());
    m.col(static_cast<Eigen::Index>(c)) = v;
  }
  return m;
}

}  // namespace

nlohmann::json environment_to_json(const EnvironmentSpec& env) {
  nlohmann::json doc;
  doc["schema_version"] = kEnvironmentSchemaVersion;
  doc["provenance"] = env.provenance;
  doc["seed"] = env.seed;
  doc["population"] = {
      {"dim", env.population.dim()},
      {"embeddings", matrix_json(env.population.embeddings)},
      {"group_of", env.population.group_of},
      {"num_groups", env.population.num_groups},
      {"mass", vector_json(env.population.mass)},
  };
  doc["true_labels"] = env.true_labels;
  if (const auto* tld = std::get_if<TruncatedLinearDistance>(&env.relevance)) {
    doc["relevance"] = {{"kind", "truncated_linear_distance"}, {"c0", tld->c0}, {"c1", tld->c1}};
  } else {
    const auto& dot = std::get<DotProduct>(env.relevance);
    doc["relevance"] = {{"kind", "dot_product"}, {"offset", dot.offset}, {"scale", dot.scale}};
  }
  doc["matching"] = {{"K", env.matching.K}};
  if (env.matching.beta == MatchingParams::kUniformLimit) {
    doc["matching"]["beta"] = "uniform";
  } else {
    doc["matching"]["beta"] = env.matching.beta;
  }
  doc["reward"] = env.reward == RewardScheme::Engagement ? "engagement" : "traffic";

  std::shared_ptr<const Matrix> items;
  nlohmann::json creators = nlohmann::json::array();
  for (const auto& c : env.creators) {
    nlohmann::json jc;
    jc["strategy"] = vector_json(c.strategy);
    if (const auto* ball = std::get_if<BallSet>(&c.strategy_set)) {
      jc["set"] = {{"kind", "ball"}, {"radius", ball->radius}, {"center", vector_json(ball->center)}};
    } else {
      const auto& cat = std::get<CatalogSet>(c.strategy_set);
      if (items && items != cat.items && *items != *cat.items)
        throw ValidationError("snapshot supports a single shared item table");
      items = cat.items;
      jc["set"] = {{"kind", "catalog"}, {"indices", cat.indices}, {"shared_count", cat.shared_count}};
      jc["catalog_position"] = c.catalog_position;
    }
    creators.push_back(std::move(jc));
  }
  doc["creators"] = std::move(creators);
  if (items) doc["items"] = matrix_json(*items);
  return doc;
}

EnvironmentSpec environment_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kEnvironmentSchemaVersion)
      throw ParseError("environment snapshot", 0, "unsupported schema_version " + std::to_string(version));
    EnvironmentSpec env;
    env.provenance = doc.value("provenance", "");
    env.seed = doc.value("seed", std::uint64_t{0});
    const auto& pop = doc.at("population");
    const int d = pop.at("dim").get<int>();
    env.population.embeddings = matrix_from(pop.at("embeddings"), d);
    env.population.group_of = pop.at("group_of").get<std::vector<int>>();
    env.population.num_groups = pop.at("num_groups").get<int>();
    env.population.mass = vector_from(pop.at("mass"));
    env.true_labels = doc.value("true_labels", std::vector<int>{});
    const auto& rel = doc.at("relevance");
    const auto kind = rel.at("kind").get<std::string>();
    if (kind == "truncated_linear_distance") {
      env.relevance = TruncatedLinearDistance{rel.at("c0").get<double>(), rel.at("c1").get<double>()};
    } else if (kind == "dot_product") {
      env.relevance = DotProduct{rel.at("offset").get<double>(), rel.at("scale").get<double>()};
    } else {
      throw ParseError("environment snapshot", 0, "unknown relevance kind '" + kind + "'");
    }
    const auto& match = doc.at("matching");
    env.matching.K = match.at("K").get<int>();
    if (match.at("beta").is_string()) {
      if (match.at("beta").get<std::string>() != "uniform") throw ParseError("environment snapshot", 0, "bad beta");
      env.matching.beta = MatchingParams::kUniformLimit;
    } else {
      env.matching.beta = match.at("beta").get<double>();
    }
    const auto reward = doc.at("reward").get<std::string>();
    if (reward != "engagement" && reward != "traffic") throw ParseError("environment snapshot", 0, "unknown reward '" + reward + "'");
    env.reward = reward == "engagement" ? RewardScheme::Engagement : RewardScheme::Traffic;
    std::shared_ptr<const Matrix> items;
    if (doc.contains("items")) items = std::make_shared<const Matrix>(matrix_from(doc.at("items"), d));
    for (const auto& jc : doc.at("creators")) {
      CreatorState c;
      c.strategy = vector_from(jc.at("strategy"));
      const auto& set = jc.at("set");
      const auto set_kind = set.at("kind").get<std::string>();
      if (set_kind == "ball") {
        c.strategy_set = BallSet{set.at("radius").get<double>(), vector_from(set.at("center"))};
      } else if (set_kind == "catalog") {
        if (!items) throw ParseError("environment snapshot", 0, "catalog creator without an item table");
        CatalogSet cat;
        cat.items = items;
        cat.indices = set.at("indices").get<std::vector<int>>();
        cat.shared_count = set.at("shared_count").get<int>();
        c.strategy_set = std::move(cat);
        c.catalog_position = jc.at("catalog_position").get<int>();
      } else {
        throw ParseError("environment snapshot", 0, "unknown strategy set kind '" + set_kind + "'");
      }
      env.creators.push_back(std::move(c));
    }
    env.validate();
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("environment snapshot", 0, e.what());
  }
}

void save_environment(const std::filesystem::path& path, const EnvironmentSpec& env) {
  write_file_atomic(path, environment_to_json(env).dump() + "\n");
}

EnvironmentSpec load_environment(const std::filesystem::path& path) {
  return environment_from_json(read_json_file(path));
}

}  // namespace creatorsim
