#include "creatorsim/matching_cache.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace creatorsim {

namespace {

// Extra listed creators beyond K + 1, so that a creator dropping out of a
// user's list rarely forces a full rescan.
constexpr int kSlack = 8;

// Rebase a user's reference score once its top weight drifts this far (in
// log space) from 1.
constexpr double kRebaseExponent = 300.0;

}  // namespace

MatchingCache::MatchingCache(int num_users, int num_creators)
    : m_(num_users),
      n_(num_creators),
      lists_(static_cast<std::size_t>(num_users)),
      pos_(static_cast<std::size_t>(num_users) * static_cast<std::size_t>(num_creators), -1),
      out_bar_score_(static_cast<std::size_t>(num_users), 0.0),
      out_bar_creator_(static_cast<std::size_t>(num_users), 0),
      tail_score_(static_cast<std::size_t>(num_users), 0.0),
      tail_creator_(static_cast<std::size_t>(num_users), 0),
      unlisted_bound_(static_cast<std::size_t>(num_users), 0.0),
      top_k_(static_cast<std::size_t>(num_users), 1) {
  if (num_users < 1 || num_creators < 1) throw ValidationError("matching cache needs m >= 1 and n >= 1");
}

void MatchingCache::rebuild(std::span<const double> scores, std::span<const int> K,
                            std::span<const double> beta) {
  if (scores.size() != static_cast<std::size_t>(m_) * static_cast<std::size_t>(n_))
    throw DimensionError("matching cache scores", static_cast<long>(m_) * n_, static_cast<long>(scores.size()));
  if (K.size() != static_cast<std::size_t>(m_)) throw DimensionError("matching cache K", m_, static_cast<long>(K.size()));
  if (beta.size() != static_cast<std::size_t>(m_))
    throw DimensionError("matching cache beta", m_, static_cast<long>(beta.size()));
  for (int j = 0; j < m_; ++j) {
    auto& list = lists_[static_cast<std::size_t>(j)];
    const double b = beta[static_cast<std::size_t>(j)];
    const int k = K[static_cast<std::size_t>(j)];
    if (k < 1) throw ValidationError("matching cache: K must be >= 1");
    if (!(b >= 0.0)) throw ValidationError("matching cache: beta must be >= 0");
    const int old_k = list.K;
    const bool had_entries = !list.entries.empty();
    list.K = std::min(k, n_);
    list.uniform = false;
    list.inv_beta = 0.0;
    if (b == 0.0) {
      // Point mass on the tie-broken argmax.
      list.K = 1;
      list.uniform = true;
    } else if (b == MatchingParams::kUniformLimit) {
      list.uniform = true;
    } else {
      list.inv_beta = 1.0 / b;
    }
    if (had_entries && list.K == old_k) {
      reweight_user(list);
      sync_bars(j);
      continue;
    }
    list.cap = std::min(n_, list.K + 1 + kSlack);
    fill_user(j, scores);
  }
}

double MatchingCache::weight_of(const UserList& list, double score) const {
  return list.uniform ? 1.0 : std::exp((score - list.ref) * list.inv_beta);
}

void MatchingCache::fill_user(int user, std::span<const double> scores) {
  auto& list = lists_[static_cast<std::size_t>(user)];
  for (const auto& e : list.entries) pos(user, e.creator) = -1;
  list.entries.clear();
  std::vector<Entry> all;
  all.reserve(static_cast<std::size_t>(n_));
  for (int c = 0; c < n_; ++c) {
    all.push_back({scores[static_cast<std::size_t>(c) * m_ + user], c, 0.0});
  }
  auto before = [](const Entry& a, const Entry& b) { return ranks_before(a.score, a.creator, b.score, b.creator); };
  std::partial_sort(all.begin(), all.begin() + list.cap, all.end(), before);
  list.entries.assign(all.begin(), all.begin() + list.cap);
  unlisted_bound_[static_cast<std::size_t>(user)] =
      list.cap < n_ ? std::max_element(all.begin() + list.cap, all.end(), [](const Entry& a, const Entry& b) {
                        return a.score < b.score;
                      })->score
                    : -std::numeric_limits<double>::infinity();
  for (int t = 0; t < list.cap; ++t) pos(user, list.entries[static_cast<std::size_t>(t)].creator) = t;
  reweight_user(list);
  sync_bars(user);
}

void MatchingCache::sync_bars(int user) {
  const auto u = static_cast<std::size_t>(user);
  const auto& list = lists_[u];
  constexpr double lowest = -std::numeric_limits<double>::infinity();
  top_k_[u] = list.K;
  if (list.K < n_) {
    const auto& bar = list.entries[static_cast<std::size_t>(list.K) - 1];
    out_bar_score_[u] = bar.score;
    out_bar_creator_[u] = bar.creator;
  } else {
    out_bar_score_[u] = lowest;
    out_bar_creator_[u] = n_;
  }
  if (static_cast<int>(list.entries.size()) < n_) {
    tail_score_[u] = list.entries.back().score;
    tail_creator_[u] = list.entries.back().creator;
  } else {
    tail_score_[u] = lowest;
    tail_creator_[u] = n_;
  }
}

void MatchingCache::reweight_user(UserList& list) {
  list.ref = list.entries.front().score;
  for (auto& e : list.entries) e.weight = weight_of(list, e.score);
  refresh_sums(list, 0);
}

void MatchingCache::refresh_sums(UserList& list, int from) {
  const int k = list.K;
  list.prefix.resize(static_cast<std::size_t>(k) + 1);
  list.prefix[0] = 0.0;
  for (int t = std::max(from, 0); t < k; ++t) {
    list.prefix[static_cast<std::size_t>(t) + 1] = list.prefix[static_cast<std::size_t>(t)] + list.entries[static_cast<std::size_t>(t)].weight;
  }
}

double MatchingCache::probability(int user, int creator, double score) const {
  const auto& list = lists_[static_cast<std::size_t>(user)];
  const int p = pos(user, creator);
  const bool in_top = p >= 0 && p < list.K;
  if (list.K < n_) {
    // The others' K-th best is the bar to clear.
    const Entry& bar = list.entries[static_cast<std::size_t>(in_top ? list.K : list.K - 1)];
    if (!ranks_before(score, creator, bar.score, bar.creator)) return 0.0;
  }
  const auto* prefix = list.prefix.data();
  const double rest = in_top ? prefix[p] + (prefix[list.K] - prefix[p + 1]) : prefix[list.K - 1];
  if (list.uniform) return 1.0 / (rest + 1.0);
  const double x = (score - list.ref) * list.inv_beta;
  if (x > kRebaseExponent) return 1.0 / (1.0 + rest * std::exp(-x));
  const double a = std::exp(x);
  const double z = rest + a;
  if (!(z > 1e-280)) return exact_probability(user, creator, score);
  return a / z;
}

double MatchingCache::share(int user, int p, bool in_top, double a) const {
  const auto& list = lists_[static_cast<std::size_t>(user)];
  const auto* prefix = list.prefix.data();
  const double rest = in_top ? prefix[p] + (prefix[list.K] - prefix[p + 1]) : prefix[list.K - 1];
  const double z = rest + a;
  return z > 1e-280 ? a / z : -1.0;
}

void MatchingCache::utility_pair(int creator, std::span<const double> current, std::span<const double> candidate,
                                 std::span<const double> user_weight, bool engagement, double& before,
                                 double& after) const {
  const int* creator_pos = pos_.data() + static_cast<std::size_t>(creator) * m_;
  // Users where the creator is in the top K now or might be with the
  // candidate; everyone else contributes P = 0 on both sides.
  active_.resize(static_cast<std::size_t>(m_));
  int count = 0;
  for (int j = 0; j < m_; ++j) {
    const int p = creator_pos[j];
    const bool relevant = (p >= 0 && p < top_k_[static_cast<std::size_t>(j)]) |
                          (candidate[static_cast<std::size_t>(j)] >= out_bar_score_[static_cast<std::size_t>(j)]);
    active_[static_cast<std::size_t>(count)] = j;
    count += relevant ? 1 : 0;
  }
  double acc_before = 0.0;
  double acc_after = 0.0;
  for (int t = 0; t < count; ++t) {
    const int j = active_[static_cast<std::size_t>(t)];
    const auto u = static_cast<std::size_t>(j);
    const auto& list = lists_[u];
    const int p = creator_pos[j];
    const bool in_top = p >= 0 && p < list.K;
    const double w = user_weight[u];
    if (in_top) {
      double pb = share(j, p, true, list.entries[static_cast<std::size_t>(p)].weight);
      if (pb < 0.0) pb = exact_probability(j, creator, current[u]);
      acc_before += w * (engagement ? current[u] : 1.0) * pb;
    }
    const double pa = probability(j, creator, candidate[u]);
    if (pa != 0.0) acc_after += w * (engagement ? candidate[u] : 1.0) * pa;
  }
  before = acc_before;
  after = acc_after;
}

double MatchingCache::exact_probability(int user, int creator, double score) const {
  const auto& list = lists_[static_cast<std::size_t>(user)];
  std::vector<double> others;
  for (const auto& e : list.entries) {
    if (static_cast<int>(others.size()) == list.K - 1) break;
    if (e.creator != creator) others.push_back(e.score);
  }
  double shift = score;
  for (double o : others) shift = std::max(shift, o);
  double z = std::exp((score - shift) * list.inv_beta);
  const double a = z;
  for (double o : others) z += std::exp((o - shift) * list.inv_beta);
  return a / z;
}

void MatchingCache::update_creator(int creator, std::span<const double> column,
                                   std::span<const double> scores) {
  auto before = [](const Entry& a, const Entry& b) { return ranks_before(a.score, a.creator, b.score, b.creator); };
  int* creator_pos = pos_.data() + static_cast<std::size_t>(creator) * m_;
  active_.resize(static_cast<std::size_t>(m_));
  int count = 0;
  for (int j = 0; j < m_; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double v = column[u];
    const bool listed = creator_pos[j] >= 0;
    const bool enters = v >= tail_score_[u];
    // A creator staying unlisted still raises the bound on unlisted scores.
    unlisted_bound_[u] = (listed || enters) ? unlisted_bound_[u] : std::max(unlisted_bound_[u], v);
    active_[static_cast<std::size_t>(count)] = j;
    count += (listed || enters) ? 1 : 0;
  }
  for (int t = 0; t < count; ++t) {
    const int j = active_[static_cast<std::size_t>(t)];
    const auto u = static_cast<std::size_t>(j);
    const double v = column[u];
    int p = creator_pos[j];
    if (p < 0 && !ranks_before(v, creator, tail_score_[u], tail_creator_[u])) {
      unlisted_bound_[u] = std::max(unlisted_bound_[u], v);
      continue;
    }
    auto& list = lists_[u];
    auto& entries = list.entries;
    const Entry fresh{v, creator, 0.0};
    int changed_from = 0;
    if (p >= 0) {
      if (entries[static_cast<std::size_t>(p)].score == v) continue;
      // The creator stays listed while it still beats every unlisted one.
      const bool listed_all = static_cast<int>(entries.size()) == n_;
      if (listed_all || v > unlisted_bound_[u]) {
        entries[static_cast<std::size_t>(p)].score = v;
        entries[static_cast<std::size_t>(p)].weight = weight_of(list, v);
        const int start = p;
        while (p > 0 && before(entries[static_cast<std::size_t>(p)], entries[static_cast<std::size_t>(p) - 1])) {
          std::swap(entries[static_cast<std::size_t>(p)], entries[static_cast<std::size_t>(p) - 1]);
          pos(j, entries[static_cast<std::size_t>(p)].creator) = p;
          --p;
        }
        while (p + 1 < static_cast<int>(entries.size()) &&
               before(entries[static_cast<std::size_t>(p) + 1], entries[static_cast<std::size_t>(p)])) {
          std::swap(entries[static_cast<std::size_t>(p)], entries[static_cast<std::size_t>(p) + 1]);
          pos(j, entries[static_cast<std::size_t>(p)].creator) = p;
          ++p;
        }
        creator_pos[j] = p;
        changed_from = std::min(start, p);
      } else {
        entries.erase(entries.begin() + p);
        for (int t = p; t < static_cast<int>(entries.size()); ++t) pos(j, entries[static_cast<std::size_t>(t)].creator) = t;
        creator_pos[j] = -1;
        unlisted_bound_[u] = std::max(unlisted_bound_[u], v);
        if (static_cast<int>(entries.size()) < std::min(n_, list.K + 1)) {
          fill_user(j, scores);
          continue;
        }
        changed_from = p;
      }
    } else {
      auto at = std::upper_bound(entries.begin(), entries.end(), fresh, before);
      const int q = static_cast<int>(at - entries.begin());
      entries.insert(at, Entry{v, creator, weight_of(list, v)});
      for (int t = q; t < static_cast<int>(entries.size()); ++t) pos(j, entries[static_cast<std::size_t>(t)].creator) = t;
      if (static_cast<int>(entries.size()) > list.cap) {
        unlisted_bound_[u] = std::max(unlisted_bound_[u], entries.back().score);
        pos(j, entries.back().creator) = -1;
        entries.pop_back();
      }
      changed_from = q;
    }
    if (!list.uniform && std::abs((entries.front().score - list.ref) * list.inv_beta) > kRebaseExponent) {
      reweight_user(list);
    } else if (changed_from < list.K) {
      refresh_sums(list, changed_from);
    }
    sync_bars(j);
  }
}

double MatchingCache::expected_score(int user) const {
  const auto& list = lists_[static_cast<std::size_t>(user)];
  double acc = 0.0;
  for (int t = 0; t < list.K; ++t) {
    const auto& e = list.entries[static_cast<std::size_t>(t)];
    acc += e.score * e.weight;
  }
  return acc / list.prefix[static_cast<std::size_t>(list.K)];
}

int MatchingCache::sample(int user, std::mt19937_64& engine) const {
  const auto& list = lists_[static_cast<std::size_t>(user)];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double target = unit(engine) * list.prefix[static_cast<std::size_t>(list.K)];
  for (int t = 0; t < list.K; ++t) {
    if (target < list.prefix[static_cast<std::size_t>(t) + 1]) return list.entries[static_cast<std::size_t>(t)].creator;
  }
  return list.entries[static_cast<std::size_t>(list.K) - 1].creator;
}

}  // namespace creatorsim
