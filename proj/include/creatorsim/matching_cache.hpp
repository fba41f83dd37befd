#pragma once

#include <random>
#include <span>
#include <vector>

#include "creatorsim/game.hpp"

namespace creatorsim {

// Incremental top-K softmax matching over a fixed user set.
//
// Each user keeps the best few creators in ranking order (score descending,
// index ascending) with unnormalized weights exp((score - ref) / beta) against
// a per-user reference, plus prefix sums over the top K. A creator's
// probability under a hypothetical score is then O(1) per user.
//
// Scores are passed in creator-major layout: scores[i * m + j].
class MatchingCache {
 public:
  MatchingCache() = default;
  MatchingCache(int num_users, int num_creators);

  // Per-user (beta, K); K is clamped to n. Users whose K is unchanged keep
  // their ranking and are only re-weighted.
  void rebuild(std::span<const double> scores, std::span<const int> K, std::span<const double> beta);

  // P_i(x_j) if creator i's score at user j were `score`, everyone else fixed.
  double probability(int user, int creator, double score) const;

  // sum_j w_j R_ij P_ij for creator i at its held scores (`before`) and at
  // `candidate` (`after`). R is the score itself when `engagement`, else 1.
  void utility_pair(int creator, std::span<const double> current, std::span<const double> candidate,
                    std::span<const double> user_weight, bool engagement, double& before, double& after) const;

  // Creator i's column changed to `column`; `scores` already holds it.
  void update_creator(int creator, std::span<const double> column, std::span<const double> scores);

  // Expected relevance of the user's match.
  double expected_score(int user) const;

  int sample(int user, std::mt19937_64& engine) const;

  int num_users() const { return m_; }
  int num_creators() const { return n_; }

 private:
  struct Entry {
    double score;
    int creator;
    double weight;
  };

  struct UserList {
    std::vector<Entry> entries;
    std::vector<double> prefix;  // prefix[t] = sum of the first t weights, t <= K
    int K = 1;
    int cap = 1;
    bool uniform = false;  // beta = 0 (K forced to 1) or the uniform limit
    double inv_beta = 0.0;
    double ref = 0.0;
  };

  static bool ranks_before(double sa, int a, double sb, int b) {
    return sa > sb || (sa == sb && a < b);
  }

  int& pos(int user, int creator) {
    return pos_[static_cast<std::size_t>(creator) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(user)];
  }
  int pos(int user, int creator) const {
    return pos_[static_cast<std::size_t>(creator) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(user)];
  }

  double weight_of(const UserList& list, double score) const;
  void fill_user(int user, std::span<const double> scores);
  void reweight_user(UserList& list);
  void refresh_sums(UserList& list, int from);
  void sync_bars(int user);
  double share(int user, int p, bool in_top, double a) const;
  double exact_probability(int user, int creator, double score) const;

  int m_ = 0;
  int n_ = 0;
  std::vector<UserList> lists_;
  std::vector<int> pos_;  // creator-major rank in the user's list, -1 when unlisted

  // Flat per-user copies of what the hot loops read.
  std::vector<double> out_bar_score_;  // entry K-1, or -inf when K = n
  std::vector<int> out_bar_creator_;
  std::vector<double> tail_score_;  // last listed entry, or -inf when all are listed
  std::vector<int> tail_creator_;
  std::vector<double> unlisted_bound_;  // upper bound on every unlisted score
  std::vector<int> top_k_;

  mutable std::vector<int> active_;
};

}  // namespace creatorsim
