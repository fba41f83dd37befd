#pragma once

// Independent reference computations for the tests. Written from the model
// definitions directly; nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace testoracle {

// Top-K softmax with temperature beta over plain scores. Ties keep the lower
// index. beta == 0 is the argmax point mass.
inline std::vector<double> topk_softmax(const std::vector<double>& scores, int K, double beta) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<double> p(n, 0.0);
  const int k = std::min(K, n);
  if (beta == 0.0) {
    p[order[0]] = 1.0;
    return p;
  }
  if (std::isinf(beta)) {
    for (int r = 0; r < k; ++r) p[order[r]] = 1.0 / k;
    return p;
  }
  long double z = 0.0L;
  std::vector<long double> e(k);
  for (int r = 0; r < k; ++r) {
    e[r] = std::exp(static_cast<long double>(scores[order[r]]) / beta);
    z += e[r];
  }
  for (int r = 0; r < k; ++r) p[order[r]] = static_cast<double>(e[r] / z);
  return p;
}

inline double expected_relevance(const std::vector<double>& scores, int K, double beta) {
  const auto p = topk_softmax(scores, K, beta);
  double u = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) u += p[i] * scores[i];
  return u;
}

// Multiplicative step, renormalize to sum L, clip.
inline std::vector<double> weight_update(std::vector<double> w, const std::vector<double>& pi, double alpha,
                                         double lo, double hi) {
  double sum = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] *= std::exp(-alpha * pi[l]);
    sum += w[l];
  }
  for (double& v : w) v = std::clamp(v * static_cast<double>(w.size()) / sum, lo, hi);
  return w;
}

// Counterexample at s_i = x_i: per-user expected relevance by enumeration.
// Users (0,0), (1,0), (0,1), (-1,0), (0,-1); sigma = max(2 - dist, 0).
inline std::vector<double> counterexample_pne_utilities(double beta) {
  const double xs[5][2] = {{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::vector<double> out;
  for (const auto& x : xs) {
    std::vector<double> scores;
    for (const auto& s : xs) scores.push_back(std::max(2.0 - std::hypot(s[0] - x[0], s[1] - x[1]), 0.0));
    out.push_back(expected_relevance(scores, 3, beta));
  }
  return out;
}

}  // namespace testoracle
