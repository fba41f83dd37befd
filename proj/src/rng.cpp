#include "creatorsim/rng.hpp"

#include <algorithm>
#include <numeric>

namespace creatorsim {

Vector Rng::unit_direction(int d) {
  if (d < 1) throw ValidationError("unit_direction: dimension must be >= 1");
  ++direction_draws_;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector g(d);
  double norm = 0.0;
  do {
    for (int k = 0; k < d; ++k) g[k] = normal(engine_);
    norm = g.norm();
  } while (norm == 0.0);
  return g / norm;
}

std::vector<int> Rng::permutation(int n) {
  ++permutation_draws_;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), engine_);
  return order;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  // FNV-1a over the stream name, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(master ^ mix64(h));
}

}  // namespace creatorsim
