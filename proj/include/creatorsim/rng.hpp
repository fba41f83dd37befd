#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "creatorsim/common.hpp"

namespace creatorsim {

// Seeded random source for the dynamics. Direction and permutation draws are
// counted so that replay can be checked draw-for-draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the unit sphere in R^d (isotropic Gaussian, normalized).
  Vector unit_direction(int d);

  // Uniform random permutation of 0..n-1.
  std::vector<int> permutation(int n);

  std::mt19937_64& engine() { return engine_; }

  std::uint64_t direction_draws() const { return direction_draws_; }
  std::uint64_t permutation_draws() const { return permutation_draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t direction_draws_ = 0;
  std::uint64_t permutation_draws_ = 0;
};

// Free-function form used by the LBR update.
inline Vector random_unit_direction(int d, Rng& rng) { return rng.unit_direction(d); }

// Deterministic child seed for a named stream (e.g. an experiment arm).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace creatorsim
