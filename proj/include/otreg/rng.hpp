#pragma once

#include <cstdint>
#include <vector>

#include "otreg/types.hpp"

namespace otreg {

/// Seedable, portable 64-bit generator (xoshiro256++ seeded through
/// splitmix64). All sampling routines are implemented on top of the raw
/// 64-bit stream so two builds of this library produce identical draws.
///
/// Stream splitting: `rng.stream(id)` derives an independent generator for
/// worker/experiment `id` as splitmix64(seed ^ golden * (id + 1)). Each
/// (experiment, seed) pair owns its stream, so runs can execute concurrently
/// and still reproduce.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng stream(std::uint64_t stream_id) const;

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Rejection sampled, unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Marsaglia polar method (pairs cached).
  double normal();

  Vector normal_vector(int n);
  Matrix normal_matrix(int rows, int cols);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

  /// k distinct indices from 0..n-1, in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::uint64_t base_seed_;
};

}  // namespace otreg
