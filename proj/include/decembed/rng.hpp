#pragma once

#include <cstdint>
#include <span>

namespace decembed {

/// Counter-based generator: the n-th output is a pure function of (key, n),
/// so streams are reproducible on every platform and cheap to split.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  /// Stream for one episode of one run.
  static CounterRng for_episode(std::uint64_t run_seed, std::uint64_t episode);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Index drawn from a discrete distribution (weights need not be normalized).
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

/// Seed for run `index` derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace decembed
