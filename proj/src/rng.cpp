#include "decembed/rng.hpp"

#include <stdexcept>

namespace decembed {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x5851f42d4c957f2dULL));
}

CounterRng CounterRng::for_episode(std::uint64_t run_seed, std::uint64_t episode) {
  return CounterRng(derive_seed(run_seed, episode), 0);
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t n = counter_++;
  return mix64(key_ ^ mix64(n));
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t CounterRng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("CounterRng::below: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::size_t CounterRng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace decembed
