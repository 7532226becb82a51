#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fatsim {

// SplitMix64 finalizer. Used to derive independent sub-seeds from one run
// seed so that the workload, the dispatch coin and the probe draws never
// share a stream.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class RngStream : std::uint64_t {
  Workload = 1,
  Dispatch = 2,
  Probe = 3,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) noexcept {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

// Portable random source. std::mt19937_64 output is fixed by the standard,
// the distribution objects are not, so the draws are implemented here on top
// of the raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Exponential with the given rate (events per unit time).
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fatsim
