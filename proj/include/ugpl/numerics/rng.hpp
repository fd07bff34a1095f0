#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace ugpl {

// Deterministic random stream identified by (seed, stream name).
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions are implemented here rather than taken from
// <random>, because the standard distributions are allowed to differ between
// library implementations.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t seed() const { return seed_; }
  const std::string& stream() const { return stream_; }

  // Child stream; depends only on (seed, stream + "/" + name).
  Rng fork(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] (inclusive), rejection sampled.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool coin(double p = 0.5) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::string stream_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace ugpl
