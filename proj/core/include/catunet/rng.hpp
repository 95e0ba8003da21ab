#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace catunet {

/// Named consumers of randomness. Each one draws from its own stream so that,
/// for example, changing the batch order never changes weight initialization.
enum class Stream : std::uint64_t {
  init = 1,
  dropout = 2,
  shuffle = 3,
  synthesis = 4,
  gradcheck = 5,
};

/// Deterministic generator: std::mt19937_64 seeded from splitmix64(seed, stream).
/// All variates are derived from raw 64-bit draws with hand-written transforms,
/// so sequences do not depend on the standard library's distribution classes.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream);

  std::uint64_t seed() const noexcept { return seed_; }
  Stream stream() const noexcept { return stream_; }

  /// Independent generator for another stream under the same seed.
  Rng split(Stream stream) const { return Rng(seed_, stream); }
  /// Independent child generator; `index` distinguishes siblings (e.g. sample index).
  Rng child(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n);

 private:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t engine_seed);

  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t engine_seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace catunet
