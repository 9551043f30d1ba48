#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace loceq {

// Independent random streams. Each consumer of randomness draws from its own
// stream so that, e.g., changing the number of couplings never shifts the
// observable weights drawn for the same seed.
enum class Stream : std::uint32_t {
  kCouplings = 1,
  kObservable = 2,
  kGraph = 3,
  kWeights = 4,
  kCalibration = 5,
  kOracle = 0xfff0,
};

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
///
/// A generator is fully described by its 64-bit key and 128-bit counter, so
/// any position of any stream can be reached in O(1) and streams never
/// overlap. Layout used by Rng:
///   key     = seed (low word, high word)
///   counter = [block index low, block index high, stream id, substream]
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter counter, Key key);
};

/// Seedable stream of 64-bit words built on Philox4x32-10. Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, Stream stream, std::uint32_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  void refill();

  Philox4x32::Key key_{};
  Philox4x32::Counter counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// Mixes a base seed with an index (sample number, grid cell, ...) into a new
/// seed. Used to give each disorder realisation its own seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace loceq
