#pragma once

#include <cstdint>
#include <random>

namespace parttrack {

/// Seeded random stream whose full state is (seed, counter).
///
/// Uses std::mt19937_64, whose output sequence is fixed by the standard, and
/// converts raw 64-bit draws to floating point by hand so that every platform
/// produces the same samples for the same seed and call sequence. The
/// distribution classes of <random> are not used since their algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  /// Rebuilds a stream at a recorded position.
  static Rng restore(std::uint64_t seed, std::uint64_t counter) {
    Rng rng(seed);
    rng.engine_.discard(counter);
    rng.counter_ = counter;
    return rng;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return engine_();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller; consumes two draws.
  double normal();

  /// Independent child stream; advances this stream by one draw.
  Rng split() { return Rng(next_u64()); }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.counter_ == b.counter_;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace parttrack
