#pragma once

#include <cstdint>
#include <random>

namespace fsdd {

/// Deterministic random stream keyed by (seed, stream_id).
///
/// The engine is std::mt19937_64 seeded through std::seed_seq; both are fully
/// specified by the standard, and every derived quantity below is computed
/// with integer arithmetic or a fixed 53-bit conversion, so a stream replays
/// bit-exactly on any conforming platform. Standard library distributions are
/// deliberately not used here because their algorithms are unspecified.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Raw 64-bit draw; makes RngStream a UniformRandomBitGenerator.
  std::uint64_t operator()() { return engine_(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal draw (Box-Muller, two uniforms per call).
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Child stream for a sub-task; independent of how far this stream has advanced.
  RngStream derive(std::uint64_t task) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/// Mixes two 64-bit keys into a new stream id (splitmix64 finalizer).
std::uint64_t mix_stream_id(std::uint64_t a, std::uint64_t b);

}  // namespace fsdd
