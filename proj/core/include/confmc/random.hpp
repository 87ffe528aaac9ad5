#pragma once

#include <cstdint>
#include <random>

namespace confmc {

/// Reproducible random stream identified by (seed, stream_id).
///
/// The engine is a std::mt19937_64 seeded through std::seed_seq from the
/// four 32-bit halves of seed and stream_id; both are fully specified by the
/// standard, so draws are identical across platforms. Continuous variates
/// are produced by inverse-CDF transforms of 53-bit uniforms rather than the
/// implementation-defined std:: distributions.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent child stream; does not advance this stream.
  RandomSource substream(std::uint64_t child) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double student_t(double df);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace confmc
