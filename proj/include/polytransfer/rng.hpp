#pragma once

#include <cstdint>

namespace polytransfer {

// Counter-based generator. Output number i of a stream with key k is
//
//   mix64(k + (i + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer (Stafford variant 13). This is
// exactly SplitMix64 seeded with k, which makes any position of any stream
// directly addressable: a Monte Carlo loop gives draw j its own child stream
// child(j), so results do not depend on how the loop is partitioned.
//
// Doubles use the top 53 bits. Normals use Box-Muller with both outputs
// consumed in order; nothing in the pipeline uses std:: distributions, whose
// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  // (0, 1)
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  // Independent stream derived from this generator's key (not its position).
  Rng child(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }
  void skip(std::uint64_t count) { counter_ += count; }

 private:
  Rng() = default;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace polytransfer
