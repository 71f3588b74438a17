#ifndef DGNET_RNG_H_
#define DGNET_RNG_H_

#include <cstdint>
#include <string_view>

namespace dgnet {

// Counter-based splittable generator.
//
// Every draw is a pure function of (key, counter), so streams are identical
// across runs and platforms. `split` derives a child key from the parent key
// and a label only; the child does not depend on how much of the parent has
// been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::uint64_t label) const;
  Rng split(std::string_view label) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform in [0, 1) with 24 bits of resolution; exactly representable.
  float uniform_float();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_int(std::uint64_t bound);
  // Standard normal via Box-Muller. Uses two uniforms per call.
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stable 64-bit mix used for seed derivation (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

}  // namespace dgnet

#endif  // DGNET_RNG_H_
