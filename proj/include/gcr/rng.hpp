#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gcr {

// splitmix64 finalizer. Good enough to decorrelate seeds that differ in a
// single counter increment.
std::uint64_t mix64(std::uint64_t x);

// Derives the seed for an independent component stream from a root seed.
// Streams are numbered so that adding a consumer never shifts the draws of
// an existing one.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

// Deterministic random source. All draws are built on top of raw mt19937_64
// output so that results are identical across platforms and library
// versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via the polar method (pairs are cached).
  double normal();

  // Uniform integer in [0, n). n must be positive.
  std::int64_t uniform_int(std::int64_t n);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Draws an index proportional to exp(logits[k]) by inverse CDF after
// shifting by the maximum. Throws EmptyInput on an empty span.
int sample_categorical(std::span<const double> logits, Rng& rng);

}  // namespace gcr
