#pragma once

#include <cstdint>
#include <vector>

#include "gcr/model.hpp"

namespace gcr {

// Union-of-lines generator: K one-dimensional subspaces of a shared random
// two-dimensional plane embedded in ambient_dim dimensions.
struct SynthSpec {
  int k = 2;
  int n_per_cluster = 50;
  int ambient_dim = 50;
  double noise_fraction = 0.0;   // share of columns to corrupt
  double noise_variance = 3.0;   // per-coordinate variance of the corruption
  bool angle_literal = false;    // drop the pi factor in the line angles
  std::uint64_t seed = 0;

  void validate() const;
};

// Angle of line k (1-based) out of k_total.
double line_angle(int k, int k_total, bool literal);

// Clean data: cluster k occupies the line at angle theta_k inside a plane
// spanned by two iid Gaussian rows B in R^{2 x ambient_dim}; its samples
// are (y, tan(theta_k) y) B with y uniform on [-1, 1]. Labels are 1-based.
Dataset gen_subspace_lines(const SynthSpec& spec);

// Same, then floor(noise_fraction * N) distinct columns get iid
// N(0, noise_variance) added to every coordinate. With noise_fraction == 0
// the output matches gen_subspace_lines exactly. Indices of the corrupted
// columns are reported through noisy_indices when given.
Dataset gen_noisy(const SynthSpec& spec,
                  std::vector<int>* noisy_indices = nullptr);

}  // namespace gcr
