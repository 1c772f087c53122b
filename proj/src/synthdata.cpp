#include "gcr/synthdata.hpp"

#include <cmath>
#include <numbers>

#include "gcr/errors.hpp"
#include "gcr/rng.hpp"

namespace gcr {

namespace {
// Sub-streams of the generator seed. Data and corruption draw from separate
// streams so that turning noise on does not disturb the clean columns.
constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamNoise = 2;
}  // namespace

void SynthSpec::validate() const {
  if (k < 1) throw ConfigError("synth: k must be >= 1");
  if (n_per_cluster < 2) throw ConfigError("synth: n_per_cluster must be >= 2");
  if (ambient_dim < 1) throw ConfigError("synth: ambient_dim must be >= 1");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0))
    throw ConfigError("synth: noise_fraction must lie in [0, 1]");
  if (!(noise_variance >= 0.0))
    throw ConfigError("synth: noise_variance must be >= 0");
}

double line_angle(int k, int k_total, bool literal) {
  if (k < 1 || k > k_total) throw DomainError("line_angle: k out of range");
  const double base =
      16.0 * static_cast<double>(k) / (17.0 * static_cast<double>(k_total));
  const double theta = literal ? base : base * std::numbers::pi;
  if (std::abs(std::cos(theta)) < 1e-9)
    throw DegenerateAngle("line_angle: angle too close to vertical");
  return theta;
}

Dataset gen_subspace_lines(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, kStreamData));

  const int d = spec.ambient_dim;
  const int n = spec.k * spec.n_per_cluster;

  Eigen::MatrixXd basis(2, d);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < d; ++c) basis(r, c) = rng.normal();

  Dataset data;
  data.x.resize(d, n);
  data.labels.resize(n);
  int col = 0;
  for (int k = 1; k <= spec.k; ++k) {
    const double slope = std::tan(line_angle(k, spec.k, spec.angle_literal));
    for (int s = 0; s < spec.n_per_cluster; ++s, ++col) {
      const double y = rng.uniform(-1.0, 1.0);
      data.x.col(col) = basis.row(0).transpose() * y +
                        basis.row(1).transpose() * (slope * y);
      data.labels[col] = k;
    }
  }
  return data;
}

Dataset gen_noisy(const SynthSpec& spec, std::vector<int>* noisy_indices) {
  Dataset data = gen_subspace_lines(spec);
  const int n = data.count();
  const int m = static_cast<int>(spec.noise_fraction * n + 1e-9);
  if (noisy_indices) noisy_indices->clear();
  if (m == 0) return data;

  Rng rng(derive_seed(spec.seed, kStreamNoise));

  // Partial Fisher-Yates: the first m entries are a uniform draw of m
  // distinct columns.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(n - i));
    std::swap(order[i], order[j]);
  }

  const double sd = std::sqrt(spec.noise_variance);
  for (int i = 0; i < m; ++i) {
    const int c = order[i];
    for (int r = 0; r < data.dim(); ++r) data.x(r, c) += sd * rng.normal();
    if (noisy_indices) noisy_indices->push_back(c);
  }
  return data;
}

}  // namespace gcr
