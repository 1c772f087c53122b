#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/eval.hpp"
#include "gcr/synthdata.hpp"

using namespace gcr;

namespace {

SynthSpec small_spec(int k, int per, std::uint64_t seed) {
  SynthSpec s;
  s.k = k;
  s.n_per_cluster = per;
  s.ambient_dim = 10;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("line angles increase and avoid the vertical") {
  for (const int k_total : {2, 4, 8}) {
    double prev = 0.0;
    for (int k = 1; k <= k_total; ++k) {
      const double theta = line_angle(k, k_total, false);
      CHECK(theta > prev);
      CHECK(theta < std::numbers::pi);
      CHECK(std::abs(std::cos(theta)) >= 1e-9);
      prev = theta;
    }
  }
  CHECK(line_angle(1, 2, false) ==
        doctest::Approx(16.0 * std::numbers::pi / 34.0).epsilon(1e-12));
  CHECK(line_angle(1, 2, true) == doctest::Approx(16.0 / 34.0).epsilon(1e-12));
  CHECK_THROWS_AS(line_angle(0, 3, false), DomainError);
  CHECK_THROWS_AS(line_angle(4, 3, false), DomainError);
}

TEST_CASE("an exactly vertical line is rejected") {
  // 16k/(17K) hits 1/2 at k=17, K=32, putting the angle at pi/2 exactly.
  CHECK_THROWS_AS(line_angle(17, 32, false), DegenerateAngle);
}

TEST_CASE("generation is reproducible bit for bit") {
  const SynthSpec spec = small_spec(3, 8, 42);
  const Dataset a = gen_subspace_lines(spec);
  const Dataset b = gen_subspace_lines(spec);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.labels == b.labels);
}

TEST_CASE("labels partition the columns into equal blocks") {
  const SynthSpec spec = small_spec(4, 6, 7);
  const Dataset data = gen_subspace_lines(spec);
  REQUIRE(data.count() == 24);
  REQUIRE(data.dim() == 10);
  std::vector<int> counts(5, 0);
  for (const int lab : data.labels) {
    REQUIRE(lab >= 1);
    REQUIRE(lab <= 4);
    ++counts[lab];
  }
  for (int k = 1; k <= 4; ++k) CHECK(counts[k] == 6);
}

TEST_CASE("clusters are one-dimensional inside a shared plane") {
  const SynthSpec spec = small_spec(5, 10, 11);
  const Dataset data = gen_subspace_lines(spec);
  const DimStats stats = dim_stats(data);
  CHECK(stats.pooled_dim == 2);
  CHECK(stats.summed_cluster_dims == 5);
}

TEST_CASE("every column sits in the span of the top two directions") {
  const SynthSpec spec = small_spec(3, 12, 13);
  const Dataset data = gen_subspace_lines(spec);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(data.x, Eigen::ComputeThinU);
  const Eigen::MatrixXd u2 = svd.matrixU().leftCols(2);
  const Eigen::MatrixXd residual = data.x - u2 * (u2.transpose() * data.x);
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("zero noise fraction leaves the clean data untouched") {
  const SynthSpec spec = small_spec(2, 9, 21);
  std::vector<int> noisy{99};
  const Dataset clean = gen_subspace_lines(spec);
  const Dataset same = gen_noisy(spec, &noisy);
  CHECK((clean.x - same.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(noisy.empty());
}

TEST_CASE("corruption touches exactly the reported columns") {
  SynthSpec spec = small_spec(2, 10, 33);
  spec.noise_fraction = 0.35;  // floor(0.35 * 20) = 7 columns
  std::vector<int> noisy;
  const Dataset clean = gen_subspace_lines(spec);
  const Dataset dirty = gen_noisy(spec, &noisy);
  REQUIRE(static_cast<int>(noisy.size()) == 7);

  std::vector<int> sorted = noisy;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(sorted.front() >= 0);
  CHECK(sorted.back() < 20);

  for (int c = 0; c < 20; ++c) {
    const bool listed =
        std::binary_search(sorted.begin(), sorted.end(), c);
    const double diff = (dirty.x.col(c) - clean.x.col(c)).cwiseAbs().maxCoeff();
    if (listed)
      CHECK(diff > 0.0);
    else
      CHECK(diff == 0.0);
  }
  CHECK(dirty.labels == clean.labels);
}

TEST_CASE("corrupted column count is the floor of the fraction") {
  SynthSpec spec = small_spec(2, 10, 5);
  for (const double f : {0.0, 0.04, 0.05, 0.099, 0.10, 0.5, 1.0}) {
    spec.noise_fraction = f;
    std::vector<int> noisy;
    gen_noisy(spec, &noisy);
    CHECK(static_cast<int>(noisy.size()) ==
          static_cast<int>(f * 20 + 1e-9));
  }
}

TEST_CASE("corruption adds noise of the configured variance") {
  SynthSpec spec = small_spec(2, 100, 77);
  spec.ambient_dim = 50;
  spec.noise_fraction = 1.0;
  spec.noise_variance = 3.0;
  const Dataset clean = gen_subspace_lines(spec);
  const Dataset dirty = gen_noisy(spec);
  const Eigen::MatrixXd diff = dirty.x - clean.x;
  const int cells = static_cast<int>(diff.size());
  REQUIRE(cells == 10000);
  const double mean = diff.sum() / cells;
  const double var = diff.squaredNorm() / cells - mean * mean;
  // 10000 iid draws: the sample variance of N(0,3) concentrates within
  // roughly 3*sqrt(2/10000) ~ 0.042 one sigma.
  CHECK(std::abs(mean) <= 0.1);
  CHECK(var == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("different seeds give different planes") {
  const Dataset a = gen_subspace_lines(small_spec(2, 5, 1));
  const Dataset b = gen_subspace_lines(small_spec(2, 5, 2));
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("spec validation rejects bad parameters") {
  SynthSpec s = small_spec(2, 5, 1);
  s.k = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, 1, 1);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, 5, 1);
  s.noise_fraction = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, 5, 1);
  s.noise_variance = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(2, 5, 1);
  s.ambient_dim = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

}  // TEST_SUITE
