#include "doctest.h"

#include <cmath>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/eval.hpp"
#include "gcr/model.hpp"
#include "gcr/rng.hpp"
#include "gcr/synthdata.hpp"

using namespace gcr;

namespace {

Dataset random_dataset(Rng& rng, int d, int n) {
  Dataset data;
  data.x.resize(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) data.x(r, c) = rng.normal();
  return data;
}

Eigen::MatrixXd centered_gram(const Dataset& data) {
  const Eigen::VectorXd mean = data.x.rowwise().mean();
  const Eigen::MatrixXd c = data.x.colwise() - mean;
  return c.transpose() * c;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("accuracy is one for identical and relabeled assignments") {
  const std::vector<int> truth{1, 1, 2, 2, 3};
  CHECK(clustering_accuracy(truth, truth) == 1.0);
  const std::vector<int> relabeled{7, 7, 5, 5, 9};
  CHECK(clustering_accuracy(relabeled, truth) == 1.0);
}

TEST_CASE("accuracy scores the best one-to-one matching") {
  // Contingency: predicted 1 covers two truth-1 samples; predicted 2 covers
  // one truth-1 and one truth-2. The best pairing keeps 3 of 4.
  CHECK(clustering_accuracy({1, 1, 2, 2}, {1, 1, 1, 2}) == 0.75);
  // One-to-one matching cannot reuse a truth label: only two of the three
  // singleton predictions can land on the two truth labels.
  CHECK(clustering_accuracy({1, 2, 3}, {1, 1, 2}) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("accuracy rejects malformed input") {
  CHECK_THROWS_AS(clustering_accuracy({}, {}), EmptyInput);
  CHECK_THROWS_AS(clustering_accuracy({1, 2}, {1}), LengthMismatch);
}

TEST_CASE("numerical rank matches construction") {
  CHECK(numerical_rank(Eigen::MatrixXd::Identity(4, 4), 1.0 - 1e-9) == 4);
  CHECK(numerical_rank(Eigen::MatrixXd::Zero(3, 5), 1.0 - 1e-9) == 0);
  Rng rng(501);
  Eigen::MatrixXd a(5, 2), b(2, 7);
  for (int i = 0; i < a.size(); ++i) a(i / 2, i % 2) = rng.normal();
  for (int i = 0; i < b.size(); ++i) b(i / 7, i % 7) = rng.normal();
  CHECK(numerical_rank(a * b, 1.0 - 1e-9) == 2);
  CHECK_THROWS_AS(numerical_rank(a, 0.0), DomainError);
  CHECK_THROWS_AS(numerical_rank(a, 1.5), DomainError);
}

TEST_CASE("dimension stats separate pooled and per-cluster ranks") {
  SynthSpec spec;
  spec.k = 6;
  spec.n_per_cluster = 5;
  spec.ambient_dim = 12;
  spec.seed = 502;
  const Dataset data = gen_subspace_lines(spec);
  const DimStats stats = dim_stats(data);
  CHECK(stats.pooled_dim == 2);
  CHECK(stats.summed_cluster_dims == 6);

  Dataset unlabeled = data;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(dim_stats(unlabeled), EmptyInput);
}

TEST_CASE("pca to the true rank preserves the centered geometry") {
  Rng rng(503);
  Eigen::MatrixXd a(8, 3), b(3, 20);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 20; ++c) b(r, c) = rng.normal();
  Dataset data;
  data.x = a * b;
  const Dataset reduced = pca_reduce(data, 3);
  REQUIRE(reduced.dim() == 3);
  REQUIRE(reduced.count() == 20);
  CHECK((centered_gram(reduced) - centered_gram(data)).cwiseAbs().maxCoeff() <=
        1e-9);
}

TEST_CASE("rotating the ambient space does not change pca geometry") {
  Rng rng(504);
  Dataset data = random_dataset(rng, 6, 15);
  Eigen::MatrixXd m(6, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) m(r, c) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ();

  Dataset rotated;
  rotated.x = q * data.x;
  const Dataset ra = pca_reduce(data, 4);
  const Dataset rb = pca_reduce(rotated, 4);
  CHECK((centered_gram(ra) - centered_gram(rb)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("energy-based pca finds the plane of a union of lines") {
  SynthSpec spec;
  spec.k = 3;
  spec.n_per_cluster = 10;
  spec.ambient_dim = 15;
  spec.seed = 505;
  const Dataset data = gen_subspace_lines(spec);
  const Dataset reduced = pca_reduce_energy(data, 1.0 - 1e-9);
  CHECK(reduced.dim() <= 3);
  CHECK(reduced.count() == data.count());
  CHECK(reduced.labels == data.labels);
}

TEST_CASE("pca rejects malformed requests") {
  Rng rng(506);
  const Dataset data = random_dataset(rng, 4, 6);
  CHECK_THROWS_AS(pca_reduce(data, 0), DomainError);
  CHECK_THROWS_AS(pca_reduce(data, 5), DomainError);
  CHECK_THROWS_AS(pca_reduce(Dataset{}, 1), EmptyInput);
}

TEST_CASE("enumeration yields a normalized symmetric posterior") {
  Rng rng(507);
  const Dataset data = random_dataset(rng, 2, 3);
  Hyperparams hp;
  hp.num_clusters = 2;
  const PosteriorEnumeration post = enumerate_posterior(data, hp);
  REQUIRE(static_cast<int>(post.log_probs.size()) == 8);

  double sum = 0.0;
  for (const double lp : post.log_probs) sum += std::exp(lp);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  CHECK((post.coassignment - post.coassignment.transpose())
            .cwiseAbs()
            .maxCoeff() <= 1e-15);
  for (int i = 0; i < 3; ++i)
    CHECK(post.coassignment(i, i) == doctest::Approx(1.0).epsilon(1e-12));

  // Swapping the two label names maps code c to 7 - c and cannot change
  // the probability.
  for (long c = 0; c < 8; ++c)
    CHECK(post.log_probs[c] ==
          doctest::Approx(post.log_probs[7 - c]).epsilon(1e-10));

  long best = 0;
  for (long c = 1; c < 8; ++c)
    if (post.log_probs[c] > post.log_probs[best]) best = c;
  std::vector<int> decoded(3);
  long code = best;
  for (int i = 0; i < 3; ++i) {
    decoded[i] = static_cast<int>(code % 2);
    code /= 2;
  }
  CHECK(post.map_z == decoded);
}

TEST_CASE("enumeration does not depend on the thread count") {
  Rng rng(508);
  const Dataset data = random_dataset(rng, 2, 4);
  Hyperparams hp;
  hp.num_clusters = 3;
  const PosteriorEnumeration a = enumerate_posterior(data, hp, 1);
  const PosteriorEnumeration b = enumerate_posterior(data, hp, 4);
  REQUIRE(a.log_probs.size() == b.log_probs.size());
  for (std::size_t c = 0; c < a.log_probs.size(); ++c)
    CHECK(a.log_probs[c] == b.log_probs[c]);
  CHECK((a.coassignment - b.coassignment).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.map_z == b.map_z);
}

TEST_CASE("enumeration refuses oversized instances") {
  Dataset data;
  data.x = Eigen::MatrixXd::Zero(1, 21);
  data.x.row(0).setLinSpaced(21, -1.0, 1.0);
  Hyperparams hp;
  hp.num_clusters = 2;
  CHECK_THROWS_AS(enumerate_posterior(data, hp), TooLarge);
  hp.mode = Mode::kDp;
  CHECK_THROWS_AS(enumerate_posterior(data, hp), ConfigError);
}

TEST_CASE("enumeration odds match the independent integral") {
  Dataset data;
  data.x.resize(1, 2);
  data.x << 0.8, -0.4;
  Hyperparams hp;
  hp.num_clusters = 2;

  const PosteriorEnumeration post = enumerate_posterior(data, hp);
  const double p_same = post.coassignment(0, 1);
  const double odds = p_same / (1.0 - p_same);

  const MarginalRatioCheck mc = quadrature_marginal_check(data, hp);
  CHECK(odds == doctest::Approx(mc.closed_form).epsilon(1e-10));
  CHECK(odds == doctest::Approx(mc.quadrature).epsilon(1e-4));
}

TEST_CASE("quadrature check needs exactly two one-dimensional samples") {
  Rng rng(509);
  const Dataset bad_d = random_dataset(rng, 2, 2);
  const Dataset bad_n = random_dataset(rng, 1, 3);
  Hyperparams hp;
  CHECK_THROWS_AS(quadrature_marginal_check(bad_d, hp), DomainError);
  CHECK_THROWS_AS(quadrature_marginal_check(bad_n, hp), DomainError);
}

}  // TEST_SUITE
