#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/model.hpp"
#include "gcr/numerics.hpp"
#include "gcr/rng.hpp"

using namespace gcr;

namespace {

Dataset random_dataset(Rng& rng, int d, int n) {
  Dataset data;
  data.x.resize(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) data.x(r, c) = rng.normal();
  return data;
}

Hyperparams finite_hp(int k) {
  Hyperparams hp;
  hp.mode = Mode::kFinite;
  hp.num_clusters = k;
  return hp;
}

Hyperparams dp_hp() {
  Hyperparams hp;
  hp.mode = Mode::kDp;
  return hp;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("build_h_naive with a single member") {
  Rng rng(1);
  Dataset data = random_dataset(rng, 3, 1);
  Hyperparams hp = finite_hp(1);
  const Eigen::MatrixXd h = build_h_naive(data, {0}, 0, hp);
  const Eigen::MatrixXd expect =
      hp.alpha_h * data.x.col(0) * data.x.col(0).transpose() +
      Eigen::MatrixXd::Identity(3, 3);
  CHECK(max_abs(h - expect) < 1e-14);
}

TEST_CASE("build_h_naive collapses when both alphas agree") {
  Rng rng(2);
  Dataset data = random_dataset(rng, 2, 5);
  Hyperparams hp = finite_hp(2);
  hp.alpha_h = 0.3;
  hp.alpha_l = 0.3;
  const std::vector<int> z{0, 1, 0, 1, 1};
  const Eigen::MatrixXd expect =
      0.3 * data.x * data.x.transpose() + Eigen::MatrixXd::Identity(2, 2);
  for (int k = 0; k < 2; ++k)
    CHECK(max_abs(build_h_naive(data, z, k, hp) - expect) < 1e-12);
}

TEST_CASE("build_h_naive equals its two-form decomposition") {
  Rng rng(3);
  Dataset data = random_dataset(rng, 2, 3);
  Hyperparams hp = finite_hp(2);
  const std::vector<int> z{0, 1, 0};
  for (int k = 0; k < 2; ++k) {
    Eigen::MatrixXd expect =
        hp.alpha_l * data.x * data.x.transpose() +
        Eigen::MatrixXd::Identity(2, 2);
    for (int j = 0; j < 3; ++j)
      if (z[j] == k)
        expect += (hp.alpha_h - hp.alpha_l) * data.x.col(j) *
                  data.x.col(j).transpose();
    CHECK(max_abs(build_h_naive(data, z, k, hp) - expect) < 1e-12);
  }
}

TEST_CASE("log_f_i closed form in one dimension") {
  Dataset data;
  data.x.resize(1, 1);
  data.x(0, 0) = 1.7;
  Hyperparams hp = finite_hp(1);
  hp.nu = 2.0;
  hp.lambda = 0.4;
  const std::vector<int> z{0};
  const PsdState h = build_psd(build_h_naive(data, z, 0, hp));
  const double got = log_f_i(data, z, 0, hp, h);
  const double expect =
      -((1.0 + hp.nu) / 2.0) * std::log(1.7 * 1.7 + hp.nu * hp.lambda);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("log_f_i of a zero sample only sees the determinant") {
  Rng rng(4);
  Dataset data = random_dataset(rng, 3, 2);
  data.x.col(1).setZero();
  Hyperparams hp = finite_hp(1);
  const std::vector<int> z{0, 0};
  const PsdState h = build_psd(build_h_naive(data, z, 0, hp));
  const double got = log_f_i(data, z, 1, hp, h);
  const double expect = -0.5 * h.logdet -
                        ((3.0 + hp.nu) / 2.0) * std::log(hp.nu * hp.lambda);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("log_f_i matches the from-scratch path on random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(4));
    const int n = 2 + static_cast<int>(rng.uniform_int(6));
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    Dataset data = random_dataset(rng, d, n);
    Hyperparams hp = finite_hp(k);
    std::vector<int> z(n);
    for (int i = 0; i < n; ++i) z[i] = static_cast<int>(rng.uniform_int(k));
    const int i = static_cast<int>(rng.uniform_int(n));
    const PsdState h = build_psd(build_h_naive(data, z, z[i], hp));
    const double fast = log_f_i(data, z, i, hp, h);
    const double slow = log_f_i_naive(data, z, i, hp);
    CHECK(std::abs(fast - slow) <= 1e-9 * std::max(1.0, std::abs(slow)));
  }
}

TEST_CASE("log_f0_finite reference values") {
  CHECK(std::abs(log_f0_finite({0, 0}, 2.0)) < 1e-14);
  CHECK(log_f0_finite({7}, 1.3) ==
        doctest::Approx(log_gamma(1.3 + 7.0)).epsilon(1e-14));
  CHECK(log_f0_finite({1, 1}, 1.0) ==
        doctest::Approx(2.0 * log_gamma(1.5)).epsilon(1e-14));
}

TEST_CASE("log_f0_dp reference values and empty rejection") {
  CHECK(log_f0_dp({9}, 3.0) == doctest::Approx(log_gamma(9.0)).epsilon(1e-14));
  CHECK(std::abs(log_f0_dp(std::vector<int>(6, 1), 1.0)) < 1e-14);
  CHECK(log_f0_dp({2, 3}, 0.5) ==
        doctest::Approx(std::log(0.5) + log_gamma(2.0) + log_gamma(3.0))
            .epsilon(1e-14));
  CHECK_THROWS_AS(log_f0_dp({2, 0, 3}, 1.0), EmptyCluster);
}

TEST_CASE("log_posterior_naive differences collapse to grouping terms") {
  Rng rng(6);
  Dataset data = random_dataset(rng, 2, 6);
  Hyperparams hp = finite_hp(3);
  hp.alpha_h = 0.2;
  hp.alpha_l = 0.2;
  const std::vector<int> z1{0, 1, 2, 0, 1, 2};
  const std::vector<int> z2{0, 0, 0, 1, 1, 2};
  const double lhs = log_posterior_naive(data, z1, hp) -
                     log_posterior_naive(data, z2, hp);
  const double rhs = log_f0_finite({2, 2, 2}, hp.beta0) -
                     log_f0_finite({3, 2, 1}, hp.beta0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("log_posterior_naive is invariant to relabeling clusters") {
  Rng rng(7);
  Dataset data = random_dataset(rng, 3, 7);
  Hyperparams hp = finite_hp(3);
  std::vector<int> z{0, 1, 2, 0, 1, 2, 1};
  const double base = log_posterior_naive(data, z, hp);
  std::vector<int> perm{0, 1, 2};
  std::sort(perm.begin(), perm.end());
  do {
    std::vector<int> zp(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) zp[i] = perm[z[i]];
    CHECK(std::abs(log_posterior_naive(data, zp, hp) - base) < 1e-10);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("log_posterior_naive reacts to data scaling") {
  Rng rng(8);
  Dataset data = random_dataset(rng, 2, 5);
  Hyperparams hp = finite_hp(2);
  const std::vector<int> z{0, 1, 0, 1, 0};
  const double base = log_posterior_naive(data, z, hp);
  Dataset scaled = data;
  scaled.x *= 3.0;
  CHECK(log_posterior_naive(scaled, z, hp) != doctest::Approx(base));
}

TEST_CASE("init_state agrees with the naive posterior") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(4));
    const int n = 2 + static_cast<int>(rng.uniform_int(8));
    const bool dp = trial % 2 == 1;
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    Hyperparams hp = dp ? dp_hp() : finite_hp(k);
    Dataset data = random_dataset(rng, d, n);
    std::vector<int> z(n);
    for (int i = 0; i < n; ++i) z[i] = static_cast<int>(rng.uniform_int(k));
    ClusterState state = init_state(data, z, hp);
    const double naive = log_posterior_naive(data, state.z, hp);
    CHECK(std::abs(state.log_post - naive) < 1e-6);

    int total = 0;
    for (const int c : state.counts) total += c;
    CHECK(total == n);
  }
}

TEST_CASE("init_state tracked factorizations match fresh ones") {
  Rng rng(10);
  Dataset data = random_dataset(rng, 3, 8);
  Hyperparams hp = finite_hp(3);
  const std::vector<int> z{0, 1, 2, 0, 1, 2, 0, 1};
  ClusterState state = init_state(data, z, hp);
  for (int k = 0; k < 3; ++k) {
    const PsdState fresh = build_psd(build_h_naive(data, state.z, k, hp));
    CHECK(max_abs(state.h_states[k].inverse - fresh.inverse) < 1e-6);
    CHECK(std::abs(state.h_states[k].logdet - fresh.logdet) < 1e-6);
  }
}

TEST_CASE("init_state puts everyone in one cluster when told to") {
  Rng rng(11);
  Dataset data = random_dataset(rng, 2, 6);
  ClusterState state = init_state(data, std::vector<int>(6, 0), finite_hp(1));
  CHECK(state.counts == std::vector<int>{6});
}

TEST_CASE("init_state compacts sparse labels in DP mode") {
  Rng rng(12);
  Dataset data = random_dataset(rng, 2, 5);
  const std::vector<int> z{7, 2, 7, 9, 2};
  ClusterState state = init_state(data, z, dp_hp());
  CHECK(state.num_clusters() == 3);
  CHECK(state.z == std::vector<int>{0, 1, 0, 2, 1});
  for (const int c : state.counts) CHECK(c > 0);
}

TEST_CASE("hyperparams validation rejects inverted alphas") {
  Hyperparams hp = finite_hp(2);
  hp.alpha_h = 1e-5;
  hp.alpha_l = 0.1;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  Hyperparams neg = finite_hp(2);
  neg.beta0 = -1.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

}  // TEST_SUITE
