#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gcr/numerics.hpp"

namespace gcr {

// Samples are columns of x. Labels are optional ground truth (1-based,
// parallel to the columns); empty means unlabeled.
struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> labels;

  int dim() const { return static_cast<int>(x.rows()); }
  int count() const { return static_cast<int>(x.cols()); }
  bool has_labels() const { return !labels.empty(); }
};

enum class Mode { kFinite, kDp };

struct Hyperparams {
  double beta0 = 1.0;
  double nu = 1.0;
  double lambda = 1.0;
  double alpha_h = 0.1;
  double alpha_l = 1e-5;
  Mode mode = Mode::kFinite;
  int num_clusters = 2;  // K; ignored in DP mode

  void validate() const;
};

// Collapsed state of one Markov chain: the indicator vector plus everything
// needed to score single-coordinate moves without refactorizing.
//
// h_states[k] tracks H_k = alpha_l * X X^T + I + (alpha_h - alpha_l) *
// sum_{z_j = k} x_j x_j^T. q_cache[i] = x_i^T H_{z_i}^{-1} x_i and
// log_fi_cache[i] the per-sample factor of the collapsed posterior.
//
// Finite mode keeps all K clusters alive (possibly empty). DP mode keeps
// labels compacted to 0..K-1 with every cluster nonempty, and additionally
// carries the member-free gram state (base_gram, base_quad) used to score
// brand-new clusters.
struct ClusterState {
  std::vector<int> z;
  std::vector<int> counts;
  std::vector<PsdState> h_states;
  std::vector<double> q_cache;
  std::vector<double> log_fi_cache;
  double log_post = 0.0;
  PsdState base_gram;
  std::vector<double> base_quad;

  int num_clusters() const { return static_cast<int>(counts.size()); }
};

// Gibbs samples retained from one chain, oldest first, as 0-based indicator
// vectors.
struct ChainSamples {
  std::vector<std::vector<int>> samples;
  int epochs = 0;
  int burn_in = 0;

  int retained() const { return static_cast<int>(samples.size()); }
};

// H_k assembled from scratch (reference path, O(N D^2)).
Eigen::MatrixXd build_h_naive(const Dataset& data, const std::vector<int>& z,
                              int k, const Hyperparams& hp);

// Per-sample factor of the collapsed posterior,
//   log f_i = -1/2 logdet(C_i) - (D + nu)/2 * log(x_i^T C_i^{-1} x_i +
//             nu * lambda),  C_i = H_{z_i} - alpha_h * x_i x_i^T,
// computed from the cluster's tracked state.
double log_f_i(const Dataset& data, const std::vector<int>& z, int i,
               const Hyperparams& hp, const PsdState& h_state);

// Same value, rebuilt from scratch with a fresh factorization.
double log_f_i_naive(const Dataset& data, const std::vector<int>& z, int i,
                     const Hyperparams& hp);

// Shared formula: log f from logdet(C_i) and x_i^T C_i^{-1} x_i.
double log_f_from_stats(double logdet_c, double quad_c, int dim,
                        const Hyperparams& hp);

// Grouping factor, finite mixture: sum_k log Gamma(beta0 / k_total + n_k).
double log_f0_finite(const std::vector<int>& counts, double beta0);

// Grouping factor, Dirichlet process: (K - 1) log beta0 + sum over nonempty
// clusters of log Gamma(n_k), K the number of nonempty clusters.
double log_f0_dp(const std::vector<int>& counts, double beta0);

// Unnormalized log posterior of an indicator vector, everything rebuilt from
// scratch. In DP mode z may carry arbitrary (non-contiguous) labels.
double log_posterior_naive(const Dataset& data, const std::vector<int>& z,
                           const Hyperparams& hp);

// Builds the full tracked state for an initial assignment. Finite mode
// requires labels in [0, K); DP mode accepts any labels and compacts them.
ClusterState init_state(const Dataset& data, std::vector<int> z,
                        const Hyperparams& hp);

// Recomputes cluster k of the state from scratch (fresh factorization plus
// fresh caches for its members). Fallback when incremental updates hit a
// singular downdate.
void rebuild_cluster(ClusterState& state, const Dataset& data,
                     const Hyperparams& hp, int k);

// Recomputes log_post from counts and log_fi_cache.
void refresh_log_post(ClusterState& state, const Hyperparams& hp);

}  // namespace gcr
