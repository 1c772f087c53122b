#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gcr/model.hpp"

namespace gcr {

// Fraction of samples whose predicted label matches the truth under the
// best one-to-one matching of label sets (optimal assignment on the
// contingency table). Label values are opaque on both sides.
double clustering_accuracy(const std::vector<int>& predicted,
                           const std::vector<int>& truth);

// Numerical rank: smallest r such that the top r squared singular values
// hold at least `energy` of their total. Zero matrices have rank 0.
int numerical_rank(const Eigen::MatrixXd& m, double energy);

struct DimStats {
  int pooled_dim = 0;           // rank of the full sample matrix
  int summed_cluster_dims = 0;  // sum of per-cluster ranks
  double energy = 0.0;          // threshold the ranks were taken at
};

// Compares the dimension cost of treating the data as one subspace versus
// one subspace per labeled cluster. Requires ground-truth labels. The
// default threshold means "exact rank".
DimStats dim_stats(const Dataset& data, double energy = 1.0 - 1e-9);

// Classic PCA: centers the samples, then projects onto the top target_dims
// principal directions.
Dataset pca_reduce(const Dataset& data, int target_dims);

// Same, keeping just enough directions to hold `energy` of the centered
// spectrum.
Dataset pca_reduce_energy(const Dataset& data, double energy);

// Exact posterior over all K^N assignments (finite mode). Assignment c
// decodes as z_i = (c / K^i) mod K. Work is split into fixed blocks that
// are reduced in index order, so results do not depend on the number of
// worker threads.
struct PosteriorEnumeration {
  std::vector<double> log_probs;   // normalized, one per assignment code
  Eigen::MatrixXd coassignment;    // exact pairwise co-assignment marginals
  std::vector<int> map_z;          // highest-probability assignment
};
PosteriorEnumeration enumerate_posterior(const Dataset& data,
                                         const Hyperparams& hp,
                                         int threads = 1);

// Independent cross-check of the collapsed two-sample posterior in one
// dimension: the same/split odds computed once from the collapsed closed
// form and once by brute-force numerical integration over the latent
// regression weight and noise scale (log-domain composite Simpson, grids
// doubled until stable). Nothing is shared with the closed-form path.
struct MarginalRatioCheck {
  double closed_form = 0.0;
  double quadrature = 0.0;
};
MarginalRatioCheck quadrature_marginal_check(const Dataset& data,
                                             const Hyperparams& hp);

}  // namespace gcr
