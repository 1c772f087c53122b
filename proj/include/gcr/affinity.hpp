#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gcr/model.hpp"
#include "gcr/rng.hpp"

namespace gcr {

enum class AffinityKind { kCoAssignment, kProbabilistic, kInit };

struct AffinityMatrix {
  Eigen::MatrixXd values;  // N x N, symmetric, nonnegative
  AffinityKind kind = AffinityKind::kCoAssignment;
};

// Binary co-assignment of one indicator vector: entry (i, j) is 1 when
// z_i == z_j.
AffinityMatrix coassignment_matrix(const std::vector<int>& z);

// Mean co-assignment over retained Gibbs samples. Sums integer-valued
// matrices first and divides once, so the result does not depend on sample
// order.
AffinityMatrix probabilistic_affinity(const ChainSamples& samples);

// Model-free warm-start affinity: elementwise absolute value of
// (X^T X + delta I)^{-1}.
AffinityMatrix init_affinity(const Dataset& data, double delta);

// Default ridge for init_affinity: 1e-3 * trace(X^T X) / N.
double default_init_jitter(const Dataset& data);

// Normalized-cut spectral embedding: rows of the top-k eigenvectors of
// D^{-1/2} G D^{-1/2}, each row scaled to unit length (rows that are
// numerically zero stay zero). Degrees are floored at 1e-12.
Eigen::MatrixXd spectral_embed(const AffinityMatrix& g, int k);

// Lloyd's algorithm over the rows of points, k-means++ seeding, restarted
// and keeping the lowest within-cluster sum of squares. Emptied clusters
// are reseeded at the point farthest from its centroid.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, Rng& rng,
                        int restarts = 20);

// spectral_embed followed by kmeans; the standard spectral rounding.
// Labels run 1..k to match Dataset label conventions.
std::vector<int> ncut_cluster(const AffinityMatrix& g, int k, Rng& rng);

}  // namespace gcr
