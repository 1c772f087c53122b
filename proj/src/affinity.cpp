#include "gcr/affinity.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "gcr/errors.hpp"

namespace gcr {

namespace {
constexpr double kDegreeFloor = 1e-12;
constexpr double kZeroRowTol = 1e-12;
constexpr int kLloydCap = 100;
}  // namespace

AffinityMatrix coassignment_matrix(const std::vector<int>& z) {
  const int n = static_cast<int>(z.size());
  if (n == 0) throw EmptyInput("coassignment_matrix: empty indicator");
  AffinityMatrix g;
  g.kind = AffinityKind::kCoAssignment;
  g.values.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g.values(i, j) = z[i] == z[j] ? 1.0 : 0.0;
  return g;
}

AffinityMatrix probabilistic_affinity(const ChainSamples& samples) {
  if (samples.samples.empty())
    throw EmptyInput("probabilistic_affinity: no retained samples");
  const int n = static_cast<int>(samples.samples.front().size());
  if (n == 0) throw EmptyInput("probabilistic_affinity: empty indicators");

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (const auto& z : samples.samples) {
    if (static_cast<int>(z.size()) != n)
      throw LengthMismatch("probabilistic_affinity: ragged samples");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (z[i] == z[j]) acc(i, j) += 1.0;
  }
  AffinityMatrix g;
  g.kind = AffinityKind::kProbabilistic;
  g.values = acc / static_cast<double>(samples.samples.size());
  return g;
}

double default_init_jitter(const Dataset& data) {
  if (data.count() < 1) throw EmptyInput("default_init_jitter: empty dataset");
  return 1e-3 * data.x.squaredNorm() / static_cast<double>(data.count());
}

AffinityMatrix init_affinity(const Dataset& data, double delta) {
  if (data.count() < 1 || data.dim() < 1)
    throw EmptyInput("init_affinity: empty dataset");
  if (!(delta > 0.0)) throw DomainError("init_affinity: delta must be > 0");

  const int n = data.count();
  Eigen::MatrixXd gram = data.x.transpose() * data.x;
  gram.diagonal().array() += delta;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("init_affinity: gram factorization failed");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  AffinityMatrix g;
  g.kind = AffinityKind::kInit;
  g.values = 0.5 * (inv.cwiseAbs() + inv.cwiseAbs().transpose());
  return g;
}

Eigen::MatrixXd spectral_embed(const AffinityMatrix& g, int k) {
  const int n = static_cast<int>(g.values.rows());
  if (n == 0 || g.values.cols() != n)
    throw DomainError("spectral_embed: affinity must be square and nonempty");
  if (k < 1 || k > n) throw DomainError("spectral_embed: k out of range");
  if ((g.values.array() < 0.0).any())
    throw DomainError("spectral_embed: negative affinity entries");

  Eigen::VectorXd inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i) {
    const double deg = std::max(g.values.row(i).sum(), kDegreeFloor);
    inv_sqrt_deg(i) = 1.0 / std::sqrt(deg);
  }
  Eigen::MatrixXd s =
      inv_sqrt_deg.asDiagonal() * g.values * inv_sqrt_deg.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success)
    throw EigenFailure("spectral_embed: eigendecomposition failed");

  // Eigenvalues come back ascending; the top k live in the last columns.
  Eigen::MatrixXd embed = eig.eigenvectors().rightCols(k);
  for (int i = 0; i < n; ++i) {
    const double norm = embed.row(i).norm();
    if (norm > kZeroRowTol) embed.row(i) /= norm;
  }
  return embed;
}

namespace {

double lloyd_once(const Eigen::MatrixXd& points, int k, Rng& rng,
                  std::vector<int>& labels) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());

  // k-means++ seeding.
  Eigen::MatrixXd centroids(k, d);
  centroids.row(0) = points.row(rng.uniform_int(n));
  Eigen::VectorXd dist2 =
      (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    int pick;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(n));
    }
    centroids.row(c) = points.row(pick);
    dist2 = dist2.cwiseMin(
        (points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  labels.assign(n, 0);
  std::vector<int> sizes(k, 0);
  for (int iter = 0; iter < kLloydCap; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (points.row(i) - centroids.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    centroids.setZero();
    std::fill(sizes.begin(), sizes.end(), 0);
    for (int i = 0; i < n; ++i) {
      centroids.row(labels[i]) += points.row(i);
      ++sizes[labels[i]];
    }
    for (int c = 0; c < k; ++c)
      if (sizes[c] > 0) centroids.row(c) /= static_cast<double>(sizes[c]);
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      // Reseed an emptied cluster at the worst-fit point.
      int far = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (sizes[labels[i]] <= 0) continue;
        const double dd =
            (points.row(i) - centroids.row(labels[i])).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      centroids.row(c) = points.row(far);
      --sizes[labels[far]];
      labels[far] = c;
      sizes[c] = 1;
    }
  }

  double wcss = 0.0;
  for (int i = 0; i < n; ++i)
    wcss += (points.row(i) - centroids.row(labels[i])).squaredNorm();
  return wcss;
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, Rng& rng,
                        int restarts) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw EmptyInput("kmeans: no points");
  if (k < 1 || k > n) throw DomainError("kmeans: k out of range");
  if (restarts < 1) throw DomainError("kmeans: restarts must be >= 1");

  std::vector<int> best_labels, labels;
  double best_wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    const double wcss = lloyd_once(points, k, rng, labels);
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best_labels = labels;
    }
  }
  return best_labels;
}

std::vector<int> ncut_cluster(const AffinityMatrix& g, int k, Rng& rng) {
  std::vector<int> z = kmeans(spectral_embed(g, k), k, rng);
  for (int& c : z) ++c;
  return z;
}

}  // namespace gcr
