#include "gcr/eval.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>
#include <unordered_map>
#include <utility>

#include "gcr/errors.hpp"
#include "gcr/numerics.hpp"

namespace gcr {

namespace {

// Minimum-cost perfect matching on a square cost matrix (potentials
// formulation, O(n^3)).
double assignment_min_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) total += cost[p[j] - 1][j - 1];
  return total;
}

int dense_index(std::unordered_map<int, int>& map, int label) {
  return map.try_emplace(label, static_cast<int>(map.size())).first->second;
}

}  // namespace

double clustering_accuracy(const std::vector<int>& predicted,
                           const std::vector<int>& truth) {
  if (predicted.empty()) throw EmptyInput("clustering_accuracy: empty input");
  if (predicted.size() != truth.size())
    throw LengthMismatch("clustering_accuracy: length mismatch");

  std::unordered_map<int, int> pmap, tmap;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i)
    pairs.emplace_back(dense_index(pmap, predicted[i]),
                       dense_index(tmap, truth[i]));

  const int n = std::max(static_cast<int>(pmap.size()),
                         static_cast<int>(tmap.size()));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (const auto& [p, t] : pairs) cost[p][t] -= 1.0;

  return -assignment_min_cost(cost) / static_cast<double>(predicted.size());
}

int numerical_rank(const Eigen::MatrixXd& m, double energy) {
  if (!(energy > 0.0 && energy <= 1.0))
    throw DomainError("numerical_rank: energy must lie in (0, 1]");
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (!(total > 0.0)) return 0;
  double acc = 0.0;
  for (int r = 0; r < sv.size(); ++r) {
    acc += sv(r) * sv(r);
    if (acc >= energy * total) return r + 1;
  }
  return static_cast<int>(sv.size());
}

DimStats dim_stats(const Dataset& data, double energy) {
  if (!data.has_labels()) throw EmptyInput("dim_stats: dataset has no labels");
  if (static_cast<int>(data.labels.size()) != data.count())
    throw LengthMismatch("dim_stats: labels/sample mismatch");

  DimStats out;
  out.energy = energy;
  out.pooled_dim = numerical_rank(data.x, energy);

  std::unordered_map<int, std::vector<int>> groups;
  for (int i = 0; i < data.count(); ++i) groups[data.labels[i]].push_back(i);
  for (const auto& [label, idx] : groups) {
    Eigen::MatrixXd sub(data.dim(), idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = data.x.col(idx[c]);
    out.summed_cluster_dims += numerical_rank(sub, energy);
  }
  return out;
}

Dataset pca_reduce(const Dataset& data, int target_dims) {
  if (data.count() < 1 || data.dim() < 1)
    throw EmptyInput("pca_reduce: empty dataset");
  if (target_dims < 1 || target_dims > data.dim())
    throw DomainError("pca_reduce: target_dims out of range");

  const Eigen::VectorXd mean = data.x.rowwise().mean();
  const Eigen::MatrixXd centered = data.x.colwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullU);
  Dataset out;
  out.x = svd.matrixU().leftCols(target_dims).transpose() * centered;
  out.labels = data.labels;
  return out;
}

Dataset pca_reduce_energy(const Dataset& data, double energy) {
  if (data.count() < 1 || data.dim() < 1)
    throw EmptyInput("pca_reduce: empty dataset");
  const Eigen::VectorXd mean = data.x.rowwise().mean();
  const Eigen::MatrixXd centered = data.x.colwise() - mean;
  const int r = std::max(1, numerical_rank(centered, energy));
  return pca_reduce(data, r);
}

PosteriorEnumeration enumerate_posterior(const Dataset& data,
                                         const Hyperparams& hp, int threads) {
  hp.validate();
  if (hp.mode != Mode::kFinite)
    throw ConfigError("enumerate_posterior: finite mode only");
  const int n = data.count();
  const int k = hp.num_clusters;

  double total_d = 1.0;
  for (int i = 0; i < n; ++i) {
    total_d *= static_cast<double>(k);
    if (total_d > 2e6)
      throw TooLarge("enumerate_posterior: K^N exceeds 2e6");
  }
  const long total = static_cast<long>(total_d);

  PosteriorEnumeration out;
  out.log_probs.resize(total);

  // Fixed block layout; the reduction order below never depends on the
  // thread count.
  const long block_size = std::max<long>(1, (total + 63) / 64);
  const int blocks = static_cast<int>((total + block_size - 1) / block_size);

  const auto decode = [k](long code, std::vector<int>& z) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = static_cast<int>(code % k);
      code /= k;
    }
  };

  const auto score_block = [&](int b) {
    std::vector<int> z(n);
    const long lo = b * block_size;
    const long hi = std::min(total, lo + block_size);
    for (long code = lo; code < hi; ++code) {
      decode(code, z);
      out.log_probs[code] = log_posterior_naive(data, z, hp);
    }
  };

  const int workers = std::max(1, std::min(threads, blocks));
  if (workers == 1) {
    for (int b = 0; b < blocks; ++b) score_block(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < blocks; b = next.fetch_add(1))
          score_block(b);
      });
    for (auto& t : pool) t.join();
  }

  const double log_z = log_sum_exp(out.log_probs);
  for (double& lp : out.log_probs) lp -= log_z;

  // Pairwise marginals, accumulated per block and combined in block order.
  std::vector<Eigen::MatrixXd> partial(
      blocks, Eigen::MatrixXd::Zero(n, n));
  const auto accumulate_block = [&](int b) {
    std::vector<int> z(n);
    const long lo = b * block_size;
    const long hi = std::min(total, lo + block_size);
    for (long code = lo; code < hi; ++code) {
      decode(code, z);
      const double p = std::exp(out.log_probs[code]);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (z[i] == z[j]) partial[b](i, j) += p;
    }
  };
  if (workers == 1) {
    for (int b = 0; b < blocks; ++b) accumulate_block(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < blocks; b = next.fetch_add(1))
          accumulate_block(b);
      });
    for (auto& t : pool) t.join();
  }
  out.coassignment = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < blocks; ++b) out.coassignment += partial[b];

  long best = 0;
  for (long c = 1; c < total; ++c)
    if (out.log_probs[c] > out.log_probs[best]) best = c;
  out.map_z.resize(n);
  decode(best, out.map_z);
  return out;
}

namespace {

// Log density helpers for the brute-force integral.
double log_normal(double v, double mean, double var) {
  const double r = v - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - r * r / (2.0 * var);
}

double log_inv_gamma(double s, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(s) - scale / s;
}

// One-axis composite Simpson in the log domain: values[j] are log f(t_j) on
// a uniform grid with spacing h over an even interval count.
double log_simpson(const std::vector<double>& values, double h) {
  const std::size_t n = values.size();
  std::vector<double> terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double coeff;
    if (j == 0 || j + 1 == n)
      coeff = 1.0;
    else
      coeff = (j % 2 == 1) ? 4.0 : 2.0;
    terms[j] = values[j] + std::log(coeff * h / 3.0);
  }
  return log_sum_exp(terms);
}

// log of integral over (w, s) of
//   N(x_i | w x_o, s) N(w | 0, s a) IG(s | shape, scale)
// with n_cells Simpson intervals per axis, s on a log grid.
//
// For fixed s the w integrand concentrates in two places: the prior bump
// around zero (width sqrt(s a)) and, when x_o != 0, the likelihood spike at
// x_i / x_o (width sqrt(s) / |x_o|). Each region gets its own Simpson grid
// so neither scale is undersampled; the spike pieces are clipped against
// the prior interval to avoid double counting. Mass falling strictly
// between the regions is provably below e^-72 of the peak and is ignored.
double log_marginal_grid(double x_i, double x_o, double a, double shape,
                         double scale, int n_cells) {
  const double t_lo = std::log(1e-10);
  const double t_hi = std::log(1e6);
  const double ht = (t_hi - t_lo) / n_cells;

  std::vector<double> outer(n_cells + 1);
  std::vector<double> inner(n_cells + 1);
  std::vector<double> piece_logs;
  for (int j = 0; j <= n_cells; ++j) {
    const double t = t_lo + j * ht;
    const double s = std::exp(t);

    const double ph = 12.0 * std::sqrt(s * a);
    std::vector<std::pair<double, double>> pieces{{-ph, ph}};
    if (std::abs(x_o) > 1e-300) {
      const double center = x_i / x_o;
      const double half = 12.0 * std::sqrt(s) / std::abs(x_o);
      const double lo = center - half;
      const double hi = center + half;
      if (lo < -ph) pieces.emplace_back(lo, std::min(hi, -ph));
      if (hi > ph) pieces.emplace_back(std::max(lo, ph), hi);
    }

    piece_logs.clear();
    for (const auto& [lo, hi] : pieces) {
      const double hw = (hi - lo) / n_cells;
      for (int m = 0; m <= n_cells; ++m) {
        const double w = lo + m * hw;
        inner[m] = log_normal(x_i, w * x_o, s) + log_normal(w, 0.0, s * a);
      }
      piece_logs.push_back(log_simpson(inner, hw));
    }
    outer[j] = log_sum_exp(piece_logs) + log_inv_gamma(s, shape, scale) + t;
  }
  return log_simpson(outer, ht);
}

double log_marginal_adaptive(double x_i, double x_o, double a, double shape,
                             double scale) {
  double prev = log_marginal_grid(x_i, x_o, a, shape, scale, 64);
  for (int n_cells = 128; n_cells <= 4096; n_cells *= 2) {
    const double cur = log_marginal_grid(x_i, x_o, a, shape, scale, n_cells);
    if (std::abs(cur - prev) <= 1e-6) return cur;
    prev = cur;
  }
  throw QuadratureFailure("log_marginal_adaptive: grid refinement stalled");
}

}  // namespace

MarginalRatioCheck quadrature_marginal_check(const Dataset& data,
                                             const Hyperparams& hp) {
  if (data.dim() != 1 || data.count() != 2)
    throw DomainError("quadrature_marginal_check: needs 2 samples in 1-D");

  Hyperparams local = hp;
  local.mode = Mode::kFinite;
  local.num_clusters = 2;
  local.validate();

  MarginalRatioCheck out;
  out.closed_form =
      std::exp(log_posterior_naive(data, {0, 0}, local) -
               log_posterior_naive(data, {0, 1}, local));

  const double shape = local.nu / 2.0;
  const double scale = local.nu * local.lambda / 2.0;
  const double half_b = local.beta0 / 2.0;
  const double lf0_same = log_gamma(half_b + 2.0) + log_gamma(half_b);
  const double lf0_diff = 2.0 * log_gamma(half_b + 1.0);

  const double x0 = data.x(0, 0);
  const double x1 = data.x(0, 1);
  double log_ratio = lf0_same - lf0_diff;
  log_ratio += log_marginal_adaptive(x0, x1, local.alpha_h, shape, scale) -
               log_marginal_adaptive(x0, x1, local.alpha_l, shape, scale);
  log_ratio += log_marginal_adaptive(x1, x0, local.alpha_h, shape, scale) -
               log_marginal_adaptive(x1, x0, local.alpha_l, shape, scale);
  out.quadrature = std::exp(log_ratio);
  return out;
}

}  // namespace gcr
