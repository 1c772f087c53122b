#include "gcr/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "gcr/errors.hpp"

namespace gcr {

void Hyperparams::validate() const {
  if (!(beta0 > 0.0)) throw ConfigError("hyperparams: beta0 must be > 0");
  if (!(nu > 0.0)) throw ConfigError("hyperparams: nu must be > 0");
  if (!(lambda > 0.0)) throw ConfigError("hyperparams: lambda must be > 0");
  if (!(alpha_l >= 0.0)) throw ConfigError("hyperparams: alpha_l must be >= 0");
  // Equality is the degenerate no-grouping limit; C_i stays positive
  // definite there, so it is allowed.
  if (!(alpha_h >= alpha_l))
    throw ConfigError("hyperparams: alpha_h must be at least alpha_l");
  if (mode == Mode::kFinite && num_clusters < 1)
    throw ConfigError("hyperparams: num_clusters must be >= 1");
}

namespace {

void check_assignment(const Dataset& data, const std::vector<int>& z,
                      const Hyperparams& hp) {
  if (data.count() < 1 || data.dim() < 1)
    throw EmptyInput("model: dataset must be nonempty");
  if (static_cast<int>(z.size()) != data.count())
    throw LengthMismatch("model: indicator length != sample count");
  if (hp.mode == Mode::kFinite) {
    for (int zi : z)
      if (zi < 0 || zi >= hp.num_clusters)
        throw DomainError("model: indicator outside [0, K)");
  }
}

}  // namespace

Eigen::MatrixXd build_h_naive(const Dataset& data, const std::vector<int>& z,
                              int k, const Hyperparams& hp) {
  check_assignment(data, z, hp);
  const int d = data.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d);
  h.noalias() += hp.alpha_l * (data.x * data.x.transpose());
  const double c = hp.alpha_h - hp.alpha_l;
  for (int j = 0; j < data.count(); ++j)
    if (z[j] == k) h.noalias() += c * (data.x.col(j) * data.x.col(j).transpose());
  return 0.5 * (h + h.transpose()).eval();
}

double log_f_from_stats(double logdet_c, double quad_c, int dim,
                        const Hyperparams& hp) {
  return -0.5 * logdet_c -
         0.5 * (dim + hp.nu) * std::log(quad_c + hp.nu * hp.lambda);
}

double log_f_i(const Dataset& data, const std::vector<int>& z, int i,
               const Hyperparams& hp, const PsdState& h_state) {
  check_assignment(data, z, hp);
  if (i < 0 || i >= data.count()) throw DomainError("log_f_i: index out of range");
  const double q = quad_form(h_state, data.x.col(i));
  const DowndateStats st = self_downdate_stats(q, h_state.logdet, hp.alpha_h);
  return log_f_from_stats(st.logdet, st.quad, data.dim(), hp);
}

double log_f_i_naive(const Dataset& data, const std::vector<int>& z, int i,
                     const Hyperparams& hp) {
  check_assignment(data, z, hp);
  if (i < 0 || i >= data.count())
    throw DomainError("log_f_i_naive: index out of range");
  Eigen::MatrixXd c = build_h_naive(data, z, z[i], hp);
  c.noalias() -= hp.alpha_h * (data.x.col(i) * data.x.col(i).transpose());
  const PsdState psd = build_psd(0.5 * (c + c.transpose()));
  return log_f_from_stats(psd.logdet, quad_form(psd, data.x.col(i)),
                          data.dim(), hp);
}

double log_f0_finite(const std::vector<int>& counts, double beta0) {
  if (counts.empty()) throw EmptyInput("log_f0_finite: no clusters");
  const double per = beta0 / static_cast<double>(counts.size());
  double acc = 0.0;
  for (int n : counts) acc += log_gamma(per + static_cast<double>(n));
  return acc;
}

double log_f0_dp(const std::vector<int>& counts, double beta0) {
  if (counts.empty()) throw EmptyInput("log_f0_dp: no clusters");
  double acc = 0.0;
  for (int n : counts) {
    if (n <= 0) throw EmptyCluster("log_f0_dp: empty cluster in counts");
    acc += log_gamma(static_cast<double>(n));
  }
  return static_cast<double>(counts.size() - 1) * std::log(beta0) + acc;
}

double log_posterior_naive(const Dataset& data, const std::vector<int>& z,
                           const Hyperparams& hp) {
  hp.validate();
  check_assignment(data, z, hp);

  double f0;
  if (hp.mode == Mode::kFinite) {
    std::vector<int> counts(hp.num_clusters, 0);
    for (int zi : z) ++counts[zi];
    f0 = log_f0_finite(counts, hp.beta0);
  } else {
    std::unordered_map<int, int> tally;
    for (int zi : z) ++tally[zi];
    std::vector<int> counts;
    counts.reserve(tally.size());
    for (const auto& [label, n] : tally) counts.push_back(n);
    f0 = log_f0_dp(counts, hp.beta0);
  }

  double acc = f0;
  for (int i = 0; i < data.count(); ++i)
    acc += log_f_i_naive(data, z, i, hp);
  return acc;
}

ClusterState init_state(const Dataset& data, std::vector<int> z,
                        const Hyperparams& hp) {
  hp.validate();
  check_assignment(data, z, hp);
  const int n = data.count();

  ClusterState state;
  if (hp.mode == Mode::kDp) {
    // Compact labels to 0..K-1 in order of first appearance.
    std::unordered_map<int, int> remap;
    for (int& zi : z) {
      auto [it, fresh] = remap.try_emplace(zi, static_cast<int>(remap.size()));
      zi = it->second;
      (void)fresh;
    }
  }
  state.z = std::move(z);

  const int k_total = hp.mode == Mode::kFinite
                          ? hp.num_clusters
                          : 1 + *std::max_element(state.z.begin(), state.z.end());
  state.counts.assign(k_total, 0);
  for (int zi : state.z) ++state.counts[zi];

  state.h_states.reserve(k_total);
  for (int k = 0; k < k_total; ++k)
    state.h_states.push_back(build_psd(build_h_naive(data, state.z, k, hp)));

  if (hp.mode == Mode::kDp) {
    const int d = data.dim();
    Eigen::MatrixXd base = Eigen::MatrixXd::Identity(d, d);
    base.noalias() += hp.alpha_l * (data.x * data.x.transpose());
    state.base_gram = build_psd(0.5 * (base + base.transpose()));
    state.base_quad.resize(n);
    for (int i = 0; i < n; ++i)
      state.base_quad[i] = quad_form(state.base_gram, data.x.col(i));
  }

  state.q_cache.resize(n);
  state.log_fi_cache.resize(n);
  for (int i = 0; i < n; ++i) {
    const PsdState& h = state.h_states[state.z[i]];
    state.q_cache[i] = quad_form(h, data.x.col(i));
    const DowndateStats st =
        self_downdate_stats(state.q_cache[i], h.logdet, hp.alpha_h);
    state.log_fi_cache[i] = log_f_from_stats(st.logdet, st.quad, data.dim(), hp);
  }

  refresh_log_post(state, hp);
  return state;
}

void rebuild_cluster(ClusterState& state, const Dataset& data,
                     const Hyperparams& hp, int k) {
  state.h_states[k] = build_psd(build_h_naive(data, state.z, k, hp));
  const PsdState& h = state.h_states[k];
  for (int i = 0; i < data.count(); ++i) {
    if (state.z[i] != k) continue;
    state.q_cache[i] = quad_form(h, data.x.col(i));
    const DowndateStats st =
        self_downdate_stats(state.q_cache[i], h.logdet, hp.alpha_h);
    state.log_fi_cache[i] = log_f_from_stats(st.logdet, st.quad, data.dim(), hp);
  }
}

void refresh_log_post(ClusterState& state, const Hyperparams& hp) {
  double acc = hp.mode == Mode::kFinite
                   ? log_f0_finite(state.counts, hp.beta0)
                   : log_f0_dp(state.counts, hp.beta0);
  for (double v : state.log_fi_cache) acc += v;
  state.log_post = acc;
}

}  // namespace gcr
