#include "gcr/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "gcr/errors.hpp"

namespace gcr {

void ChainConfig::validate() const {
  if (epochs < 1) throw ConfigError("chain: epochs must be >= 1");
  if (retain < 1 || retain > epochs)
    throw ConfigError("chain: retain must be in [1, epochs]");
}

namespace {

constexpr double kDenomTol = 1e-12;

void rebuild_all(ClusterState& state, const Dataset& data,
                 const Hyperparams& hp) {
  for (int k = 0; k < state.num_clusters(); ++k)
    rebuild_cluster(state, data, hp, k);
  refresh_log_post(state, hp);
}

// Recounts and, in DP mode, drops empty clusters. Used to make the slow
// path of apply_move idempotent no matter how far the fast path got.
void enforce_structure(ClusterState& state, const Hyperparams& hp) {
  state.counts.assign(state.h_states.size(), 0);
  for (int zi : state.z) ++state.counts[zi];
  if (hp.mode != Mode::kDp) return;
  for (int k = state.num_clusters() - 1; k >= 0; --k) {
    if (state.counts[k] > 0) continue;
    state.counts.erase(state.counts.begin() + k);
    state.h_states.erase(state.h_states.begin() + k);
    for (int& zi : state.z)
      if (zi > k) --zi;
  }
}

}  // namespace

void conditional_logits(const ClusterState& state, const Dataset& data,
                        const Hyperparams& hp, int i, SamplerScratch& s,
                        std::vector<double>& out) {
  const int n = data.count();
  const int d = data.dim();
  const int k_live = state.num_clusters();
  if (i < 0 || i >= n) throw DomainError("conditional_logits: index out of range");
  const int a = state.z[i];
  const double c = hp.alpha_h - hp.alpha_l;
  const bool dp = hp.mode == Mode::kDp;
  const int n_cand = dp ? k_live + 1 : k_live;
  const auto x_i = data.x.col(i);

  out.assign(n_cand, 0.0);
  s.u_all.resize(d, k_live);
  s.qi.resize(k_live);
  s.log_t.resize(k_live);
  s.delta.assign(n_cand, 0.0);

  for (int k = 0; k < k_live; ++k) {
    s.u_all.col(k).noalias() = state.h_states[k].inverse * x_i;
    s.qi[k] = std::max(0.0, x_i.dot(s.u_all.col(k)));
    const double t = k == a ? 1.0 - c * s.qi[k] : 1.0 + c * s.qi[k];
    if (t <= kDenomTol)
      throw DowndateSingular("conditional_logits: exit denominator collapsed");
    s.log_t[k] = std::log(t);
  }
  const double t_a = 1.0 - c * s.qi[a];

  // Member factors: how every other sample's f would change. Samples in a
  // react to i leaving (always), samples in g != a react only when the
  // candidate is g.
  double total_cache = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    total_cache += state.log_fi_cache[j];
    const int g = state.z[j];
    const double dot = data.x.col(j).dot(s.u_all.col(g));
    double q2, logdet2;
    if (g == a) {
      q2 = state.q_cache[j] + c * dot * dot / t_a;
      logdet2 = state.h_states[a].logdet + s.log_t[a];
    } else {
      const double t_g = 1.0 + c * s.qi[g];
      q2 = state.q_cache[j] - c * dot * dot / t_g;
      logdet2 = state.h_states[g].logdet + s.log_t[g];
    }
    const DowndateStats st =
        self_downdate_stats(std::max(0.0, q2), logdet2, hp.alpha_h);
    s.delta[g] += log_f_from_stats(st.logdet, st.quad, d, hp) -
                  state.log_fi_cache[j];
  }

  // Grouping factor with i removed; each candidate then adds one sample back
  // via Gamma(t + 1) = t Gamma(t).
  double f0_base = 0.0;
  int live_wo_i = 0;
  const double per = hp.beta0 / static_cast<double>(k_live);
  for (int k = 0; k < k_live; ++k) {
    const int nk = state.counts[k] - (k == a ? 1 : 0);
    if (dp) {
      if (nk > 0) {
        ++live_wo_i;
        f0_base += log_gamma(static_cast<double>(nk));
      }
    } else {
      f0_base += log_gamma(per + static_cast<double>(nk));
    }
  }

  for (int b = 0; b < n_cand; ++b) {
    const bool fresh = b == k_live;
    const int nb = fresh ? 0 : state.counts[b] - (b == a ? 1 : 0);

    double f0;
    if (dp) {
      f0 = nb > 0 ? f0_base + std::log(static_cast<double>(nb)) +
                        static_cast<double>(live_wo_i - 1) * std::log(hp.beta0)
                  : f0_base + static_cast<double>(live_wo_i) * std::log(hp.beta0);
    } else {
      f0 = f0_base + std::log(per + static_cast<double>(nb));
    }

    double fi;
    if (b == a) {
      fi = state.log_fi_cache[i];
    } else {
      const double q = fresh ? state.base_quad[i] : s.qi[b];
      const double ld = fresh ? state.base_gram.logdet : state.h_states[b].logdet;
      const DowndateStats st = self_downdate_stats(q, ld, hp.alpha_l);
      fi = log_f_from_stats(st.logdet, st.quad, d, hp);
    }

    out[b] = f0 + fi + total_cache + (b == a ? 0.0 : s.delta[a] + s.delta[b]);
  }
}

std::vector<double> conditional_logits(const ClusterState& state,
                                       const Dataset& data,
                                       const Hyperparams& hp, int i) {
  SamplerScratch scratch;
  std::vector<double> out;
  conditional_logits(state, data, hp, i, scratch, out);
  return out;
}

void apply_move(ClusterState& state, const Dataset& data,
                const Hyperparams& hp, int i, int target) {
  const int n = data.count();
  const int k_live = state.num_clusters();
  const bool dp = hp.mode == Mode::kDp;
  if (i < 0 || i >= n) throw DomainError("apply_move: index out of range");
  const int max_target = dp ? k_live : k_live - 1;
  if (target < 0 || target > max_target)
    throw DomainError("apply_move: target out of range");

  const int a = state.z[i];
  if (target == a) return;
  const double c = hp.alpha_h - hp.alpha_l;
  const auto x_i = data.x.col(i);

  try {
    // Exit: downdate H_a and the quadratic caches of a's other members.
    {
      const Eigen::VectorXd u = state.h_states[a].inverse * x_i;
      const double qi_a = std::max(0.0, x_i.dot(u));
      const double t_a = 1.0 - c * qi_a;
      if (t_a <= kDenomTol)
        throw DowndateSingular("apply_move: exit denominator collapsed");
      for (int j = 0; j < n; ++j) {
        if (state.z[j] != a || j == i) continue;
        const double dot = data.x.col(j).dot(u);
        state.q_cache[j] += c * dot * dot / t_a;
      }
      rank1_update(state.h_states[a], x_i, -c);
    }

    // Join: update H_target (or open a fresh cluster from the base gram)
    // and the caches of its members.
    if (target == k_live) {
      state.h_states.push_back(state.base_gram);
      rank1_update(state.h_states.back(), x_i, c);
      state.counts.push_back(0);
      state.q_cache[i] =
          state.base_quad[i] / (1.0 + c * state.base_quad[i]);
    } else {
      const Eigen::VectorXd u = state.h_states[target].inverse * x_i;
      const double qi_b = std::max(0.0, x_i.dot(u));
      const double t_b = 1.0 + c * qi_b;
      for (int j = 0; j < n; ++j) {
        if (state.z[j] != target) continue;
        const double dot = data.x.col(j).dot(u);
        state.q_cache[j] -= c * dot * dot / t_b;
      }
      state.q_cache[i] = qi_b / t_b;
      rank1_update(state.h_states[target], x_i, c);
    }

    --state.counts[a];
    ++state.counts[target];
    state.z[i] = target;

    // Per-sample factors of the two touched clusters.
    for (int j = 0; j < n; ++j) {
      const int g = state.z[j];
      if (g != a && g != target) continue;
      const DowndateStats st = self_downdate_stats(
          std::max(0.0, state.q_cache[j]), state.h_states[g].logdet,
          hp.alpha_h);
      state.log_fi_cache[j] =
          log_f_from_stats(st.logdet, st.quad, data.dim(), hp);
    }

    if (dp && state.counts[a] == 0) {
      state.counts.erase(state.counts.begin() + a);
      state.h_states.erase(state.h_states.begin() + a);
      for (int& zi : state.z)
        if (zi > a) --zi;
    }
    refresh_log_post(state, hp);
  } catch (const DowndateSingular&) {
    // Slow path: force the structural change, then rebuild everything.
    if (target == k_live &&
        static_cast<int>(state.h_states.size()) == k_live)
      state.h_states.push_back(state.base_gram);
    state.z[i] = target;
    enforce_structure(state, hp);
    rebuild_all(state, data, hp);
  }
}

void gibbs_sweep(ClusterState& state, const Dataset& data,
                 const Hyperparams& hp, Rng& rng, SamplerScratch& scratch) {
  for (int i = 0; i < data.count(); ++i) {
    try {
      conditional_logits(state, data, hp, i, scratch, scratch.logits);
    } catch (const DowndateSingular&) {
      rebuild_all(state, data, hp);
      conditional_logits(state, data, hp, i, scratch, scratch.logits);
    }
    const int pick = sample_categorical(scratch.logits, rng);
    apply_move(state, data, hp, i, pick);
  }
}

ChainSamples run_chain(const Dataset& data, const Hyperparams& hp,
                       const ChainConfig& cfg, const std::vector<int>& init_z) {
  cfg.validate();
  ClusterState state = init_state(data, init_z, hp);
  Rng rng(cfg.seed);
  SamplerScratch scratch;

  ChainSamples out;
  out.epochs = cfg.epochs;
  out.burn_in = cfg.epochs - cfg.retain;
  out.samples.reserve(cfg.retain);
  for (int e = 0; e < cfg.epochs; ++e) {
    gibbs_sweep(state, data, hp, rng, scratch);
    if (e >= out.burn_in) out.samples.push_back(state.z);
  }
  return out;
}

std::vector<int> map_ascent(const Dataset& data, const Hyperparams& hp,
                            const std::vector<int>& init_z, int max_sweeps) {
  if (hp.mode != Mode::kFinite)
    throw ConfigError("map_ascent: finite mode only");
  ClusterState state = init_state(data, init_z, hp);
  SamplerScratch scratch;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < data.count(); ++i) {
      try {
        conditional_logits(state, data, hp, i, scratch, scratch.logits);
      } catch (const DowndateSingular&) {
        rebuild_all(state, data, hp);
        conditional_logits(state, data, hp, i, scratch, scratch.logits);
      }
      int best = 0;
      for (int b = 1; b < static_cast<int>(scratch.logits.size()); ++b)
        if (scratch.logits[b] > scratch.logits[best]) best = b;
      if (best != state.z[i]) {
        apply_move(state, data, hp, i, best);
        changed = true;
      }
    }
    if (!changed) return state.z;
  }
  throw NonConvergence("map_ascent: no fixed point within sweep budget");
}

}  // namespace gcr
