#pragma once

#include <cstdint>
#include <vector>

#include "gcr/model.hpp"
#include "gcr/rng.hpp"

namespace gcr {

struct ChainConfig {
  int epochs = 500;
  int retain = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// Scratch buffers reused across conditional evaluations so a sweep does not
// allocate per sample.
struct SamplerScratch {
  Eigen::MatrixXd u_all;       // column k holds H_k^{-1} x_i
  std::vector<double> qi;      // x_i^T H_k^{-1} x_i
  std::vector<double> log_t;   // log join/leave denominators per cluster
  std::vector<double> delta;   // summed member-factor change per candidate
  std::vector<double> logits;
};

// Unnormalized log posterior of every candidate reassignment of sample i,
// on the same absolute scale as log_posterior_naive. In finite mode the
// result has K entries; in DP mode num_clusters() + 1 entries where the
// last one scores a brand-new cluster. Throws DowndateSingular when cache
// drift makes the incremental algebra unreliable; callers that own the
// state should rebuild and retry.
std::vector<double> conditional_logits(const ClusterState& state,
                                       const Dataset& data,
                                       const Hyperparams& hp, int i);
void conditional_logits(const ClusterState& state, const Dataset& data,
                        const Hyperparams& hp, int i, SamplerScratch& scratch,
                        std::vector<double>& out);

// Moves sample i to cluster target, updating every cache incrementally
// (exit and join are one Sherman-Morrison step each; bystander clusters are
// untouched). In DP mode target == num_clusters() opens a new cluster, and
// a cluster left empty is removed at once, labels above it shifting down by
// one. Numeric trouble degrades to a full rebuild instead of failing.
void apply_move(ClusterState& state, const Dataset& data,
                const Hyperparams& hp, int i, int target);

// One full Gibbs sweep in sample order. Draws exactly one categorical
// variate per sample, so the consumed stream length does not depend on
// which moves happen.
void gibbs_sweep(ClusterState& state, const Dataset& data,
                 const Hyperparams& hp, Rng& rng, SamplerScratch& scratch);

// Runs a chain from the given initial assignment and retains the final
// cfg.retain indicator vectors.
ChainSamples run_chain(const Dataset& data, const Hyperparams& hp,
                       const ChainConfig& cfg, const std::vector<int>& init_z);

// Greedy coordinate ascent on the collapsed posterior (finite mode only):
// each sample moves to its best cluster, ties broken toward the smallest
// index, until a full sweep changes nothing. Throws NonConvergence after
// max_sweeps.
std::vector<int> map_ascent(const Dataset& data, const Hyperparams& hp,
                            const std::vector<int>& init_z,
                            int max_sweeps = 1000);

}  // namespace gcr
