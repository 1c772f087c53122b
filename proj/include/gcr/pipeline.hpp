#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcr/model.hpp"
#include "gcr/synthdata.hpp"

namespace gcr {

inline constexpr const char* kVersion = "0.1.0";

// Final clustering route. Map and Bayes run the finite model; DpBayes runs
// the Dirichlet-process model. Bayes and DpBayes round the averaged
// co-assignment graph through a spectral cut.
enum class PipelineKind { kMap, kBayes, kDpBayes };

PipelineKind pipeline_from_name(const std::string& name);
std::string pipeline_name(PipelineKind p);

// Fully resolved description of one fit run. Parsed from a JSON config;
// every field has a default so a minimal config works.
struct RunConfig {
  PipelineKind pipeline = PipelineKind::kMap;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string data_csv;    // when nonempty, wins over the generator
  SynthSpec generator;
  int pca_dims = 0;        // 0 disables
  double pca_energy = 0.0; // 0 disables; mutually exclusive with pca_dims
  double beta0 = 1.0;
  double nu = 1.0;
  double lambda = 1.0;
  double alpha_h = 0.1;
  double alpha_l = 1e-5;
  int epochs = 500;
  int retain = 100;
  int k = 2;               // finite-model K and the NCut K
  double delta = 0.0;      // 0 picks the trace-relative default
  bool write_affinity = false;
  bool timings = false;    // opt-in wall-clock fields (breaks byte identity)
  int threads = 1;

  Hyperparams hyperparams() const;
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

struct FitOutcome {
  std::vector<int> labels;  // final clustering, 1-based
  double accuracy = -1.0;   // -1 when the data has no ground truth
  int found_clusters = 0;   // distinct labels in the chain's last sample
  Eigen::MatrixXd affinity; // mean co-assignment of the retained samples
};

// The full fit on an in-memory dataset: warm-start affinity, NCut
// initialization, Gibbs chain, then the pipeline's final rounding.
FitOutcome fit_dataset(const Dataset& data, const RunConfig& cfg);

// CLI entry points. Each takes the merged JSON config, writes its artifacts
// under the config's "out" directory, prints a one-line summary, and
// returns a process exit code.
int cmd_gen(const nlohmann::json& config);
int cmd_fit(const nlohmann::json& config);
int cmd_oracle(const nlohmann::json& config);
int cmd_bench(const nlohmann::json& config);
int cmd_experiment(const nlohmann::json& config);

}  // namespace gcr
