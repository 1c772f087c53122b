#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "gcr/errors.hpp"
#include "gcr/io.hpp"
#include "gcr/pipeline.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(gcr::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw gcr::ConfigError(std::string("config parse: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcr: groupwise constrained reconstruction subspace "
               "clustering toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string experiment_name;
  std::uint64_t seed = 0;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "root seed, overrides the config");
    sub->add_option("--out", out_dir, "output directory, overrides the config");
    sub->add_option("--threads", threads, "worker threads, overrides the config");
  };

  CLI::App* gen =
      app.add_subcommand("gen", "write a synthetic union-of-lines dataset");
  CLI::App* fit =
      app.add_subcommand("fit", "cluster a dataset with a full pipeline run");
  CLI::App* oracle = app.add_subcommand(
      "oracle", "cross-check the fast sampler against independent references");
  CLI::App* bench = app.add_subcommand(
      "bench", "time cached versus from-scratch Gibbs sweeps");
  CLI::App* experiment = app.add_subcommand(
      "experiment", "run a predefined accuracy sweep and emit plot-ready CSV");
  experiment->add_option(
      "name", experiment_name,
      "fig3a (cluster-count sweep) or fig3b (corruption sweep)");
  for (CLI::App* sub : {gen, fit, oracle, bench, experiment}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    nlohmann::json cfg = load_config(config_path);
    if (sub->count("--seed") > 0) cfg["seed"] = seed;
    if (sub->count("--out") > 0) cfg["out"] = out_dir;
    if (sub->count("--threads") > 0) cfg["threads"] = threads;
    if (sub == experiment && !experiment_name.empty())
      cfg["name"] = experiment_name;

    if (sub == gen) return gcr::cmd_gen(cfg);
    if (sub == fit) return gcr::cmd_fit(cfg);
    if (sub == oracle) return gcr::cmd_oracle(cfg);
    if (sub == bench) return gcr::cmd_bench(cfg);
    return gcr::cmd_experiment(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
