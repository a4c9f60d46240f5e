#include "parvi/dataset.hpp"
#include "parvi/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> cadence;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--cadence", o.cadence, "Override the MMD cadence (outer iterations between evaluations)");
}

// Returns nullopt after printing a diagnostic when the config cannot be used.
std::optional<parvi::ExperimentConfig> load(const std::string& path, const Overrides& o) {
  try {
    parvi::ExperimentConfig cfg = path.empty() ? parvi::ExperimentConfig{} : parvi::load_config(path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.cadence) {
      cfg.mmd_cadence = *o.cadence;
      cfg.blr_cadence = *o.cadence;
    }
    return cfg;
  } catch (const std::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-based variational inference samplers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "out";
  Overrides overrides;

  auto* sample = app.add_subcommand("sample", "Run one sampler and write trace.csv, particles_final.csv, summary.json");
  sample->add_option("--config", config_path, "Experiment config (flat JSON)")->required();
  sample->add_option("--out", out, "Output directory");
  add_overrides(sample, overrides);

  std::string ref_out;
  auto* reference = app.add_subcommand("reference", "Generate or reuse cached LMC reference samples");
  reference->add_option("--config", config_path, "Experiment config (flat JSON)")->required();
  reference->add_option("--out", ref_out, "Reference CSV path (default: the cache directory)");
  add_overrides(reference, overrides);

  auto* blr = app.add_subcommand("blr", "Bayesian logistic regression with repeated train/test splits");
  blr->add_option("--config", config_path, "Experiment config with target 'blr'")->required();
  blr->add_option("--out", out, "Output directory");
  add_overrides(blr, overrides);

  std::vector<std::string> compare_paths;
  auto* compare = app.add_subcommand("compare", "Run several configs and write compare_long.csv and compare_table.csv");
  compare->add_option("--config", compare_paths, "Experiment configs (repeatable)")->required();
  compare->add_option("--out", out, "Output directory");
  add_overrides(compare, overrides);

  std::size_t synth_n = 1000;
  std::size_t synth_p = 5;
  double synth_margin = 1.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "separable.csv";
  auto* synth = app.add_subcommand("synth", "Write a linearly separable synthetic classification dataset");
  synth->add_option("--n", synth_n, "Number of rows");
  synth->add_option("--p", synth_p, "Number of features");
  synth->add_option("--margin", synth_margin, "Minimum distance from the separating hyperplane");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out", synth_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*sample || *reference || *blr) {
    const auto cfg = load(config_path, overrides);
    if (!cfg) return 2;
    if (*sample) return parvi::cmd_sample(*cfg, out, std::cerr);
    if (*reference) return parvi::cmd_reference(*cfg, ref_out, std::cerr);
    return parvi::cmd_blr(*cfg, out, std::cerr);
  }
  if (*compare) {
    std::vector<parvi::ExperimentConfig> cfgs;
    for (const auto& p : compare_paths) {
      auto cfg = load(p, overrides);
      if (!cfg) return 2;
      cfgs.push_back(std::move(*cfg));
    }
    return parvi::cmd_compare(cfgs, out, std::cerr);
  }
  try {
    parvi::CounterRng rng(synth_seed);
    parvi::save_csv(parvi::make_separable(synth_n, synth_p, synth_margin, rng), synth_out);
    std::cerr << "wrote " << synth_out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
