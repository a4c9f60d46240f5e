#pragma once

#include "parvi/dataset.hpp"
#include "parvi/metrics.hpp"
#include "parvi/samplers.hpp"
#include "parvi/targets.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace parvi {

/// Everything needed to reproduce one run. Serialized as a flat JSON object;
/// see README for the key list.
struct ExperimentConfig {
  std::string label;  // row name in comparisons; derived from scheme and N when empty

  // target
  std::string target = "double_banana";  // double_banana | star | eight | gaussian | blr
  std::size_t dim = 2;                   // gaussian only
  std::string dataset;                   // blr: CSV or libsvm path
  std::string label_column;              // blr CSV: name or index, default last column
  double prior_alpha = 1.0;

  SamplerConfig sampler;
  std::size_t n_particles = 500;

  // initial particles ~ N(init_mean, init_cov_scale I); empty mean means the origin
  std::vector<double> init_mean;
  double init_cov_scale = 1.0;

  // metrics
  bool mmd = true;
  std::size_t mmd_cadence = 10;
  std::string reference_path;  // explicit file; otherwise the cache directory is used
  LmcProtocol reference;

  // blr
  double train_fraction = 0.8;
  std::size_t repeats = 20;
  bool standardize = true;
  std::size_t blr_cadence = 10;

  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ExperimentConfig& other) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Round-trips through parse_config.
std::string serialize_config(const ExperimentConfig& cfg);
/// Stable hash of the serialized config.
std::string config_hash(const ExperimentConfig& cfg);

/// Toy targets by name; blr loads `cfg.dataset` in full.
TargetPtr make_target(const ExperimentConfig& cfg);
/// Identifier recorded in reference provenance, e.g. "double_banana" or "gaussian_d3".
std::string target_id(const ExperimentConfig& cfg);

ParticleSet initial_particles(const ExperimentConfig& cfg, std::size_t dim);

struct ResolvedReference {
  ReferenceSamples samples;
  std::string path;
  bool cache_hit = false;
};

/// Cache directory from PARVI_CACHE_DIR, defaulting to "parvi_cache".
std::string cache_dir();
std::string reference_cache_path(const ExperimentConfig& cfg, const std::string& dir);

/// Loads the stored reference when its provenance matches the protocol, otherwise
/// generates it with LMC and writes it to `path`.
ResolvedReference resolve_reference(const ExperimentConfig& cfg, const TargetDensity& target,
                                    const std::string& path);

// Subcommands. Diagnostics go to `log`; the return value is the process exit code
// (0 success, 2 configuration or I/O error, 3 numerical abort).
int cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_reference(const ExperimentConfig& cfg, const std::string& out_path, std::ostream& log);
int cmd_blr(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_compare(const std::vector<ExperimentConfig>& cfgs, const std::string& out_dir, std::ostream& log);

/// Writes trace.csv rows (also used by compare). Columns:
/// n,F_h,G,H,r,r2_plus_H,mmd2,cum_interaction_evals,wall_ms
std::string trace_csv(const std::vector<TraceRecord>& records);
std::string particles_csv(const ParticleSet& p);

struct BlrScores {
  double test_accuracy = 0.0;
  double train_loglik = 0.0;  // mean ln of the posterior-averaged probability of the observed label
};

/// Posterior-averaged prediction: p(y=+1|c) = mean_i sigmoid(w_i.c).
BlrScores blr_scores(ParticleView particles, const Dataset& train, const Dataset& test);

}  // namespace parvi
