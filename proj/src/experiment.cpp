#include "parvi/experiment.hpp"

#include "parvi/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace parvi {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kSplitStream = 0x5B17;
constexpr std::uint64_t kRepeatStream = 0x4E9E;

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

using Setter = std::function<void(ExperimentConfig&, const json&, const std::string&)>;

#define PARVI_STR(field) [](ExperimentConfig& c, const json& v, const std::string& k) { c.field = get_as<std::string>(v, k); }
#define PARVI_NUM(field) [](ExperimentConfig& c, const json& v, const std::string& k) { c.field = get_as<double>(v, k); }
#define PARVI_CNT(field) [](ExperimentConfig& c, const json& v, const std::string& k) { c.field = get_count(v, k); }
#define PARVI_BOOL(field) [](ExperimentConfig& c, const json& v, const std::string& k) { c.field = get_as<bool>(v, k); }
#define PARVI_U64(field) [](ExperimentConfig& c, const json& v, const std::string& k) { c.field = get_as<std::uint64_t>(v, k); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"label", PARVI_STR(label)},
      {"target", PARVI_STR(target)},
      {"dim", PARVI_CNT(dim)},
      {"dataset", PARVI_STR(dataset)},
      {"label_column", PARVI_STR(label_column)},
      {"prior_alpha", PARVI_NUM(prior_alpha)},
      {"scheme", [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.sampler.scheme = parse_scheme(get_as<std::string>(v, k));
       }},
      {"step", PARVI_NUM(sampler.step)},
      {"n_outer", PARVI_CNT(sampler.n_outer)},
      {"shift_c", PARVI_NUM(sampler.shift_c)},
      {"inner_solver", [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.sampler.inner_solver = parse_inner_solver(get_as<std::string>(v, k));
       }},
      {"inner_max_iters", [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.sampler.inner.max_iters = static_cast<int>(get_count(v, k));
       }},
      {"inner_grad_tol", PARVI_NUM(sampler.inner.grad_tol)},
      {"inner_lr", PARVI_NUM(sampler.inner.lr)},
      {"bb_min", PARVI_NUM(sampler.inner.bb_min)},
      {"bb_max", PARVI_NUM(sampler.inner.bb_max)},
      {"bb_fallback_step", [](ExperimentConfig& c, const json& v, const std::string& k) {
         if (v.is_null()) c.sampler.inner.bb_fallback_step.reset();
         else c.sampler.inner.bb_fallback_step = get_as<double>(v, k);
       }},
      {"adagrad_eps", PARVI_NUM(sampler.inner.adagrad_eps)},
      {"closed_form_inner", PARVI_BOOL(sampler.closed_form_inner)},
      {"bandwidth_h", PARVI_NUM(sampler.bandwidth_h)},
      {"steady_state_tol", PARVI_NUM(sampler.steady_state_tol)},
      {"stop_at_steady_state", PARVI_BOOL(sampler.stop_at_steady_state)},
      {"minibatch_size", PARVI_CNT(sampler.minibatch_size)},
      {"svgd_momentum", PARVI_NUM(sampler.svgd_momentum)},
      {"svgd_adagrad", PARVI_BOOL(sampler.svgd_adagrad)},
      {"n_particles", PARVI_CNT(n_particles)},
      {"init_mean", [](ExperimentConfig& c, const json& v, const std::string& k) {
         c.init_mean = get_as<std::vector<double>>(v, k);
       }},
      {"init_cov_scale", PARVI_NUM(init_cov_scale)},
      {"mmd", PARVI_BOOL(mmd)},
      {"mmd_cadence", PARVI_CNT(mmd_cadence)},
      {"reference_path", PARVI_STR(reference_path)},
      {"lmc_step", PARVI_NUM(reference.step)},
      {"lmc_burn_in", PARVI_CNT(reference.burn_in)},
      {"lmc_chains", PARVI_CNT(reference.n_chains)},
      {"lmc_samples_per_chain", PARVI_CNT(reference.samples_per_chain)},
      {"lmc_thin", PARVI_CNT(reference.thin)},
      {"lmc_init_scale", PARVI_NUM(reference.init_scale)},
      {"lmc_seed", PARVI_U64(reference.seed)},
      {"train_fraction", PARVI_NUM(train_fraction)},
      {"repeats", PARVI_CNT(repeats)},
      {"standardize", PARVI_BOOL(standardize)},
      {"blr_cadence", PARVI_CNT(blr_cadence)},
      {"seed", PARVI_U64(seed)},
  };
  return table;
}

#undef PARVI_STR
#undef PARVI_NUM
#undef PARVI_CNT
#undef PARVI_BOOL
#undef PARVI_U64

json to_json(const ExperimentConfig& c) {
  json j;
  j["label"] = c.label;
  j["target"] = c.target;
  j["dim"] = c.dim;
  j["dataset"] = c.dataset;
  j["label_column"] = c.label_column;
  j["prior_alpha"] = c.prior_alpha;
  j["scheme"] = to_string(c.sampler.scheme);
  j["step"] = c.sampler.step;
  j["n_outer"] = c.sampler.n_outer;
  j["shift_c"] = c.sampler.shift_c;
  j["inner_solver"] = to_string(c.sampler.inner_solver);
  j["inner_max_iters"] = c.sampler.inner.max_iters;
  j["inner_grad_tol"] = c.sampler.inner.grad_tol;
  j["inner_lr"] = c.sampler.inner.lr;
  j["bb_min"] = c.sampler.inner.bb_min;
  j["bb_max"] = c.sampler.inner.bb_max;
  j["bb_fallback_step"] = c.sampler.inner.bb_fallback_step ? json(*c.sampler.inner.bb_fallback_step) : json(nullptr);
  j["adagrad_eps"] = c.sampler.inner.adagrad_eps;
  j["closed_form_inner"] = c.sampler.closed_form_inner;
  j["bandwidth_h"] = c.sampler.bandwidth_h;
  j["steady_state_tol"] = c.sampler.steady_state_tol;
  j["stop_at_steady_state"] = c.sampler.stop_at_steady_state;
  j["minibatch_size"] = c.sampler.minibatch_size;
  j["svgd_momentum"] = c.sampler.svgd_momentum;
  j["svgd_adagrad"] = c.sampler.svgd_adagrad;
  j["n_particles"] = c.n_particles;
  j["init_mean"] = c.init_mean;
  j["init_cov_scale"] = c.init_cov_scale;
  j["mmd"] = c.mmd;
  j["mmd_cadence"] = c.mmd_cadence;
  j["reference_path"] = c.reference_path;
  j["lmc_step"] = c.reference.step;
  j["lmc_burn_in"] = c.reference.burn_in;
  j["lmc_chains"] = c.reference.n_chains;
  j["lmc_samples_per_chain"] = c.reference.samples_per_chain;
  j["lmc_thin"] = c.reference.thin;
  j["lmc_init_scale"] = c.reference.init_scale;
  j["lmc_seed"] = c.reference.seed;
  j["train_fraction"] = c.train_fraction;
  j["repeats"] = c.repeats;
  j["standardize"] = c.standardize;
  j["blr_cadence"] = c.blr_cadence;
  j["seed"] = c.seed;
  return j;
}

// Maps library exceptions onto exit codes.
int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    log << "error: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
}

void ensure_writable_file(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  const std::string probe = path + ".probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("cannot write to " + path);
  }
  std::error_code ec;
  fs::remove(probe, ec);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string default_label(const ExperimentConfig& cfg) {
  return cfg.label.empty() ? to_string(cfg.sampler.scheme) + "_N" + std::to_string(cfg.n_particles) : cfg.label;
}

json opt_json(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(nullptr); }
json opt_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_manifest(const ExperimentConfig& cfg, const std::string& out_dir, const std::vector<std::string>& files) {
  json m;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["files"] = files;
  io::write_text_atomic(join(out_dir, "manifest.json"), m.dump(2) + "\n");
}

struct SampleOutcome {
  int code = 0;
  std::vector<TraceRecord> records;
  std::optional<std::size_t> steady;
  std::string error;
};

SampleOutcome run_sample(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  SampleOutcome outcome;
  std::vector<TraceRecord> records;
  std::optional<ReferenceProvenance> provenance;
  // Keep the partial trace so an aborted run still leaves its history on disk.
  auto write_outputs = [&](const std::optional<ParticleSet>& final_particles, const std::string& error) {
    ensure_dir(out_dir);
    std::vector<std::string> files = {"config.json", "trace.csv", "summary.json"};
    io::write_text_atomic(join(out_dir, "config.json"), serialize_config(cfg));
    io::write_text_atomic(join(out_dir, "trace.csv"), trace_csv(records));
    if (final_particles) {
      io::write_text_atomic(join(out_dir, "particles_final.csv"), particles_csv(*final_particles));
      files.push_back("particles_final.csv");
    }
    RunTrace t;
    t.scheme = to_string(cfg.sampler.scheme);
    t.records = records;
    const TraceSummary s = trace_summary(t, cfg.sampler.steady_state_tol);
    json j;
    j["label"] = default_label(cfg);
    j["scheme"] = t.scheme;
    j["target"] = target_id(cfg);
    j["n_particles"] = cfg.n_particles;
    j["iterations"] = s.iterations;
    j["final_F_h"] = records.empty() ? json(nullptr) : finite_or_null(s.final_f);
    j["mmd2"] = opt_json(s.final_mmd2);
    j["steady_state"] = opt_json(s.steady_state);
    j["interaction_grad_evals"] = s.interaction_grad_evals;
    j["potential_grad_evals"] = s.potential_grad_evals;
    j["wall_ms"] = s.wall_ms;
    j["max_r_drift"] = finite_or_null(s.max_r_drift);
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    if (provenance) {
      j["reference"] = {{"target", provenance->target_id},
                        {"protocol_hash", provenance->protocol_hash},
                        {"seed", provenance->seed}};
    }
    j["status"] = error.empty() ? "ok" : "aborted";
    if (!error.empty()) j["error"] = error;
    io::write_text_atomic(join(out_dir, "summary.json"), j.dump(2) + "\n");
    write_manifest(cfg, out_dir, files);
  };

  outcome.code = guarded(log, [&] {
    cfg.validate();
    ensure_dir(out_dir);
    const TargetPtr target = make_target(cfg);
    const ParticleSet init = initial_particles(cfg, target->dim());
    std::optional<ResolvedReference> ref;
    std::optional<MmdEvaluator> mmd;
    if (cfg.mmd) {
      const std::string path = cfg.reference_path.empty() ? reference_cache_path(cfg, cache_dir()) : cfg.reference_path;
      ref.emplace(resolve_reference(cfg, *target, path));
      provenance = ref->samples.provenance();
      log << (ref->cache_hit ? "reference: cache hit " : "reference: generated ") << ref->path << "\n";
      mmd.emplace(ref->samples);
    }
    RunOptions opts;
    opts.mmd = mmd ? &*mmd : nullptr;
    opts.mmd_cadence = cfg.mmd_cadence;
    opts.observer = [&](const SchemeState&, const TraceRecord& rec) { records.push_back(rec); };
    try {
      const RunTrace trace = run(cfg.sampler, target, init, opts);
      outcome.steady = trace.steady_state;
      write_outputs(trace.final_particles, "");
      log << default_label(cfg) << ": " << trace.records.size() - 1 << " iterations, F_h = "
          << io::format_double(trace.records.back().f) << "\n";
    } catch (const NumericalError& e) {
      outcome.error = e.what();
      write_outputs(std::nullopt, e.what());
      throw;
    }
    return 0;
  });
  if (outcome.code != 0 && outcome.error.empty()) outcome.error = "run failed";
  outcome.records = std::move(records);
  return outcome;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("target 'blr' needs a dataset path");
  if (!fs::exists(cfg.dataset)) throw ConfigError("cannot read dataset " + cfg.dataset);
  if (has_suffix(cfg.dataset, ".libsvm") || has_suffix(cfg.dataset, ".svm")) return load_libsvm(cfg.dataset);
  return load_csv(cfg.dataset, cfg.label_column);
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  static const char* known[] = {"double_banana", "star", "eight", "gaussian", "blr"};
  if (std::find(std::begin(known), std::end(known), target) == std::end(known)) {
    throw ConfigError("unknown target '" + target + "'");
  }
  if (target == "gaussian" && dim == 0) throw ConfigError("gaussian target needs dim >= 1");
  if (target == "blr" && dataset.empty()) throw ConfigError("target 'blr' needs a dataset path");
  if (!(prior_alpha > 0.0)) throw ConfigError("prior_alpha must be positive");
  if (n_particles == 0) throw ConfigError("n_particles must be >= 1");
  if (!(init_cov_scale > 0.0)) throw ConfigError("init_cov_scale must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (repeats == 0) throw ConfigError("repeats must be >= 1");
  sampler.validate();
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const { return to_json(*this) == to_json(other); }

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, value, key);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(io::read_text(path)); }

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) { return io::fnv1a_hex(to_json(cfg).dump()); }

TargetPtr make_target(const ExperimentConfig& cfg) {
  if (cfg.target == "double_banana") return std::make_shared<DoubleBanana>();
  if (cfg.target == "star") return star_mixture();
  if (cfg.target == "eight") return eight_mixture();
  if (cfg.target == "gaussian") return IsotropicGaussian::standard(cfg.dim);
  if (cfg.target == "blr") {
    Dataset data = load_dataset(cfg);
    if (cfg.standardize) Standardizer::fit(data.features).apply(data.features);
    append_bias_column(data);
    return std::make_shared<LogisticRegressionTarget>(data.features, data.labels, cfg.prior_alpha);
  }
  throw ConfigError("unknown target '" + cfg.target + "'");
}

std::string target_id(const ExperimentConfig& cfg) {
  if (cfg.target == "gaussian") return "gaussian_d" + std::to_string(cfg.dim);
  if (cfg.target == "blr") return "blr_" + io::fnv1a_hex(cfg.dataset);
  return cfg.target;
}

ParticleSet initial_particles(const ExperimentConfig& cfg, std::size_t dim) {
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(dim));
  if (!cfg.init_mean.empty()) {
    if (cfg.init_mean.size() != dim) {
      throw ConfigError("init_mean has " + std::to_string(cfg.init_mean.size()) + " entries, target dimension is " +
                        std::to_string(dim));
    }
    mean = Eigen::Map<const Vector>(cfg.init_mean.data(), static_cast<Eigen::Index>(dim));
  }
  CounterRng rng(cfg.seed, kInitStream);
  return gaussian_init(cfg.n_particles, dim, mean, cfg.init_cov_scale, rng);
}

std::string cache_dir() {
  const char* env = std::getenv("PARVI_CACHE_DIR");
  return env && *env ? std::string(env) : std::string("parvi_cache");
}

std::string reference_cache_path(const ExperimentConfig& cfg, const std::string& dir) {
  return join(dir, target_id(cfg) + "_" + cfg.reference.hash() + ".csv");
}

ResolvedReference resolve_reference(const ExperimentConfig& cfg, const TargetDensity& target,
                                    const std::string& path) {
  const std::string id = target_id(cfg);
  const std::string hash = cfg.reference.hash();
  if (const auto prov = peek_reference(path); prov && prov->target_id == id && prov->protocol_hash == hash) {
    return {load_reference(path), path, true};
  }
  ensure_writable_file(path);
  ReferenceSamples samples = generate_reference(target, id, cfg.reference);
  save_reference(samples, path, cfg.reference.canonical_json());
  return {std::move(samples), path, false};
}

std::string trace_csv(const std::vector<TraceRecord>& records) {
  std::string out = "n,F_h,G,H,r,r2_plus_H,mmd2,cum_interaction_evals,wall_ms\n";
  for (const auto& r : records) {
    out += std::to_string(r.n);
    for (double v : {r.f, r.g, r.h, r.r, r.modified_energy}) {
      out += ',';
      out += io::format_double(v);
    }
    out += ',';
    if (r.mmd2) out += io::format_double(*r.mmd2);
    out += ',' + std::to_string(r.counts.interaction_grad_evals);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

std::string particles_csv(const ParticleSet& p) {
  std::string out;
  for (std::size_t k = 0; k < p.dim(); ++k) out += (k ? ",x" : "x") + std::to_string(k);
  out += '\n';
  const RowMatrix& x = p.positions();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (k) out += ',';
      out += io::format_double(x(i, k));
    }
    out += '\n';
  }
  return out;
}

BlrScores blr_scores(ParticleView particles, const Dataset& train, const Dataset& test) {
  if (particles.dim() != train.n_features() || particles.dim() != test.n_features()) {
    throw ConfigError("blr_scores: particle dimension does not match the feature count");
  }
  const auto n = static_cast<double>(particles.size());
  auto prob_pos = [&](const RowMatrix& c, Eigen::Index t) {
    double p = 0.0;
    for (std::size_t i = 0; i < particles.size(); ++i) p += sigmoid(c.row(t).dot(particles.row(i)));
    return p / n;
  };
  BlrScores s;
  std::size_t correct = 0;
  for (Eigen::Index t = 0; t < test.features.rows(); ++t) {
    const double label = prob_pos(test.features, t) >= 0.5 ? 1.0 : -1.0;
    if (label == test.labels(t)) ++correct;
  }
  s.test_accuracy = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;
  double ll = 0.0;
  for (Eigen::Index t = 0; t < train.features.rows(); ++t) {
    const double p = prob_pos(train.features, t);
    const double py = train.labels(t) > 0 ? p : 1.0 - p;
    ll += std::log(std::max(py, 1e-300));
  }
  s.train_loglik = train.size() ? ll / static_cast<double>(train.size()) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------

int cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  return run_sample(cfg, out_dir, log).code;
}

int cmd_reference(const ExperimentConfig& cfg, const std::string& out_path, std::ostream& log) {
  return guarded(log, [&] {
    if (cfg.target != "blr") cfg.validate();
    if (cfg.reference.n_chains * cfg.reference.samples_per_chain == 0) {
      throw ConfigError("reference needs M >= 1 samples (lmc_chains * lmc_samples_per_chain)");
    }
    const std::string path = out_path.empty() ? reference_cache_path(cfg, cache_dir()) : out_path;
    const TargetPtr target = make_target(cfg);
    const ResolvedReference ref = resolve_reference(cfg, *target, path);
    const RowMatrix& s = ref.samples.samples();
    const Vector mean = s.colwise().mean().transpose();
    log << (ref.cache_hit ? "cache hit: " : "generated: ") << ref.path << " (M = " << ref.samples.size()
        << ", protocol " << ref.samples.provenance().protocol_hash << ")\n";
    log << "sample mean:";
    for (Eigen::Index k = 0; k < mean.size(); ++k) log << ' ' << io::format_double(mean(k));
    log << "\n";
    return 0;
  });
}

int cmd_blr(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    if (cfg.target != "blr") throw ConfigError("blr needs target 'blr'");
    cfg.validate();
    ensure_dir(out_dir);
    const Dataset data = load_dataset(cfg);
    const bool degenerate = labels_degenerate(data.labels);
    if (degenerate) log << "warning: every label in " << cfg.dataset << " is identical; accuracy is trivial\n";

    std::string repeats_csv = "repeat,test_accuracy,train_loglik,majority_accuracy,final_F_h,interaction_evals,wall_ms\n";
    std::string trace = "repeat,n,test_accuracy,train_loglik,F_h,cum_interaction_evals,wall_ms\n";
    std::vector<double> acc, ll, majority;
    const CounterRng split_base(cfg.seed, kSplitStream);
    const CounterRng repeat_base(cfg.seed, kRepeatStream);

    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
      CounterRng split_rng = split_base.fork(rep);
      TrainTestSplit split = train_test_split(data, cfg.train_fraction, split_rng);
      if (cfg.standardize) {
        const Standardizer st = Standardizer::fit(split.train.features);
        st.apply(split.train.features);
        st.apply(split.test.features);
      }
      append_bias_column(split.train);
      append_bias_column(split.test);

      const double train_pos = (split.train.labels.array() > 0).cast<double>().mean();
      const double majority_label = train_pos >= 0.5 ? 1.0 : -1.0;
      const double maj_acc = (split.test.labels.array() == majority_label).cast<double>().mean();

      auto target = std::make_shared<LogisticRegressionTarget>(split.train.features, split.train.labels,
                                                               cfg.prior_alpha);
      CounterRng rep_rng = repeat_base.fork(rep);
      SamplerConfig sc = cfg.sampler;
      sc.seed = rep_rng.next_u64();
      Vector mean = Vector::Zero(static_cast<Eigen::Index>(target->dim()));
      CounterRng init_rng = rep_rng.fork(1);
      const ParticleSet init = gaussian_init(cfg.n_particles, target->dim(), mean, cfg.init_cov_scale, init_rng);

      RunOptions opts;
      opts.observer = [&](const SchemeState& st, const TraceRecord& rec) {
        if (cfg.blr_cadence == 0 || rec.n % cfg.blr_cadence != 0) return;
        const BlrScores sc_now = blr_scores(st.particles, split.train, split.test);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%llu,%.3f\n", rep, rec.n, sc_now.test_accuracy,
                      sc_now.train_loglik, rec.f, static_cast<unsigned long long>(rec.counts.interaction_grad_evals),
                      rec.wall_ms);
        trace += buf;
      };
      const RunTrace rt = run(sc, target, init, opts);
      const BlrScores s = blr_scores(*rt.final_particles, split.train, split.test);
      acc.push_back(s.test_accuracy);
      ll.push_back(s.train_loglik);
      majority.push_back(maj_acc);
      const TraceRecord& last = rt.records.back();
      char buf[256];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%llu,%.3f\n", rep, s.test_accuracy, s.train_loglik,
                    maj_acc, last.f, static_cast<unsigned long long>(last.counts.interaction_grad_evals),
                    last.wall_ms);
      repeats_csv += buf;
      log << "repeat " << rep << ": test accuracy " << io::format_double(s.test_accuracy) << ", train loglik "
          << io::format_double(s.train_loglik) << "\n";
    }

    json summary;
    summary["scheme"] = to_string(cfg.sampler.scheme);
    summary["dataset"] = cfg.dataset;
    summary["repeats"] = cfg.repeats;
    summary["n_particles"] = cfg.n_particles;
    summary["n_outer"] = cfg.sampler.n_outer;
    summary["test_accuracy"] = {{"mean", mean_of(acc)}, {"stderr", stderr_of(acc)}};
    summary["train_loglik"] = {{"mean", mean_of(ll)}, {"stderr", stderr_of(ll)}};
    summary["majority_accuracy"] = {{"mean", mean_of(majority)}, {"stderr", stderr_of(majority)}};
    summary["degenerate_labels"] = degenerate;
    summary["config_hash"] = config_hash(cfg);
    summary["seed"] = cfg.seed;
    io::write_text_atomic(join(out_dir, "config.json"), serialize_config(cfg));
    io::write_text_atomic(join(out_dir, "blr_repeats.csv"), repeats_csv);
    io::write_text_atomic(join(out_dir, "blr_trace.csv"), trace);
    io::write_text_atomic(join(out_dir, "blr_summary.json"), summary.dump(2) + "\n");
    write_manifest(cfg, out_dir, {"config.json", "blr_repeats.csv", "blr_trace.csv", "blr_summary.json"});
    log << "mean test accuracy " << io::format_double(mean_of(acc)) << " +- " << io::format_double(stderr_of(acc))
        << " over " << cfg.repeats << " repeats\n";
    return 0;
  });
}

int cmd_compare(const std::vector<ExperimentConfig>& cfgs, const std::string& out_dir, std::ostream& log) {
  if (cfgs.empty()) {
    log << "error: compare needs at least one config\n";
    return 2;
  }
  try {
    ensure_dir(out_dir);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  std::string long_csv = "method,iteration,wall_ms,F_h,mmd2,interaction_evals\n";
  std::string table = "method,n_particles,iterations,wall_ms,mmd2,F_h,interaction_evals,steady_state,status\n";
  std::ostringstream pretty;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-20s %6s %6s %12s %12s %12s %10s\n", "method", "N", "iters", "time_ms", "mmd2",
                "F_h", "int_evals");
  pretty << buf;
  bool failed = false;
  json manifest_files = json::array();

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const ExperimentConfig& cfg = cfgs[i];
    const std::string label = default_label(cfg);
    const SampleOutcome out = run_sample(cfg, join(out_dir, label), log);
    if (out.code != 0) {
      failed = true;
      log << "compare: run '" << label << "' failed: " << out.error << "\n";
    }
    for (const auto& r : out.records) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%.3f,%s,%s,%llu\n", label.c_str(), r.n, r.wall_ms,
                    io::format_double(r.f).c_str(), r.mmd2 ? io::format_double(*r.mmd2).c_str() : "",
                    static_cast<unsigned long long>(r.counts.interaction_grad_evals));
      long_csv += buf;
    }
    const TraceRecord last = out.records.empty() ? TraceRecord{} : out.records.back();
    std::optional<double> final_mmd;
    for (auto it = out.records.rbegin(); it != out.records.rend(); ++it) {
      if (it->mmd2) {
        final_mmd = it->mmd2;
        break;
      }
    }
    const std::string mmd_s = final_mmd ? io::format_double(*final_mmd) : "";
    const std::string steady_s = out.steady ? std::to_string(*out.steady) : "";
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.3f,%s,%s,%llu,%s,%s\n", label.c_str(), cfg.n_particles, last.n,
                  last.wall_ms, mmd_s.c_str(), io::format_double(last.f).c_str(),
                  static_cast<unsigned long long>(last.counts.interaction_grad_evals), steady_s.c_str(),
                  out.code == 0 ? "ok" : "failed");
    table += buf;
    std::snprintf(buf, sizeof buf, "%-20s %6zu %6zu %12.1f %12.5g %12.5g %10llu%s\n", label.c_str(), cfg.n_particles,
                  last.n, last.wall_ms, final_mmd.value_or(std::nan("")), last.f,
                  static_cast<unsigned long long>(last.counts.interaction_grad_evals),
                  out.code == 0 ? "" : "  (failed)");
    pretty << buf;
    manifest_files.push_back({{"label", label}, {"config_hash", config_hash(cfg)}, {"seed", cfg.seed}});
  }

  try {
    io::write_text_atomic(join(out_dir, "compare_long.csv"), long_csv);
    io::write_text_atomic(join(out_dir, "compare_table.csv"), table);
    json m;
    m["runs"] = manifest_files;
    m["files"] = {"compare_long.csv", "compare_table.csv"};
    io::write_text_atomic(join(out_dir, "manifest.json"), m.dump(2) + "\n");
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  log << pretty.str();
  return failed ? 3 : 0;
}

}  // namespace parvi
