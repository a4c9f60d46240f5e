#include "parvi/metrics.hpp"

#include "parvi/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

namespace parvi {

using nlohmann::json;

ReferenceSamples::ReferenceSamples(RowMatrix samples, ReferenceProvenance provenance)
    : samples_(std::move(samples)), provenance_(std::move(provenance)) {
  if (samples_.rows() == 0 || samples_.cols() == 0) throw ConfigError("reference samples: need M >= 1 samples");
  if (provenance_.target_id.empty() || provenance_.protocol_hash.empty()) {
    throw ConfigError("reference samples: provenance must name the target and protocol");
  }
}

double kernel_mean_self(ParticleView x, const PolynomialKernel& k) {
  const std::size_t n = x.size();
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    diag += k.eval_dot(xi.squaredNorm());
    for (std::size_t j = i + 1; j < n; ++j) off += k.eval_dot(xi.dot(x.row(j)));
  }
  const auto nn = static_cast<double>(n);
  return (diag + 2.0 * off) / (nn * nn);
}

double kernel_mean_cross(ParticleView x, ParticleView y, const PolynomialKernel& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < y.size(); ++j) s += k.eval_dot(xi.dot(y.row(j)));
  }
  return s / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

namespace {
void check_dims(ParticleView x, ParticleView y) {
  if (x.dim() != y.dim()) {
    throw ConfigError("mmd2: dimension mismatch " + std::to_string(x.dim()) + " vs " + std::to_string(y.dim()));
  }
  if (x.size() == 0 || y.size() == 0) throw ConfigError("mmd2: empty sample set");
}
}  // namespace

double mmd2(ParticleView x, ParticleView y, const PolynomialKernel& k) {
  check_dims(x, y);
  return kernel_mean_self(x, k) + kernel_mean_self(y, k) - 2.0 * kernel_mean_cross(x, y, k);
}

double mmd2(ParticleView x, const ReferenceSamples& y, const PolynomialKernel& k) { return mmd2(x, y.view(), k); }

MmdEvaluator::MmdEvaluator(const ReferenceSamples& reference, PolynomialKernel k)
    : reference_(&reference), kernel_(k), yy_term_(kernel_mean_self(reference.view(), k)) {}

double MmdEvaluator::operator()(ParticleView x) const {
  check_dims(x, reference_->view());
  return kernel_mean_self(x, kernel_) + yy_term_ - 2.0 * kernel_mean_cross(x, reference_->view(), kernel_);
}

std::optional<std::size_t> steady_state(const std::vector<TraceRecord>& records, double tol) {
  for (std::size_t n = 1; n < records.size(); ++n) {
    if (std::abs(records[n].f - records[n - 1].f) < tol) return n;
  }
  return std::nullopt;
}

std::optional<std::size_t> steady_state(const RunTrace& trace, double tol) { return steady_state(trace.records, tol); }

TraceSummary trace_summary(const RunTrace& trace, double steady_tol) {
  TraceSummary s;
  if (trace.records.empty()) return s;
  const TraceRecord& last = trace.records.back();
  s.iterations = last.n;
  s.final_f = last.f;
  for (auto it = trace.records.rbegin(); it != trace.records.rend(); ++it) {
    if (it->mmd2) {
      s.final_mmd2 = it->mmd2;
      break;
    }
  }
  s.steady_state = steady_state(trace, steady_tol);
  s.interaction_grad_evals = last.counts.interaction_grad_evals;
  s.potential_grad_evals = last.counts.potential_grad_evals;
  s.wall_ms = last.wall_ms;
  for (const auto& r : trace.records) {
    if (!std::isnan(r.r_drift) && (std::isnan(s.max_r_drift) || r.r_drift > s.max_r_drift)) s.max_r_drift = r.r_drift;
  }
  return s;
}

void save_reference(const ReferenceSamples& ref, const std::string& path, const std::string& protocol_json) {
  namespace fs = std::filesystem;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  std::string csv;
  for (std::size_t k = 0; k < ref.dim(); ++k) {
    if (k) csv += ',';
    csv += "x" + std::to_string(k);
  }
  csv += '\n';
  const RowMatrix& s = ref.samples();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
      if (k) csv += ',';
      csv += io::format_double(s(i, k));
    }
    csv += '\n';
  }
  json side;
  side["target"] = ref.provenance().target_id;
  side["protocol_hash"] = ref.provenance().protocol_hash;
  side["seed"] = ref.provenance().seed;
  side["n_samples"] = ref.size();
  side["dim"] = ref.dim();
  side["protocol"] = json::parse(protocol_json.empty() ? "{}" : protocol_json);
  io::write_text_atomic(path, csv);
  io::write_text_atomic(path + ".json", side.dump(2) + "\n");
}

std::optional<ReferenceProvenance> peek_reference(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path) || !fs::exists(path + ".json")) return std::nullopt;
  try {
    const json side = json::parse(io::read_text(path + ".json"));
    return ReferenceProvenance{side.at("target").get<std::string>(), side.at("protocol_hash").get<std::string>(),
                               side.at("seed").get<std::uint64_t>()};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ReferenceSamples load_reference(const std::string& path) {
  auto prov = peek_reference(path);
  if (!prov) throw ConfigError("reference " + path + " is missing or has no provenance sidecar");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read reference " + path);
  std::string line;
  std::getline(in, line);
  const std::size_t d = io::split(line, ',').size();
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto toks = io::split(line, ',');
    if (toks.size() != d) throw ConfigError("reference " + path + ": ragged row");
    for (const auto& t : toks) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc()) throw ConfigError("reference " + path + ": bad number '" + t + "'");
      vals.push_back(v);
    }
  }
  const auto m = static_cast<Eigen::Index>(vals.size() / d);
  RowMatrix s = Eigen::Map<const RowMatrix>(vals.data(), m, static_cast<Eigen::Index>(d));
  return ReferenceSamples(std::move(s), *prov);
}

}  // namespace parvi
