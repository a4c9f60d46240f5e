#pragma once

#include "parvi/core.hpp"
#include "parvi/kernels.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace parvi {

struct ReferenceProvenance {
  std::string target_id;
  std::string protocol_hash;
  std::uint64_t seed = 0;
};

/// Ground-truth samples from the target, never anonymous.
class ReferenceSamples {
 public:
  ReferenceSamples(RowMatrix samples, ReferenceProvenance provenance);

  const RowMatrix& samples() const { return samples_; }
  const ReferenceProvenance& provenance() const { return provenance_; }
  std::size_t size() const { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(samples_.cols()); }
  ParticleView view() const { return {samples_.data(), size(), dim()}; }

 private:
  RowMatrix samples_;
  ReferenceProvenance provenance_;
};

/// Biased (diagonal-inclusive) squared MMD between two sample sets.
double mmd2(ParticleView x, ParticleView y, const PolynomialKernel& k = {});
double mmd2(ParticleView x, const ReferenceSamples& y, const PolynomialKernel& k = {});

/// mmd2 against a fixed reference with the reference self-term computed once.
class MmdEvaluator {
 public:
  MmdEvaluator(const ReferenceSamples& reference, PolynomialKernel k = {});
  double operator()(ParticleView x) const;
  const ReferenceSamples& reference() const { return *reference_; }

 private:
  const ReferenceSamples* reference_;
  PolynomialKernel kernel_;
  double yy_term_;
};

/// Mean of k over all ordered pairs of x (diagonal included).
double kernel_mean_self(ParticleView x, const PolynomialKernel& k);
double kernel_mean_cross(ParticleView x, ParticleView y, const PolynomialKernel& k);

/// One row per outer iteration.
struct TraceRecord {
  std::size_t n = 0;
  double f = 0.0;  // F_h
  double g = 0.0;
  double h = 0.0;
  double r = std::numeric_limits<double>::quiet_NaN();                // EQ auxiliary variable
  double modified_energy = std::numeric_limits<double>::quiet_NaN();  // r^2 + H (ImEQ) or r^2 (AEGD)
  double r_drift = std::numeric_limits<double>::quiet_NaN();          // |r - q(z)|
  std::optional<double> mmd2;
  EvalCounts counts;
  double wall_ms = 0.0;  // cumulative time spent in sampler steps
};

struct RunTrace {
  std::string scheme;
  std::vector<TraceRecord> records;
  std::optional<std::size_t> steady_state;
  std::optional<ParticleSet> final_particles;
};

/// First n >= 1 with |F_h(n) - F_h(n-1)| < tol.
std::optional<std::size_t> steady_state(const std::vector<TraceRecord>& records, double tol);
std::optional<std::size_t> steady_state(const RunTrace& trace, double tol);

struct TraceSummary {
  std::size_t iterations = 0;
  double final_f = 0.0;
  std::optional<double> final_mmd2;
  std::optional<std::size_t> steady_state;
  std::uint64_t interaction_grad_evals = 0;
  std::uint64_t potential_grad_evals = 0;
  double wall_ms = 0.0;
  double max_r_drift = std::numeric_limits<double>::quiet_NaN();
};

/// Aggregate of the final record; `steady_tol` selects the steady-state threshold.
TraceSummary trace_summary(const RunTrace& trace, double steady_tol = 1e-5);

/// Reference matrix as CSV (header x0,x1,...) plus a JSON provenance sidecar at `path + ".json"`.
void save_reference(const ReferenceSamples& ref, const std::string& path, const std::string& protocol_json);
ReferenceSamples load_reference(const std::string& path);
/// Provenance of a stored reference without loading it; nullopt when missing or unreadable.
std::optional<ReferenceProvenance> peek_reference(const std::string& path);

}  // namespace parvi
