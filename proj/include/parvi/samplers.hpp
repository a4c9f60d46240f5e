#pragma once

#include "parvi/core.hpp"
#include "parvi/energy.hpp"
#include "parvi/metrics.hpp"
#include "parvi/optim.hpp"
#include "parvi/targets.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace parvi {

enum class Scheme { imeq, evi_im, aegd, blob, svgd, lmc };
enum class InnerSolver { bb, adagrad };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);
std::string to_string(InnerSolver s);
InnerSolver parse_inner_solver(const std::string& s);

/// Outer-loop configuration. `step` is tau for the implicit and EQ schemes and
/// the learning rate (or LMC step) otherwise. All particle schemes evolve the
/// dynamics dz/dt = -N grad F_h, so proximal terms carry the 1/N-weighted norm.
struct SamplerConfig {
  Scheme scheme = Scheme::imeq;
  double step = 0.01;
  std::size_t n_outer = 200;
  double shift_c = 5.0;
  InnerSolver inner_solver = InnerSolver::bb;
  InnerSolverConfig inner;
  bool closed_form_inner = true;  // ImEQ: exact solve when V is an isotropic quadratic
  double bandwidth_h = 0.1;
  double steady_state_tol = 1e-5;
  bool stop_at_steady_state = false;
  std::size_t minibatch_size = 0;  // 0 = full data
  double svgd_momentum = 0.9;
  bool svgd_adagrad = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SchemeState {
  ParticleSet particles;
  double r = std::numeric_limits<double>::quiet_NaN();
  FlatVector accumulator;  // AdaGrad (blob) or SVGD historical gradient
  std::size_t iteration = 0;
};

struct AegdUpdate {
  FlatVector z;
  double r = 0.0;
};

/// r' = r / (1 + 2 tau |grad q|^2), z' = z - 2 tau r' grad q.
AegdUpdate aegd_update(const FlatVector& z, double r, const FlatVector& grad_q, double tau);

/// Exact minimizer of the ImEQ proximal problem for V(x) = 0.5 s |x - c|^2 + const, via Sherman-Morrison.
/// `grad_q` is grad q at z (1/N included) and `tau` the outer step.
FlatVector imeq_closed_form(const FlatVector& z, double r, const FlatVector& grad_q, double tau,
                            const IsotropicQuadratic& quad, std::size_t n_particles);

/// SVGD transport direction phi_i = (1/N) sum_j [k(x_j,x_i) (-grad V(x_j)) + grad_{x_j} k(x_j,x_i)]
/// with RBF kernel exp(-|x-y|^2 / bw) and median-heuristic bw.
FlatVector svgd_direction(ParticleView p, const TargetDensity& target, std::optional<Batch> batch = std::nullopt);
double median_heuristic_bandwidth(ParticleView p);

/// Minibatch indices for outer iteration `iteration`, inner call `call`; nullopt for full data.
std::optional<std::vector<std::size_t>> draw_minibatch(const TargetDensity& target, const SamplerConfig& cfg,
                                                       std::size_t iteration, std::size_t call);

SchemeState init_state(const SamplerConfig& cfg, const EnergyDecomposition& energy, ParticleSet particles);

SchemeState step_imeq(const SchemeState& state, const QuadratizedEnergy& qe, const SamplerConfig& cfg);
SchemeState step_evi_im(const SchemeState& state, const EnergyDecomposition& energy, const SamplerConfig& cfg);
SchemeState step_aegd(const SchemeState& state, const QuadratizedEnergy& qe_full, const SamplerConfig& cfg);
SchemeState step_blob(const SchemeState& state, const EnergyDecomposition& energy, const SamplerConfig& cfg);
SchemeState step_svgd(const SchemeState& state, const TargetDensity& target, const SamplerConfig& cfg);
/// x <- x - eps grad V(x) + sqrt(2 eps) xi; noise for particle i comes from rng.fork(iteration).fork(i).
SchemeState step_lmc(const SchemeState& state, const TargetDensity& target, const SamplerConfig& cfg,
                     const CounterRng& rng);

struct RunOptions {
  const MmdEvaluator* mmd = nullptr;
  std::size_t mmd_cadence = 10;  // 0: final record only
  /// Called after every record is appended (including the initial one).
  std::function<void(const SchemeState&, const TraceRecord&)> observer;
};

/// Runs n_outer steps (or until steady state when enabled) and records the trace.
RunTrace run(const SamplerConfig& cfg, TargetPtr target, const ParticleSet& init, const RunOptions& opts = {});

/// Langevin reference protocol: independent chains from N(0, init_scale I),
/// burn_in steps, then samples_per_chain draws every `thin` steps.
struct LmcProtocol {
  double step = 1e-3;
  std::size_t burn_in = 100000;
  std::size_t n_chains = 5000;
  std::size_t samples_per_chain = 1;
  std::size_t thin = 1;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  std::string canonical_json() const;
  std::string hash() const;
};

RowMatrix lmc_sample(const TargetDensity& target, const LmcProtocol& protocol);
ReferenceSamples generate_reference(const TargetDensity& target, const std::string& target_id,
                                    const LmcProtocol& protocol);

}  // namespace parvi
