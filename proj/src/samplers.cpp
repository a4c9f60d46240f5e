#include "parvi/samplers.hpp"

#include "parvi/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace parvi {

namespace {

// Fixed stream ids keep the random streams of different consumers disjoint.
constexpr std::uint64_t kBatchStream = 0xB47C;
constexpr std::uint64_t kLmcStream = 0x1A4C;
constexpr std::uint64_t kReferenceStream = 0x5EF5;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::optional<Batch> as_batch(const std::optional<std::vector<std::size_t>>& b) {
  if (!b) return std::nullopt;
  return Batch(*b);
}

// Counter-indexed minibatches for one outer step.
class BatchSource {
 public:
  BatchSource(const TargetDensity& target, const SamplerConfig& cfg, std::size_t iteration)
      : target_(target), cfg_(cfg), iteration_(iteration) {}

  std::optional<std::vector<std::size_t>> next() { return draw_minibatch(target_, cfg_, iteration_, call_++); }

 private:
  const TargetDensity& target_;
  const SamplerConfig& cfg_;
  std::size_t iteration_;
  std::size_t call_ = 0;
};

SolveResult solve_inner(const ObjectiveOracle& obj, const FlatVector& z0, const SamplerConfig& cfg) {
  return cfg.inner_solver == InnerSolver::bb ? bb_descent(obj, z0, cfg.inner) : adagrad_descent(obj, z0, cfg.inner);
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::imeq: return "imeq";
    case Scheme::evi_im: return "evi_im";
    case Scheme::aegd: return "aegd";
    case Scheme::blob: return "blob";
    case Scheme::svgd: return "svgd";
    case Scheme::lmc: return "lmc";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& s) {
  for (Scheme v : {Scheme::imeq, Scheme::evi_im, Scheme::aegd, Scheme::blob, Scheme::svgd, Scheme::lmc}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown scheme '" + s + "' (expected imeq, evi_im, aegd, blob, svgd or lmc)");
}

std::string to_string(InnerSolver s) { return s == InnerSolver::bb ? "bb" : "adagrad"; }

InnerSolver parse_inner_solver(const std::string& s) {
  if (s == "bb") return InnerSolver::bb;
  if (s == "adagrad") return InnerSolver::adagrad;
  throw ConfigError("unknown inner solver '" + s + "' (expected bb or adagrad)");
}

void SamplerConfig::validate() const {
  if (scheme == Scheme::lmc ? !(step >= 0.0) : !(step > 0.0)) {
    throw ConfigError("sampler: step size must be positive");
  }
  if (!(bandwidth_h > 0.0)) throw ConfigError("sampler: bandwidth h must be positive");
  if (!std::isfinite(shift_c)) throw ConfigError("sampler: shift C must be finite");
  if (!(steady_state_tol >= 0.0)) throw ConfigError("sampler: steady_state_tol must be non-negative");
  if (!(svgd_momentum >= 0.0 && svgd_momentum < 1.0)) throw ConfigError("sampler: svgd_momentum must lie in [0, 1)");
  inner.validate();
}

// ---------------------------------------------------------------------------

AegdUpdate aegd_update(const FlatVector& z, double r, const FlatVector& grad_q, double tau) {
  AegdUpdate out;
  out.r = r / (1.0 + 2.0 * tau * grad_q.squaredNorm());
  out.z = z - (2.0 * tau * out.r) * grad_q;
  return out;
}

FlatVector imeq_closed_form(const FlatVector& z, double r, const FlatVector& grad_q, double tau,
                            const IsotropicQuadratic& quad, std::size_t n_particles) {
  const auto n = static_cast<double>(n_particles);
  const auto d = static_cast<Eigen::Index>(quad.center.size());
  if (d == 0 || z.size() != d * static_cast<Eigen::Index>(n_particles)) {
    throw ConfigError("imeq_closed_form: quadratic center does not match the particle dimension");
  }
  // N * grad J(z + delta) = 0  <=>  (a I + b g g^T) delta = rhs
  const double a = 1.0 / tau + quad.precision;
  const double b = 2.0 * n;
  FlatVector rhs = -2.0 * n * r * grad_q;
  if (quad.precision != 0.0) {
    for (std::size_t i = 0; i < n_particles; ++i) {
      rhs.segment(static_cast<Eigen::Index>(i) * d, d) -=
          quad.precision * (z.segment(static_cast<Eigen::Index>(i) * d, d) - quad.center);
    }
  }
  const double g_rhs = grad_q.dot(rhs);
  const double denom = a + b * grad_q.squaredNorm();
  const FlatVector delta = (rhs - (b * g_rhs / denom) * grad_q) / a;
  return z + delta;
}

double median_heuristic_bandwidth(ParticleView p) {
  const std::size_t n = p.size();
  if (n < 2) return 1.0;
  std::vector<double> sq;
  sq.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sq.push_back((p.row(i) - p.row(j)).squaredNorm());
  }
  const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  const double med = *mid;
  if (!(med > 0.0)) return 1.0;
  return med / std::log(static_cast<double>(n) + 1.0);
}

FlatVector svgd_direction(ParticleView p, const TargetDensity& target, std::optional<Batch> batch) {
  const std::size_t n = p.size();
  const auto d = static_cast<Eigen::Index>(p.dim());
  const double bw = median_heuristic_bandwidth(p);
  RowMatrix score(static_cast<Eigen::Index>(n), d);
  Vector g(d);
  for (std::size_t j = 0; j < n; ++j) {
    if (batch) target.grad_potential(p.row(j), *batch, g);
    else target.grad_potential(p.row(j), g);
    score.row(static_cast<Eigen::Index>(j)) = -g.transpose();
  }
  FlatVector phi = FlatVector::Zero(static_cast<Eigen::Index>(n) * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto out = phi.segment(static_cast<Eigen::Index>(i) * d, d);
    const auto xi = p.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const Vector diff = xi - p.row(j);
      const double k = std::exp(-diff.squaredNorm() / bw);
      out += k * score.row(static_cast<Eigen::Index>(j)).transpose() + (2.0 * k / bw) * diff;
    }
  }
  phi /= static_cast<double>(n);
  return phi;
}

std::optional<std::vector<std::size_t>> draw_minibatch(const TargetDensity& target, const SamplerConfig& cfg,
                                                       std::size_t iteration, std::size_t call) {
  const std::size_t n_data = target.data_size();
  if (cfg.minibatch_size == 0 || !target.supports_minibatch() || cfg.minibatch_size >= n_data) return std::nullopt;
  CounterRng rng = CounterRng(cfg.seed, kBatchStream).fork(iteration).fork(call);
  // Partial Fisher-Yates: a uniform subset without replacement.
  std::vector<std::size_t> idx(n_data);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < cfg.minibatch_size; ++k) {
    std::swap(idx[k], idx[k + rng.uniform_index(n_data - k)]);
  }
  idx.resize(cfg.minibatch_size);
  return idx;
}

// ---------------------------------------------------------------------------

SchemeState init_state(const SamplerConfig& cfg, const EnergyDecomposition& energy, ParticleSet particles) {
  SchemeState s;
  s.particles = std::move(particles);
  if (cfg.scheme == Scheme::imeq) {
    s.r = QuadratizedEnergy(energy, cfg.shift_c, QuadratizedPart::interaction).q_eval(s.particles);
  } else if (cfg.scheme == Scheme::aegd) {
    s.r = QuadratizedEnergy(energy, cfg.shift_c, QuadratizedPart::full).q_eval(s.particles);
  }
  return s;
}

SchemeState step_imeq(const SchemeState& state, const QuadratizedEnergy& qe, const SamplerConfig& cfg) {
  const EnergyDecomposition& energy = qe.decomposition();
  const std::size_t d = state.particles.dim();
  const std::size_t n_particles = state.particles.size();
  const auto n = static_cast<double>(n_particles);
  const double tau = cfg.step;
  const double r = state.r;
  if (!std::isfinite(r)) throw NumericalError("imeq: auxiliary variable r is not finite");

  const FlatVector z = state.particles.flatten();
  const QuadratizedGrad qg = qe.q_grad(state.particles);
  const FlatVector& g = qg.grad;

  FlatVector z_next;
  const auto quad = energy.target().quadratic_form();
  const bool stochastic = cfg.minibatch_size > 0 && energy.target().supports_minibatch();
  if (cfg.closed_form_inner && quad && !stochastic) {
    z_next = imeq_closed_form(z, r, g, tau, *quad, n_particles);
  } else {
    // N * J(z') with J(z') = |z'-z|^2 / (2 N tau) + (g.(z'-z))^2 + H(z') + 2 r g.(z'-z)
    BatchSource batches(energy.target(), cfg, state.iteration);
    ObjectiveOracle obj;
    obj.value = [&](const FlatVector& zz) {
      const FlatVector delta = zz - z;
      const double gd = g.dot(delta);
      const auto b = batches.next();
      return delta.squaredNorm() / (2.0 * tau) + n * gd * gd + n * energy.energy_h(view_of(zz, d), as_batch(b)) +
             2.0 * n * r * gd;
    };
    obj.gradient = [&](const FlatVector& zz) {
      const FlatVector delta = zz - z;
      const double gd = g.dot(delta);
      const auto b = batches.next();
      FlatVector out = n * energy.grad_h(view_of(zz, d), as_batch(b));
      out += delta / tau + (2.0 * n * (gd + r)) * g;
      return out;
    };
    z_next = solve_inner(obj, z, cfg).z;
  }

  SchemeState next;
  next.particles = ParticleSet::unflatten(z_next, d);
  next.r = r + g.dot(z_next - z);
  next.iteration = state.iteration + 1;
  return next;
}

SchemeState step_evi_im(const SchemeState& state, const EnergyDecomposition& energy, const SamplerConfig& cfg) {
  const std::size_t d = state.particles.dim();
  const auto n = static_cast<double>(state.particles.size());
  const double tau = cfg.step;
  const FlatVector z = state.particles.flatten();

  // N * J(z') with J(z') = |z'-z|^2 / (2 N tau) + F_h(z')
  BatchSource batches(energy.target(), cfg, state.iteration);
  ObjectiveOracle obj;
  obj.value = [&](const FlatVector& zz) {
    const auto b = batches.next();
    return (zz - z).squaredNorm() / (2.0 * tau) + n * energy.energy_f(view_of(zz, d), as_batch(b));
  };
  obj.gradient = [&](const FlatVector& zz) {
    const auto b = batches.next();
    const ParticleView v = view_of(zz, d);
    FlatVector out = energy.grad_g(v).grad;
    out += energy.grad_h(v, as_batch(b));
    out *= n;
    out += (zz - z) / tau;
    return out;
  };
  obj.value_and_gradient = [&](const FlatVector& zz) {
    const auto b = batches.next();
    const ParticleView v = view_of(zz, d);
    InteractionGrad ig = energy.grad_g(v);
    const double f = ig.value + energy.energy_h(v, as_batch(b));
    FlatVector out = std::move(ig.grad);
    out += energy.grad_h(v, as_batch(b));
    out *= n;
    out += (zz - z) / tau;
    return std::pair<double, FlatVector>((zz - z).squaredNorm() / (2.0 * tau) + n * f, std::move(out));
  };

  SchemeState next;
  next.particles = ParticleSet::unflatten(solve_inner(obj, z, cfg).z, d);
  next.iteration = state.iteration + 1;
  return next;
}

SchemeState step_aegd(const SchemeState& state, const QuadratizedEnergy& qe_full, const SamplerConfig& cfg) {
  if (qe_full.part() != QuadratizedPart::full) throw ConfigError("aegd: quadratization must cover the full energy");
  if (!std::isfinite(state.r)) throw NumericalError("aegd: auxiliary variable r is not finite");
  const auto& target = qe_full.decomposition().target();
  const auto b = draw_minibatch(target, cfg, state.iteration, 0);
  const QuadratizedGrad qg = qe_full.q_grad(state.particles, as_batch(b));
  const double tau_eff = static_cast<double>(state.particles.size()) * cfg.step;
  AegdUpdate up = aegd_update(state.particles.flatten(), state.r, qg.grad, tau_eff);

  SchemeState next;
  next.particles = ParticleSet::unflatten(up.z, state.particles.dim());
  next.r = up.r;
  next.iteration = state.iteration + 1;
  return next;
}

SchemeState step_blob(const SchemeState& state, const EnergyDecomposition& energy, const SamplerConfig& cfg) {
  const auto b = draw_minibatch(energy.target(), cfg, state.iteration, 0);
  FlatVector g = energy.grad_g(state.particles).grad;
  g += energy.grad_h(state.particles, as_batch(b));
  g *= static_cast<double>(state.particles.size());

  SchemeState next;
  next.accumulator = state.accumulator.size() == g.size() ? state.accumulator : FlatVector::Zero(g.size());
  next.accumulator += g.cwiseProduct(g);
  FlatVector z = state.particles.flatten();
  z.array() -= cfg.step * g.array() / (next.accumulator.array().sqrt() + cfg.inner.adagrad_eps);
  next.particles = ParticleSet::unflatten(z, state.particles.dim());
  next.iteration = state.iteration + 1;
  return next;
}

SchemeState step_svgd(const SchemeState& state, const TargetDensity& target, const SamplerConfig& cfg) {
  const auto b = draw_minibatch(target, cfg, state.iteration, 0);
  const FlatVector phi = svgd_direction(state.particles, target, as_batch(b));
  FlatVector z = state.particles.flatten();

  SchemeState next;
  if (cfg.svgd_adagrad) {
    const FlatVector sq = phi.cwiseProduct(phi);
    if (state.accumulator.size() != phi.size()) {
      next.accumulator = sq;
    } else {
      next.accumulator = cfg.svgd_momentum * state.accumulator + (1.0 - cfg.svgd_momentum) * sq;
    }
    z.array() += cfg.step * phi.array() / (1e-6 + next.accumulator.array().sqrt());
  } else {
    z += cfg.step * phi;
  }
  next.particles = ParticleSet::unflatten(z, state.particles.dim());
  next.iteration = state.iteration + 1;
  return next;
}

SchemeState step_lmc(const SchemeState& state, const TargetDensity& target, const SamplerConfig& cfg,
                     const CounterRng& rng) {
  const std::size_t n = state.particles.size();
  const auto d = static_cast<Eigen::Index>(state.particles.dim());
  const double eps = cfg.step;
  const double noise = std::sqrt(2.0 * eps);
  const auto b = draw_minibatch(target, cfg, state.iteration, 0);
  const CounterRng step_rng = rng.fork(state.iteration);

  SchemeState next = state;
  Vector g(d);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = next.particles.positions().row(static_cast<Eigen::Index>(i));
    const Vector xi = x.transpose();
    if (b) target.grad_potential(xi, Batch(*b), g);
    else target.grad_potential(xi, g);
    CounterRng particle_rng = step_rng.fork(i);
    for (Eigen::Index k = 0; k < d; ++k) x(k) = xi(k) - eps * g(k) + noise * particle_rng.normal();
  }
  next.iteration = state.iteration + 1;
  return next;
}

// ---------------------------------------------------------------------------

RunTrace run(const SamplerConfig& cfg, TargetPtr target, const ParticleSet& init, const RunOptions& opts) {
  cfg.validate();
  if (!target) throw ConfigError("run: null target");
  if (init.dim() != target->dim()) throw ConfigError("run: initial particles do not match the target dimension");

  const EnergyDecomposition energy(GaussianKernel(cfg.bandwidth_h, target->dim()), target);
  const QuadratizedEnergy q_part(energy, cfg.shift_c, QuadratizedPart::interaction);
  const QuadratizedEnergy q_full(energy, cfg.shift_c, QuadratizedPart::full);
  const CounterRng lmc_rng(cfg.seed, kLmcStream);

  RunTrace trace;
  trace.scheme = to_string(cfg.scheme);
  require_finite(init, 0);
  SchemeState state = init_state(cfg, energy, init);
  double step_ms = 0.0;

  auto record = [&](bool final_record) {
    TraceRecord rec;
    rec.n = state.iteration;
    rec.g = energy.energy_g(state.particles);
    rec.h = energy.energy_h(state.particles);
    rec.f = rec.g + rec.h;
    if (cfg.scheme == Scheme::imeq || cfg.scheme == Scheme::aegd) {
      const double e = cfg.scheme == Scheme::imeq ? rec.g : rec.f;
      rec.r = state.r;
      rec.modified_energy = cfg.scheme == Scheme::imeq ? state.r * state.r + rec.h : state.r * state.r;
      if (e + cfg.shift_c > 0.0) rec.r_drift = std::abs(state.r - std::sqrt(e + cfg.shift_c));
    }
    if (opts.mmd && (final_record || (opts.mmd_cadence > 0 && state.iteration % opts.mmd_cadence == 0))) {
      rec.mmd2 = (*opts.mmd)(state.particles);
    }
    rec.counts = energy.counters().snapshot();
    rec.wall_ms = step_ms;
    trace.records.push_back(rec);
  };

  record(cfg.n_outer == 0);
  if (opts.observer) opts.observer(state, trace.records.back());
  for (std::size_t n = 1; n <= cfg.n_outer; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    switch (cfg.scheme) {
      case Scheme::imeq: state = step_imeq(state, q_part, cfg); break;
      case Scheme::evi_im: state = step_evi_im(state, energy, cfg); break;
      case Scheme::aegd: state = step_aegd(state, q_full, cfg); break;
      case Scheme::blob: state = step_blob(state, energy, cfg); break;
      case Scheme::svgd: state = step_svgd(state, *target, cfg); break;
      case Scheme::lmc: state = step_lmc(state, *target, cfg, lmc_rng); break;
    }
    step_ms += elapsed_ms(t0);
    require_finite(state.particles, n);
    if ((cfg.scheme == Scheme::imeq || cfg.scheme == Scheme::aegd) && !std::isfinite(state.r)) {
      throw NumericalError("auxiliary variable r became non-finite at iteration " + std::to_string(n));
    }

    const bool last_planned = n == cfg.n_outer;
    record(last_planned);
    const auto& recs = trace.records;
    const bool steady = std::abs(recs[recs.size() - 1].f - recs[recs.size() - 2].f) < cfg.steady_state_tol;
    if (!trace.steady_state && steady) trace.steady_state = n;
    if (cfg.stop_at_steady_state && steady && !last_planned) {
      if (opts.mmd && !trace.records.back().mmd2) trace.records.back().mmd2 = (*opts.mmd)(state.particles);
      if (opts.observer) opts.observer(state, trace.records.back());
      break;
    }
    if (opts.observer) opts.observer(state, trace.records.back());
  }
  trace.final_particles = state.particles;
  return trace;
}

// ---------------------------------------------------------------------------

std::string LmcProtocol::canonical_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["burn_in"] = burn_in;
  j["n_chains"] = n_chains;
  j["samples_per_chain"] = samples_per_chain;
  j["thin"] = thin;
  j["init_scale"] = init_scale;
  j["seed"] = seed;
  return j.dump();
}

std::string LmcProtocol::hash() const { return io::fnv1a_hex("lmc-v1:" + canonical_json()); }

RowMatrix lmc_sample(const TargetDensity& target, const LmcProtocol& protocol) {
  if (protocol.n_chains == 0 || protocol.samples_per_chain == 0) throw ConfigError("lmc: need at least one sample");
  if (!(protocol.step > 0.0)) throw ConfigError("lmc: step must be positive");
  if (protocol.thin == 0) throw ConfigError("lmc: thin must be >= 1");
  const auto d = static_cast<Eigen::Index>(target.dim());
  const std::size_t per = protocol.samples_per_chain;
  RowMatrix out(static_cast<Eigen::Index>(protocol.n_chains * per), d);
  const double eps = protocol.step;
  const double noise = std::sqrt(2.0 * eps);
  const double init_sd = std::sqrt(protocol.init_scale);
  const CounterRng base(protocol.seed, kReferenceStream);

  auto run_chain = [&](std::size_t c) {
    CounterRng rng = base.fork(c);
    Vector x(d), g(d);
    for (Eigen::Index k = 0; k < d; ++k) x(k) = init_sd * rng.normal();
    auto advance = [&](std::size_t steps) {
      for (std::size_t s = 0; s < steps; ++s) {
        target.grad_potential(x, g);
        for (Eigen::Index k = 0; k < d; ++k) x(k) += -eps * g(k) + noise * rng.normal();
      }
      if (!x.allFinite()) throw NumericalError("lmc: chain " + std::to_string(c) + " diverged");
    };
    advance(protocol.burn_in);
    for (std::size_t s = 0; s < per; ++s) {
      if (s > 0) advance(protocol.thin);
      out.row(static_cast<Eigen::Index>(c * per + s)) = x.transpose();
    }
  };

  // Chains are independent streams, so the partition across threads does not affect the samples.
  const std::size_t n_threads = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                                              protocol.n_chains));
  if (n_threads == 1) {
    for (std::size_t c = 0; c < protocol.n_chains; ++c) run_chain(c);
    return out;
  }
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t c = t; c < protocol.n_chains; c += n_threads) run_chain(c);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ReferenceSamples generate_reference(const TargetDensity& target, const std::string& target_id,
                                    const LmcProtocol& protocol) {
  return ReferenceSamples(lmc_sample(target, protocol), {target_id, protocol.hash(), protocol.seed});
}

}  // namespace parvi
