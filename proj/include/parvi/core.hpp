#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace parvi {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstVectorRef = Eigen::Ref<const Vector>;
using VectorRef = Eigen::Ref<Vector>;

/// Row-major concatenation of all particle coordinates (length N*d).
using FlatVector = Eigen::VectorXd;

/// Raised when a run produces or meets a non-finite or otherwise unusable value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration or arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-owning view of N particles in d dimensions laid out row-major.
class ParticleView {
 public:
  ParticleView(const double* data, std::size_t n, std::size_t d) : data_(data), n_(n), d_(d) {}

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  const double* data() const { return data_; }

  Eigen::Map<const Vector> row(std::size_t i) const {
    return Eigen::Map<const Vector>(data_ + i * d_, static_cast<Eigen::Index>(d_));
  }
  Eigen::Map<const FlatVector> flat() const {
    return Eigen::Map<const FlatVector>(data_, static_cast<Eigen::Index>(n_ * d_));
  }

 private:
  const double* data_;
  std::size_t n_;
  std::size_t d_;
};

/// View of a flat vector as particles of dimension d. The length must be a multiple of d.
ParticleView view_of(const FlatVector& z, std::size_t dim);

class ParticleSet {
 public:
  /// Empty placeholder, to be assigned before use.
  ParticleSet() = default;
  ParticleSet(std::size_t n_particles, std::size_t dim);
  explicit ParticleSet(RowMatrix positions);

  std::size_t size() const { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(positions_.cols()); }

  const RowMatrix& positions() const { return positions_; }
  RowMatrix& positions() { return positions_; }

  ParticleView view() const { return {positions_.data(), size(), dim()}; }
  operator ParticleView() const { return view(); }  // NOLINT(google-explicit-constructor)

  FlatVector flatten() const;
  static ParticleSet unflatten(const FlatVector& z, std::size_t dim);

  /// Index of the first particle holding a NaN/Inf coordinate.
  std::optional<std::size_t> first_nonfinite() const;

  bool operator==(const ParticleSet& other) const;

 private:
  RowMatrix positions_;
};

/// Counter-based generator: output k is a SplitMix64 finalizer applied to
/// key + (k+1)*gamma, so a stream is fully determined by (seed, stream) and
/// independent streams can be consumed in any order or on any thread.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent generator keyed by (seed, stream, substream).
  CounterRng fork(std::uint64_t substream) const;

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller; each pair of normals consumes two uniforms).
  double normal();
  std::size_t uniform_index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Snapshot of the evaluation counters.
struct EvalCounts {
  std::uint64_t interaction_grad_evals = 0;
  std::uint64_t potential_grad_evals = 0;
  std::uint64_t energy_evals = 0;

  bool operator==(const EvalCounts&) const = default;
};

class EvalCounters {
 public:
  EvalCounters() = default;
  EvalCounters(const EvalCounters&) = delete;
  EvalCounters& operator=(const EvalCounters&) = delete;

  void add_interaction_grad() { interaction_grad_.fetch_add(1, std::memory_order_relaxed); }
  void add_potential_grad() { potential_grad_.fetch_add(1, std::memory_order_relaxed); }
  void add_energy() { energy_.fetch_add(1, std::memory_order_relaxed); }

  EvalCounts snapshot() const {
    return {interaction_grad_.load(std::memory_order_relaxed), potential_grad_.load(std::memory_order_relaxed),
            energy_.load(std::memory_order_relaxed)};
  }

 private:
  std::atomic<std::uint64_t> interaction_grad_{0};
  std::atomic<std::uint64_t> potential_grad_{0};
  std::atomic<std::uint64_t> energy_{0};
};

/// n i.i.d. draws from N(mean, cov_scale * I).
ParticleSet gaussian_init(std::size_t n, std::size_t d, const Vector& mean, double cov_scale, CounterRng& rng);

/// Throws NumericalError naming the iteration and particle if any coordinate is non-finite.
void require_finite(const ParticleSet& p, std::size_t iteration);

}  // namespace parvi
