#include "parvi/core.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace parvi {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

ParticleView view_of(const FlatVector& z, std::size_t dim) {
  if (dim == 0 || static_cast<std::size_t>(z.size()) % dim != 0) {
    throw ConfigError("flat vector length " + std::to_string(z.size()) + " is not a multiple of dim " +
                      std::to_string(dim));
  }
  return {z.data(), static_cast<std::size_t>(z.size()) / dim, dim};
}

ParticleSet::ParticleSet(std::size_t n_particles, std::size_t dim) {
  if (n_particles == 0 || dim == 0) throw ConfigError("particle set needs n >= 1 and d >= 1");
  positions_ = RowMatrix::Zero(static_cast<Eigen::Index>(n_particles), static_cast<Eigen::Index>(dim));
}

ParticleSet::ParticleSet(RowMatrix positions) : positions_(std::move(positions)) {
  if (positions_.rows() == 0 || positions_.cols() == 0) throw ConfigError("particle set needs n >= 1 and d >= 1");
}

FlatVector ParticleSet::flatten() const { return view().flat(); }

ParticleSet ParticleSet::unflatten(const FlatVector& z, std::size_t dim) {
  const ParticleView v = view_of(z, dim);
  RowMatrix m = Eigen::Map<const RowMatrix>(z.data(), static_cast<Eigen::Index>(v.size()),
                                            static_cast<Eigen::Index>(dim));
  return ParticleSet(std::move(m));
}

std::optional<std::size_t> ParticleSet::first_nonfinite() const {
  const std::size_t d = dim();
  const double* p = positions_.data();
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      if (!std::isfinite(p[i * d + k])) return i;
    }
  }
  return std::nullopt;
}

bool ParticleSet::operator==(const ParticleSet& other) const {
  return positions_.rows() == other.positions_.rows() && positions_.cols() == other.positions_.cols() &&
         positions_ == other.positions_;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(splitmix64(seed ^ splitmix64(stream + kGamma))) {}

CounterRng CounterRng::fork(std::uint64_t substream) const {
  CounterRng child(seed_, splitmix64(stream_ + kGamma) ^ substream);
  return child;
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return splitmix64(key_ + counter_ * kGamma);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

std::size_t CounterRng::uniform_index(std::size_t n) {
  // Lemire's multiply-shift; bias is below 2^-64 * n and irrelevant here.
  const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(prod >> 64);
}

ParticleSet gaussian_init(std::size_t n, std::size_t d, const Vector& mean, double cov_scale, CounterRng& rng) {
  if (!(cov_scale > 0.0) || !std::isfinite(cov_scale)) {
    throw ConfigError("gaussian_init: cov_scale must be positive, got " + std::to_string(cov_scale));
  }
  if (static_cast<std::size_t>(mean.size()) != d) {
    throw ConfigError("gaussian_init: mean has length " + std::to_string(mean.size()) + ", expected " +
                      std::to_string(d));
  }
  ParticleSet p(n, d);
  const double sd = std::sqrt(cov_scale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      p.positions()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          mean(static_cast<Eigen::Index>(k)) + sd * rng.normal();
    }
  }
  return p;
}

void require_finite(const ParticleSet& p, std::size_t iteration) {
  if (auto bad = p.first_nonfinite()) {
    throw NumericalError("non-finite coordinate at iteration " + std::to_string(iteration) + ", particle " +
                         std::to_string(*bad));
  }
}

}  // namespace parvi
