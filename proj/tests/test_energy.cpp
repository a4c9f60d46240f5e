#include "parvi/energy.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace parvi;

namespace {

class NanAtOrigin final : public TargetDensity {
 public:
  std::string name() const override { return "nan_at_origin"; }
  std::size_t dim() const override { return 2; }
  double potential(ConstVectorRef x) const override {
    return x.norm() < 1e-12 ? std::numeric_limits<double>::quiet_NaN() : 0.5 * x.squaredNorm();
  }
  void grad_potential(ConstVectorRef x, VectorRef out) const override { out = x; }
};

ParticleSet random_set(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 0.5) {
  CounterRng rng(seed);
  return gaussian_init(n, d, Vector::Zero(static_cast<Eigen::Index>(d)), scale, rng);
}

EnergyDecomposition make_energy(std::size_t d, double h = 0.1) {
  return EnergyDecomposition(GaussianKernel(h, d), IsotropicGaussian::standard(d));
}

}  // namespace

TEST_CASE("single particle interaction energy is ln K(0)") {
  const EnergyDecomposition e(GaussianKernel(0.1, 2), std::make_shared<DoubleBanana>());
  RowMatrix m(1, 2);
  m << 0.5, 0.5;
  const ParticleSet p(m);
  const double lnk0 = std::log(1.0 / (2.0 * std::numbers::pi * 0.1));
  CHECK(e.energy_g(p) == doctest::Approx(lnk0).epsilon(1e-14));
  CHECK(lnk0 == doctest::Approx(0.46471).epsilon(1e-5));
  CHECK(e.grad_g(p).grad.norm() == 0.0);

  const QuadratizedEnergy q(e, 5.0);
  CHECK(q.q_eval(p) == doctest::Approx(std::sqrt(lnk0 + 5.0)).epsilon(1e-14));
  CHECK(q.q_eval(p) == doctest::Approx(2.33766).epsilon(1e-5));
}

TEST_CASE("interaction energy matches the brute-force oracle") {
  for (std::size_t n : {1u, 2u, 7u, 30u}) {
    for (std::size_t d : {1u, 2u, 3u}) {
      const auto e = make_energy(d, 0.2);
      const ParticleSet p = random_set(n, d, 100 + n + d);
      CHECK(e.energy_g(p) == doctest::Approx(oracle::interaction(oracle::to_points(p), 0.2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("interaction gradient matches the two-sum transcription") {
  for (std::size_t n : {2u, 5u, 10u}) {
    for (std::size_t d : {1u, 2u, 3u}) {
      const auto e = make_energy(d);
      const ParticleSet p = random_set(n, d, 7 * n + d);
      const auto ref = oracle::interaction_grad(oracle::to_points(p), 0.1);
      const FlatVector got = e.grad_g(p).grad;
      const FlatVector want = Eigen::Map<const FlatVector>(ref.data(), static_cast<Eigen::Index>(ref.size()));
      CHECK(oracle::rel_err(got, want) <= 1e-12);
    }
  }
}

TEST_CASE("energy gradients agree with central differences") {
  CounterRng seeds(55);
  for (std::size_t n : {2u, 5u, 10u}) {
    for (std::size_t d : {1u, 2u, 3u}) {
      const EnergyDecomposition e(GaussianKernel(0.1, d), IsotropicGaussian::standard(d));
      for (int trial = 0; trial < 3; ++trial) {
        const ParticleSet p = random_set(n, d, seeds.next_u64());
        const FlatVector z = p.flatten();
        const FlatVector num_g =
            oracle::central_diff([&](const FlatVector& y) { return e.energy_g(view_of(y, d)); }, z);
        // Widely separated particles give interaction gradients near 1e-8, below what central
        // differences resolve, so the relative error is floored at 1e-3.
        CHECK(oracle::rel_err(e.grad_g(p).grad, num_g, 1e-3) <= 1e-5);
        const FlatVector num_h =
            oracle::central_diff([&](const FlatVector& y) { return e.energy_h(view_of(y, d)); }, z);
        CHECK(oracle::rel_err(e.grad_h(p), num_h) <= 1e-5);
        const FlatVector num_f =
            oracle::central_diff([&](const FlatVector& y) { return e.energy_f(view_of(y, d)); }, z);
        CHECK(oracle::rel_err(e.grad_g(p).grad + e.grad_h(p), num_f) <= 1e-5);
      }
    }
  }
}

TEST_CASE("F_h splits into G plus H") {
  const EnergyDecomposition e(GaussianKernel(0.1, 2), std::make_shared<DoubleBanana>());
  const ParticleSet p = random_set(20, 2, 3);
  CHECK(e.energy_f(p) == doctest::Approx(e.energy_g(p) + e.energy_h(p)).epsilon(1e-14));
  CHECK(e.grad_g(p).value == doctest::Approx(e.energy_g(p)).epsilon(1e-14));
}

TEST_CASE("interaction energy is translation invariant and bounded") {
  const auto e = make_energy(2);
  const ParticleSet p = random_set(25, 2, 9);
  RowMatrix shifted = p.positions();
  shifted.col(0).array() += 3.0;
  shifted.col(1).array() -= 1.25;
  CHECK(e.energy_g(ParticleSet(shifted)) == doctest::Approx(e.energy_g(p)).epsilon(1e-12));

  // K(0) <= row sum <= N K(0) bounds G between ln K(0) - ln N and ln K(0).
  const double lnk0 = std::log(e.kernel().norm_const());
  const double g = e.energy_g(p);
  CHECK(g >= lnk0 - std::log(25.0));
  CHECK(g <= lnk0);
}

TEST_CASE("gradient evaluations are counted") {
  const auto e = make_energy(2);
  const ParticleSet p = random_set(4, 2, 1);
  const EvalCounts before = e.counters().snapshot();
  (void)e.grad_g(p);
  (void)e.grad_g(p);
  (void)e.grad_h(p);
  const EvalCounts after = e.counters().snapshot();
  CHECK(after.interaction_grad_evals - before.interaction_grad_evals == 2);
  CHECK(after.potential_grad_evals - before.potential_grad_evals == 1);

  const QuadratizedEnergy q(e, 10.0);
  (void)q.q_grad(p);
  CHECK(e.counters().snapshot().interaction_grad_evals - after.interaction_grad_evals == 1);
}

TEST_CASE("reconstructed interaction gradient does not depend on the shift") {
  const auto e = make_energy(2);
  const ParticleSet p = random_set(12, 2, 31);
  const FlatVector direct = e.grad_g(p).grad;
  for (double c : {2.0, 10.0, 1000.0}) {
    const QuadratizedEnergy q(e, c);
    const QuadratizedGrad qg = q.q_grad(p);
    CHECK(oracle::rel_err(2.0 * qg.q * qg.grad, direct) <= 1e-12);
  }

  const QuadratizedEnergy full(e, 10.0, QuadratizedPart::full);
  const QuadratizedGrad fg = full.q_grad(p);
  CHECK(oracle::rel_err(2.0 * fg.q * fg.grad, direct + e.grad_h(p)) <= 1e-12);
  CHECK(fg.energy == doctest::Approx(e.energy_f(p)).epsilon(1e-14));
}

TEST_CASE("non-positive shifted energy is a numerical error") {
  const auto e = make_energy(2);
  const ParticleSet p = random_set(3, 2, 2);
  const QuadratizedEnergy q(e, -100.0);
  CHECK_THROWS_AS(q.q_eval(p), NumericalError);
  CHECK_THROWS_AS(q.q_grad(p), NumericalError);
  CHECK_THROWS_AS(QuadratizedEnergy(e, std::numeric_limits<double>::infinity()), ConfigError);
}

TEST_CASE("non-finite potential raises a numerical error") {
  const EnergyDecomposition e(GaussianKernel(0.1, 2), std::make_shared<NanAtOrigin>());
  ParticleSet p(2, 2);
  CHECK_THROWS_AS(e.energy_h(p), NumericalError);
  CHECK_THROWS_AS(e.energy_f(p), NumericalError);
}

TEST_CASE("dimension mismatches are configuration errors") {
  CHECK_THROWS_AS(EnergyDecomposition(GaussianKernel(0.1, 3), std::make_shared<DoubleBanana>()), ConfigError);
  const auto e = make_energy(2);
  CHECK_THROWS_AS(e.energy_g(ParticleSet(3, 3)), ConfigError);
}
