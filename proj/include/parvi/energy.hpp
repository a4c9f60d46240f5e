#pragma once

#include "parvi/core.hpp"
#include "parvi/kernels.hpp"
#include "parvi/targets.hpp"

#include <memory>
#include <optional>

namespace parvi {

/// Interaction part G and its gradient from a single O(N^2 d) pass.
struct InteractionGrad {
  double value = 0.0;
  FlatVector grad;
};

/// Discrete free energy
///   F_h = (1/N) sum_i [ ln((1/N) sum_j K_h(x_i - x_j)) + V(x_i) ] = G + H
/// with G the interaction part and H the potential part. All gradients are
/// gradients of F_h proper (they carry the 1/N prefactor).
class EnergyDecomposition {
 public:
  EnergyDecomposition(GaussianKernel kernel, TargetPtr target);

  const GaussianKernel& kernel() const { return kernel_; }
  const TargetDensity& target() const { return *target_; }
  const TargetPtr& target_ptr() const { return target_; }
  EvalCounters& counters() const { return *counters_; }

  double energy_f(ParticleView p, std::optional<Batch> batch = std::nullopt) const;
  double energy_g(ParticleView p) const;
  double energy_h(ParticleView p, std::optional<Batch> batch = std::nullopt) const;

  /// Counts one interaction-gradient evaluation.
  InteractionGrad grad_g(ParticleView p) const;
  /// Per-particle (1/N) grad V(x_i); counts one potential-gradient evaluation.
  FlatVector grad_h(ParticleView p, std::optional<Batch> batch = std::nullopt) const;

 private:
  void check(ParticleView p) const;
  double interaction_value(ParticleView p) const;
  double potential_value(ParticleView p, std::optional<Batch> batch) const;

  GaussianKernel kernel_;
  TargetPtr target_;
  std::shared_ptr<EvalCounters> counters_;
};

/// Which part of F_h is quadratized: G alone (ImEQ) or all of F_h (AEGD).
enum class QuadratizedPart { interaction, full };

struct QuadratizedGrad {
  double q = 0.0;       // sqrt(E + C)
  double energy = 0.0;  // E (G or F_h) at the evaluation point
  FlatVector grad;      // grad q = grad E / (2q)
};

/// q(z) = sqrt(E(z) + C), E = G or F_h.
class QuadratizedEnergy {
 public:
  QuadratizedEnergy(const EnergyDecomposition& energy, double shift_c,
                    QuadratizedPart part = QuadratizedPart::interaction);

  double shift() const { return c_; }
  QuadratizedPart part() const { return part_; }
  const EnergyDecomposition& decomposition() const { return *energy_; }

  double q_eval(ParticleView p, std::optional<Batch> batch = std::nullopt) const;
  /// One interaction-gradient evaluation per call.
  QuadratizedGrad q_grad(ParticleView p, std::optional<Batch> batch = std::nullopt) const;

  /// sqrt(e + C), throwing NumericalError when e + C <= 0.
  double q_from(double e) const;

 private:
  const EnergyDecomposition* energy_;
  double c_;
  QuadratizedPart part_;
};

}  // namespace parvi
