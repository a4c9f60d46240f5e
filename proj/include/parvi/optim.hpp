#pragma once

#include "parvi/core.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace parvi {

struct InnerSolverConfig {
  int max_iters = 20;
  double grad_tol = 1e-8;  // on the gradient sup-norm
  double lr = 0.1;         // AdaGrad learning rate; also the default BB fallback step
  double bb_min = 1e-10;
  double bb_max = 1e3;
  std::optional<double> bb_fallback_step;
  double adagrad_eps = 1e-8;

  double fallback_step() const { return bb_fallback_step.value_or(lr); }
  void validate() const;
};

/// Objective with gradient. `value_and_gradient`, when set, is used by
/// solvers that need both at one point so shared work is done once.
struct ObjectiveOracle {
  std::function<double(const FlatVector&)> value;
  std::function<FlatVector(const FlatVector&)> gradient;
  std::function<std::pair<double, FlatVector>(const FlatVector&)> value_and_gradient;
};

struct SolveResult {
  FlatVector z;
  double value = 0.0;  // objective at z (NaN for AdaGrad, which never evaluates it)
  int iterations = 0;
  int gradient_evals = 0;
  int value_evals = 0;
  bool converged = false;
};

/// Gradient descent with BB1 step (s.s)/(s.y), clamped to [bb_min, bb_max];
/// the first step and non-positive-curvature steps use the fallback step.
/// Runs at most max_iters steps with at most max_iters gradient evaluations
/// and returns the best iterate seen.
SolveResult bb_descent(const ObjectiveOracle& obj, const FlatVector& z0, const InnerSolverConfig& cfg);

/// AdaGrad: a += g*g; z -= lr * g / (sqrt(a) + eps). Returns the last iterate.
SolveResult adagrad_descent(const ObjectiveOracle& obj, const FlatVector& z0, const InnerSolverConfig& cfg);

}  // namespace parvi
