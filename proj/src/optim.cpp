#include "parvi/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace parvi {

namespace {

void require_finite_value(double v, int iter, const char* who) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string(who) + ": non-finite objective at inner iteration " + std::to_string(iter));
  }
}

void require_finite_vec(const FlatVector& g, int iter, const char* who) {
  if (!g.allFinite()) {
    throw NumericalError(std::string(who) + ": non-finite gradient at inner iteration " + std::to_string(iter));
  }
}

}  // namespace

void InnerSolverConfig::validate() const {
  if (max_iters < 1) throw ConfigError("inner solver: max_iters must be >= 1");
  if (!(bb_min > 0.0) || !(bb_min < bb_max)) throw ConfigError("inner solver: need 0 < bb_min < bb_max");
  if (!(lr > 0.0)) throw ConfigError("inner solver: lr must be positive");
  if (!(fallback_step() > 0.0)) throw ConfigError("inner solver: BB fallback step must be positive");
  if (!(grad_tol >= 0.0)) throw ConfigError("inner solver: grad_tol must be non-negative");
}

SolveResult bb_descent(const ObjectiveOracle& obj, const FlatVector& z0, const InnerSolverConfig& cfg) {
  cfg.validate();
  auto both = [&](const FlatVector& z) -> std::pair<double, FlatVector> {
    if (obj.value_and_gradient) return obj.value_and_gradient(z);
    return {obj.value(z), obj.gradient(z)};
  };

  SolveResult res;
  auto [f, g] = both(z0);
  res.gradient_evals = 1;
  res.value_evals = 1;
  require_finite_value(f, 0, "bb_descent");
  require_finite_vec(g, 0, "bb_descent");
  res.z = z0;
  res.value = f;
  if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
    res.converged = true;
    return res;
  }

  FlatVector z = z0;
  double step = cfg.fallback_step();
  for (int k = 1; k <= cfg.max_iters; ++k) {
    FlatVector z_new = z - step * g;
    res.iterations = k;
    if (k == cfg.max_iters) {
      // Final iterate only needs a value for the best-seen comparison.
      const double f_new = obj.value ? obj.value(z_new) : both(z_new).first;
      ++res.value_evals;
      if (!obj.value) ++res.gradient_evals;
      require_finite_value(f_new, k, "bb_descent");
      if (f_new < res.value) {
        res.value = f_new;
        res.z = std::move(z_new);
      }
      break;
    }
    auto [f_new, g_new] = both(z_new);
    ++res.value_evals;
    ++res.gradient_evals;
    require_finite_value(f_new, k, "bb_descent");
    require_finite_vec(g_new, k, "bb_descent");
    if (f_new < res.value) {
      res.value = f_new;
      res.z = z_new;
    }
    if (g_new.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    const FlatVector s = z_new - z;
    const FlatVector y = g_new - g;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, cfg.bb_min, cfg.bb_max) : cfg.fallback_step();
    z = std::move(z_new);
    g = std::move(g_new);
  }
  return res;
}

SolveResult adagrad_descent(const ObjectiveOracle& obj, const FlatVector& z0, const InnerSolverConfig& cfg) {
  cfg.validate();
  SolveResult res;
  res.value = std::numeric_limits<double>::quiet_NaN();
  FlatVector z = z0;
  FlatVector acc = FlatVector::Zero(z0.size());
  for (int k = 0; k < cfg.max_iters; ++k) {
    const FlatVector g = obj.gradient(z);
    ++res.gradient_evals;
    require_finite_vec(g, k, "adagrad_descent");
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    acc += g.cwiseProduct(g);
    z.array() -= cfg.lr * g.array() / (acc.array().sqrt() + cfg.adagrad_eps);
    res.iterations = k + 1;
  }
  require_finite_vec(z, res.iterations, "adagrad_descent");
  res.z = std::move(z);
  return res;
}

}  // namespace parvi
