#include "parvi/energy.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace parvi {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

// D_i = sum_j K_h(x_i - x_j), accumulated over j > i in row order. If `pair_k`
// is given, it receives the upper-triangle kernel values in that same order.
std::vector<double> kernel_row_sums(const GaussianKernel& kernel, ParticleView p, std::vector<double>* pair_k) {
  const std::size_t n = p.size();
  const std::size_t d = p.dim();
  const double* x = p.data();
  std::vector<double> denom(n, kernel.norm_const());
  if (pair_k) pair_k->resize(n * (n - 1) / 2);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    for (std::size_t j = i + 1; j < n; ++j, ++idx) {
      const double k = kernel.eval_sq(sq_dist(xi, x + j * d, d));
      denom[i] += k;
      denom[j] += k;
      if (pair_k) (*pair_k)[idx] = k;
    }
  }
  return denom;
}

double mean_log(const std::vector<double>& denom) {
  const auto n = static_cast<double>(denom.size());
  double s = 0.0;
  for (double di : denom) s += std::log(di / n);
  return s / n;
}

}  // namespace

EnergyDecomposition::EnergyDecomposition(GaussianKernel kernel, TargetPtr target)
    : kernel_(kernel), target_(std::move(target)), counters_(std::make_shared<EvalCounters>()) {
  if (!target_) throw ConfigError("energy: null target");
  if (target_->dim() != kernel_.dim()) throw ConfigError("energy: kernel and target dimensions differ");
}

void EnergyDecomposition::check(ParticleView p) const {
  if (p.dim() != kernel_.dim()) {
    throw ConfigError("energy: particles have dimension " + std::to_string(p.dim()) + ", expected " +
                      std::to_string(kernel_.dim()));
  }
  if (p.size() == 0) throw ConfigError("energy: empty particle set");
}

double EnergyDecomposition::interaction_value(ParticleView p) const {
  return mean_log(kernel_row_sums(kernel_, p, nullptr));
}

double EnergyDecomposition::potential_value(ParticleView p, std::optional<Batch> batch) const {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = batch ? target_->potential(p.row(i), *batch) : target_->potential(p.row(i));
    if (!std::isfinite(v)) throw NumericalError("energy: non-finite potential at particle " + std::to_string(i));
    s += v;
  }
  return s / static_cast<double>(p.size());
}

double EnergyDecomposition::energy_f(ParticleView p, std::optional<Batch> batch) const {
  check(p);
  counters_->add_energy();
  return interaction_value(p) + potential_value(p, batch);
}

double EnergyDecomposition::energy_g(ParticleView p) const {
  check(p);
  counters_->add_energy();
  return interaction_value(p);
}

double EnergyDecomposition::energy_h(ParticleView p, std::optional<Batch> batch) const {
  check(p);
  counters_->add_energy();
  return potential_value(p, batch);
}

InteractionGrad EnergyDecomposition::grad_g(ParticleView p) const {
  check(p);
  counters_->add_interaction_grad();
  const std::size_t n = p.size();
  const std::size_t d = p.dim();
  std::vector<double> pair_k;
  const std::vector<double> denom = kernel_row_sums(kernel_, p, &pair_k);

  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / denom[i];

  // grad_i G = -(1 / (N h)) sum_j K_ij (1/D_i + 1/D_j) (x_i - x_j)
  InteractionGrad out;
  out.value = mean_log(denom);
  out.grad = FlatVector::Zero(static_cast<Eigen::Index>(n * d));
  double* g = out.grad.data();
  const double* x = p.data();
  const double pref = 1.0 / (static_cast<double>(n) * kernel_.bandwidth());
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    for (std::size_t j = i + 1; j < n; ++j, ++idx) {
      const double c = pref * pair_k[idx] * (inv[i] + inv[j]);
      const double* xj = x + j * d;
      for (std::size_t k = 0; k < d; ++k) {
        const double t = c * (xi[k] - xj[k]);
        g[i * d + k] -= t;
        g[j * d + k] += t;
      }
    }
  }
  return out;
}

FlatVector EnergyDecomposition::grad_h(ParticleView p, std::optional<Batch> batch) const {
  check(p);
  counters_->add_potential_grad();
  const std::size_t n = p.size();
  const std::size_t d = p.dim();
  FlatVector out(static_cast<Eigen::Index>(n * d));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto seg = out.segment(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d));
    if (batch) target_->grad_potential(p.row(i), *batch, seg);
    else target_->grad_potential(p.row(i), seg);
    seg *= inv_n;
  }
  return out;
}

// ---------------------------------------------------------------------------

QuadratizedEnergy::QuadratizedEnergy(const EnergyDecomposition& energy, double shift_c, QuadratizedPart part)
    : energy_(&energy), c_(shift_c), part_(part) {
  if (!std::isfinite(c_)) throw ConfigError("quadratization shift C must be finite");
}

double QuadratizedEnergy::q_from(double e) const {
  const double arg = e + c_;
  if (!(arg > 0.0)) {
    throw NumericalError("energy quadratization: E + C = " + std::to_string(arg) +
                         " is not positive; increase the shift C (currently " + std::to_string(c_) + ")");
  }
  return std::sqrt(arg);
}

double QuadratizedEnergy::q_eval(ParticleView p, std::optional<Batch> batch) const {
  const double e = part_ == QuadratizedPart::interaction ? energy_->energy_g(p) : energy_->energy_f(p, batch);
  return q_from(e);
}

QuadratizedGrad QuadratizedEnergy::q_grad(ParticleView p, std::optional<Batch> batch) const {
  InteractionGrad ig = energy_->grad_g(p);
  QuadratizedGrad out;
  out.energy = ig.value;
  out.grad = std::move(ig.grad);
  if (part_ == QuadratizedPart::full) {
    out.energy += energy_->energy_h(p, batch);
    out.grad += energy_->grad_h(p, batch);
  }
  out.q = q_from(out.energy);
  out.grad /= 2.0 * out.q;
  return out;
}

}  // namespace parvi
