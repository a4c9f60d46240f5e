#pragma once

#include "parvi/core.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parvi {

/// Subset of data indices used for a stochastic potential estimate.
using Batch = std::span<const std::size_t>;

/// V(x) = 0.5 * precision * |x - center|^2 + const.
struct IsotropicQuadratic {
  double precision = 0.0;
  Vector center;
};

/// Differentiable unnormalized log-density, expressed through the potential
/// V(x) = -ln rho*(x) (up to an additive constant) and its gradient.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double potential(ConstVectorRef x) const = 0;
  virtual void grad_potential(ConstVectorRef x, VectorRef out) const = 0;

  Vector grad_potential(ConstVectorRef x) const {
    Vector g(static_cast<Eigen::Index>(dim()));
    grad_potential(x, g);
    return g;
  }

  virtual bool supports_minibatch() const { return false; }
  /// Number of data items a batch indexes into (0 when not data-driven).
  virtual std::size_t data_size() const { return 0; }
  virtual double potential(ConstVectorRef x, Batch /*batch*/) const { return potential(x); }
  virtual void grad_potential(ConstVectorRef x, Batch /*batch*/, VectorRef out) const { grad_potential(x, out); }

  /// Present when V is an isotropic quadratic; enables closed-form implicit solves.
  virtual std::optional<IsotropicQuadratic> quadratic_form() const { return std::nullopt; }
};

using TargetPtr = std::shared_ptr<const TargetDensity>;

/// V(x) = 0.5|x|^2 + 0.5 (ln[x1^2 + 100 (x2 - x1^2)^2] - ln 30)^2.
class DoubleBanana final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  std::string name() const override { return "double_banana"; }
  std::size_t dim() const override { return 2; }
  double potential(ConstVectorRef x) const override;
  /// Throws NumericalError where the log argument vanishes.
  void grad_potential(ConstVectorRef x, VectorRef out) const override;
};

class GaussianMixture final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means, std::vector<Eigen::MatrixXd> covariances,
                  std::string name = "gaussian_mixture");

  std::string name() const override { return name_; }
  std::size_t dim() const override { return dim_; }
  double potential(ConstVectorRef x) const override;
  void grad_potential(ConstVectorRef x, VectorRef out) const override;

  std::size_t n_components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covs_; }

 private:
  // Per-component log(w_i N(x | mu_i, Sigma_i)) into `out`, plus Sigma_i^-1 (x - mu_i) if `grads` given.
  void component_terms(ConstVectorRef x, Vector& out, std::vector<Vector>* grads) const;

  std::string name_;
  std::size_t dim_;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Eigen::MatrixXd> covs_;
  std::vector<Eigen::MatrixXd> precisions_;
  std::vector<double> log_norm_;  // log w_i - 0.5 (d ln 2pi + ln det Sigma_i)
};

/// Five equal-weight components on a circle of radius 1.5, component i rotated by (i-1)*72 degrees,
/// covariance R diag(1, 0.01) R^T.
std::shared_ptr<GaussianMixture> star_mixture();
/// Eight equal-weight components with covariance 0.2 I.
std::shared_ptr<GaussianMixture> eight_mixture();

/// N(mean, variance * I), normalizing constant included.
class IsotropicGaussian final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  IsotropicGaussian(Vector mean, double variance);
  static std::shared_ptr<IsotropicGaussian> standard(std::size_t dim);

  std::string name() const override { return "gaussian"; }
  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  double potential(ConstVectorRef x) const override;
  void grad_potential(ConstVectorRef x, VectorRef out) const override;
  std::optional<IsotropicQuadratic> quadratic_form() const override;

 private:
  Vector mean_;
  double variance_;
  double log_norm_;
};

/// V == 0.
class ZeroPotential final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  explicit ZeroPotential(std::size_t dim) : dim_(dim) {}
  std::string name() const override { return "zero"; }
  std::size_t dim() const override { return dim_; }
  double potential(ConstVectorRef) const override { return 0.0; }
  void grad_potential(ConstVectorRef, VectorRef out) const override { out.setZero(); }
  std::optional<IsotropicQuadratic> quadratic_form() const override {
    return IsotropicQuadratic{0.0, Vector::Zero(static_cast<Eigen::Index>(dim_))};
  }

 private:
  std::size_t dim_;
};

/// Wraps a target and adds a constant to its potential.
class ShiftedTarget final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  ShiftedTarget(TargetPtr base, double shift) : base_(std::move(base)), shift_(shift) {}
  std::string name() const override { return base_->name(); }
  std::size_t dim() const override { return base_->dim(); }
  double potential(ConstVectorRef x) const override { return base_->potential(x) + shift_; }
  void grad_potential(ConstVectorRef x, VectorRef out) const override { base_->grad_potential(x, out); }
  bool supports_minibatch() const override { return base_->supports_minibatch(); }
  std::size_t data_size() const override { return base_->data_size(); }
  double potential(ConstVectorRef x, Batch b) const override { return base_->potential(x, b) + shift_; }
  void grad_potential(ConstVectorRef x, Batch b, VectorRef out) const override { base_->grad_potential(x, b, out); }
  std::optional<IsotropicQuadratic> quadratic_form() const override { return base_->quadratic_form(); }

 private:
  TargetPtr base_;
  double shift_;
};

/// Bayesian logistic regression posterior over coefficients w with prior N(0, alpha I):
/// V(w) = (n/|B|) sum_{t in B} ln(1 + exp(-y_t w.c_t)) + |w|^2 / (2 alpha).
class LogisticRegressionTarget final : public TargetDensity {
 public:
  using TargetDensity::grad_potential;
  using TargetDensity::potential;
  LogisticRegressionTarget(RowMatrix features, Vector labels, double prior_alpha = 1.0);

  std::string name() const override { return "blr"; }
  std::size_t dim() const override { return static_cast<std::size_t>(features_.cols()); }
  double potential(ConstVectorRef w) const override;
  void grad_potential(ConstVectorRef w, VectorRef out) const override;

  bool supports_minibatch() const override { return true; }
  std::size_t data_size() const override { return static_cast<std::size_t>(features_.rows()); }
  double potential(ConstVectorRef w, Batch batch) const override;
  void grad_potential(ConstVectorRef w, Batch batch, VectorRef out) const override;

  const RowMatrix& features() const { return features_; }
  const Vector& labels() const { return labels_; }
  double prior_alpha() const { return alpha_; }

 private:
  void check_batch(Batch batch) const;

  RowMatrix features_;
  Vector labels_;
  double alpha_;
};

/// ln(1 + e^t) without overflow.
double softplus(double t);
/// 1 / (1 + e^-t) without overflow.
double sigmoid(double t);

}  // namespace parvi
