#include "parvi/targets.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace parvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

double banana_inner(double x1, double x2) {
  const double t = x2 - x1 * x1;
  return x1 * x1 + 100.0 * t * t;
}

void check_dim(ConstVectorRef x, std::size_t dim, const char* who) {
  if (static_cast<std::size_t>(x.size()) != dim) {
    throw ConfigError(std::string(who) + ": expected dimension " + std::to_string(dim) + ", got " +
                      std::to_string(x.size()));
  }
}

}  // namespace

double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------

double DoubleBanana::potential(ConstVectorRef x) const {
  check_dim(x, 2, "double_banana");
  const double u = banana_inner(x(0), x(1));
  if (!(u > 0.0)) throw NumericalError("double_banana: log argument vanishes at (0, 0)");
  const double l = std::log(u) - std::log(30.0);
  return 0.5 * x.squaredNorm() + 0.5 * l * l;
}

void DoubleBanana::grad_potential(ConstVectorRef x, VectorRef out) const {
  check_dim(x, 2, "double_banana");
  const double x1 = x(0);
  const double x2 = x(1);
  const double t = x2 - x1 * x1;
  const double u = x1 * x1 + 100.0 * t * t;
  if (!(u > 0.0)) throw NumericalError("double_banana: gradient singular at (0, 0)");
  const double scale = (std::log(u) - std::log(30.0)) / u;
  out(0) = x1 + scale * (2.0 * x1 - 400.0 * x1 * t);
  out(1) = x2 + scale * (200.0 * t);
}

// ---------------------------------------------------------------------------

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Eigen::MatrixXd> covariances, std::string name)
    : name_(std::move(name)), weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covs_.size()) {
    throw ConfigError("gaussian mixture: weights, means and covariances must be non-empty and equal length");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ConfigError("gaussian mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("gaussian mixture: weights must sum to 1");

  dim_ = static_cast<std::size_t>(means_.front().size());
  if (dim_ == 0) throw ConfigError("gaussian mixture: zero dimension");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const auto& cov = covs_[i];
    if (static_cast<std::size_t>(means_[i].size()) != dim_ || static_cast<std::size_t>(cov.rows()) != dim_ ||
        static_cast<std::size_t>(cov.cols()) != dim_) {
      throw ConfigError("gaussian mixture: component " + std::to_string(i) + " has inconsistent dimension");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
      throw ConfigError("gaussian mixture: covariance " + std::to_string(i) + " is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw ConfigError("gaussian mixture: covariance " + std::to_string(i) + " is not positive definite");
    }
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    precisions_.push_back(llt.solve(eye));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    log_norm_.push_back(std::log(weights_[i]) - 0.5 * (static_cast<double>(dim_) * kLog2Pi + logdet));
  }
}

void GaussianMixture::component_terms(ConstVectorRef x, Vector& out, std::vector<Vector>* grads) const {
  const std::size_t m = weights_.size();
  out.resize(static_cast<Eigen::Index>(m));
  if (grads) grads->resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vector diff = x - means_[i];
    Vector pd = precisions_[i] * diff;
    out(static_cast<Eigen::Index>(i)) = log_norm_[i] - 0.5 * diff.dot(pd);
    if (grads) (*grads)[i] = std::move(pd);
  }
}

double GaussianMixture::potential(ConstVectorRef x) const {
  check_dim(x, dim_, name_.c_str());
  Vector terms;
  component_terms(x, terms, nullptr);
  const double mx = terms.maxCoeff();
  return -(mx + std::log((terms.array() - mx).exp().sum()));
}

void GaussianMixture::grad_potential(ConstVectorRef x, VectorRef out) const {
  check_dim(x, dim_, name_.c_str());
  // Streaming log-sum-exp over flat per-thread scratch so the LMC inner loop does not allocate.
  const std::size_t d = dim_;
  thread_local std::vector<double> scratch;
  scratch.resize(2 * d);
  double* diff = scratch.data();
  double* pd = diff + d;
  const double* xp = x.data();
  double* o = out.data();
  double mx = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t k = 0; k < d; ++k) o[k] = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double* mu = means_[i].data();
    const double* prec = precisions_[i].data();  // symmetric, so storage order does not matter
    for (std::size_t k = 0; k < d; ++k) diff[k] = xp[k] - mu[k];
    double quad = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += prec[r * d + c] * diff[c];
      pd[r] = acc;
      quad += diff[r] * acc;
    }
    const double t = log_norm_[i] - 0.5 * quad;
    double w = 1.0;
    if (t > mx) {
      const double scale = std::exp(mx - t);
      total *= scale;
      for (std::size_t k = 0; k < d; ++k) o[k] *= scale;
      mx = t;
    } else {
      w = std::exp(t - mx);
    }
    total += w;
    for (std::size_t k = 0; k < d; ++k) o[k] += w * pd[k];
  }
  for (std::size_t k = 0; k < d; ++k) o[k] /= total;
}

std::shared_ptr<GaussianMixture> star_mixture() {
  const double angle = 2.0 * std::numbers::pi / 5.0;
  Eigen::Matrix2d rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Eigen::Matrix2d base = Eigen::Vector2d(1.0, 0.01).asDiagonal();
  std::vector<double> w(5, 0.2);
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  Eigen::Matrix2d power = Eigen::Matrix2d::Identity();
  for (int i = 0; i < 5; ++i) {
    means.emplace_back(power * Eigen::Vector2d(1.5, 0.0));
    Eigen::Matrix2d cov = power * base * power.transpose();
    cov = 0.5 * (cov + cov.transpose());
    covs.emplace_back(cov);
    power = rot * power;
  }
  return std::make_shared<GaussianMixture>(std::move(w), std::move(means), std::move(covs), "star");
}

std::shared_ptr<GaussianMixture> eight_mixture() {
  const double pts[8][2] = {{0, 4}, {2.8, 2.8}, {4, 0}, {-2.8, 2.8}, {-4, 0}, {-2.8, -2.8}, {0, -4}, {2.8, -2.8}};
  std::vector<double> w(8, 0.125);
  std::vector<Vector> means;
  std::vector<Eigen::MatrixXd> covs;
  for (const auto& p : pts) {
    means.emplace_back(Eigen::Vector2d(p[0], p[1]));
    covs.emplace_back(0.2 * Eigen::MatrixXd::Identity(2, 2));
  }
  return std::make_shared<GaussianMixture>(std::move(w), std::move(means), std::move(covs), "eight");
}

// ---------------------------------------------------------------------------

IsotropicGaussian::IsotropicGaussian(Vector mean, double variance) : mean_(std::move(mean)), variance_(variance) {
  if (mean_.size() == 0) throw ConfigError("gaussian target: zero dimension");
  if (!(variance_ > 0.0)) throw ConfigError("gaussian target: variance must be positive");
  log_norm_ = 0.5 * static_cast<double>(mean_.size()) * (kLog2Pi + std::log(variance_));
}

std::shared_ptr<IsotropicGaussian> IsotropicGaussian::standard(std::size_t dim) {
  return std::make_shared<IsotropicGaussian>(Vector::Zero(static_cast<Eigen::Index>(dim)), 1.0);
}

double IsotropicGaussian::potential(ConstVectorRef x) const {
  check_dim(x, dim(), "gaussian");
  return 0.5 * (x - mean_).squaredNorm() / variance_ + log_norm_;
}

void IsotropicGaussian::grad_potential(ConstVectorRef x, VectorRef out) const {
  check_dim(x, dim(), "gaussian");
  out = (x - mean_) / variance_;
}

std::optional<IsotropicQuadratic> IsotropicGaussian::quadratic_form() const {
  return IsotropicQuadratic{1.0 / variance_, mean_};
}

// ---------------------------------------------------------------------------

LogisticRegressionTarget::LogisticRegressionTarget(RowMatrix features, Vector labels, double prior_alpha)
    : features_(std::move(features)), labels_(std::move(labels)), alpha_(prior_alpha) {
  if (features_.rows() == 0 || features_.cols() == 0) throw ConfigError("blr: empty feature matrix");
  if (labels_.size() != features_.rows()) throw ConfigError("blr: labels and features disagree in length");
  if (!(alpha_ > 0.0)) throw ConfigError("blr: prior alpha must be positive");
  for (Eigen::Index t = 0; t < labels_.size(); ++t) {
    if (labels_(t) != 1.0 && labels_(t) != -1.0) {
      throw ConfigError("blr: label at row " + std::to_string(t) + " is not in {-1, +1}");
    }
  }
}

void LogisticRegressionTarget::check_batch(Batch batch) const {
  if (batch.empty()) throw ConfigError("blr: empty batch");
  const auto n = static_cast<std::size_t>(features_.rows());
  for (std::size_t idx : batch) {
    if (idx >= n) throw ConfigError("blr: batch index " + std::to_string(idx) + " out of range");
  }
}

double LogisticRegressionTarget::potential(ConstVectorRef w) const {
  check_dim(w, dim(), "blr");
  const Vector margins = labels_.cwiseProduct(features_ * w);
  double loss = 0.0;
  for (Eigen::Index t = 0; t < margins.size(); ++t) loss += softplus(-margins(t));
  return loss + 0.5 * w.squaredNorm() / alpha_;
}

void LogisticRegressionTarget::grad_potential(ConstVectorRef w, VectorRef out) const {
  check_dim(w, dim(), "blr");
  const Vector margins = labels_.cwiseProduct(features_ * w);
  Vector coef(margins.size());
  for (Eigen::Index t = 0; t < margins.size(); ++t) coef(t) = -labels_(t) * sigmoid(-margins(t));
  out = features_.transpose() * coef + w / alpha_;
}

double LogisticRegressionTarget::potential(ConstVectorRef w, Batch batch) const {
  check_dim(w, dim(), "blr");
  check_batch(batch);
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const auto t = static_cast<Eigen::Index>(idx);
    loss += softplus(-labels_(t) * features_.row(t).dot(w));
  }
  const double scale = static_cast<double>(features_.rows()) / static_cast<double>(batch.size());
  return scale * loss + 0.5 * w.squaredNorm() / alpha_;
}

void LogisticRegressionTarget::grad_potential(ConstVectorRef w, Batch batch, VectorRef out) const {
  check_dim(w, dim(), "blr");
  check_batch(batch);
  out.setZero();
  for (std::size_t idx : batch) {
    const auto t = static_cast<Eigen::Index>(idx);
    const double m = labels_(t) * features_.row(t).dot(w);
    out -= (labels_(t) * sigmoid(-m)) * features_.row(t).transpose();
  }
  out *= static_cast<double>(features_.rows()) / static_cast<double>(batch.size());
  out += w / alpha_;
}

}  // namespace parvi
