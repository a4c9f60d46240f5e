#pragma once

#include "parvi/core.hpp"

#include <cmath>

namespace parvi {

/// Normalized Gaussian smoothing kernel with variance h:
/// K_h(u) = (2 pi h)^(-d/2) exp(-|u|^2 / (2h)).
class GaussianKernel {
 public:
  GaussianKernel(double bandwidth_h, std::size_t dim);

  double bandwidth() const { return h_; }
  std::size_t dim() const { return dim_; }
  double norm_const() const { return norm_const_; }

  double eval(ConstVectorRef diff) const { return eval_sq(diff.squaredNorm()); }
  double eval_sq(double sq_dist) const { return norm_const_ * std::exp(-sq_dist / (2.0 * h_)); }

  /// grad K_h(u) = -(u / h) K_h(u).
  Vector grad(ConstVectorRef diff) const;

 private:
  double h_;
  std::size_t dim_;
  double norm_const_;
};

/// k(x, y) = (scale * x.y + offset)^degree.
struct PolynomialKernel {
  double scale = 1.0 / 3.0;
  double offset = 1.0;
  int degree = 3;

  double eval(ConstVectorRef x, ConstVectorRef y) const;
  double eval_dot(double dot) const;
};

}  // namespace parvi
