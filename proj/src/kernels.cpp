#include "parvi/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace parvi {

GaussianKernel::GaussianKernel(double bandwidth_h, std::size_t dim) : h_(bandwidth_h), dim_(dim) {
  if (!(h_ > 0.0) || !std::isfinite(h_)) throw ConfigError("kernel bandwidth must be positive");
  if (dim_ == 0) throw ConfigError("kernel dimension must be >= 1");
  norm_const_ = std::pow(2.0 * std::numbers::pi * h_, -0.5 * static_cast<double>(dim_));
}

Vector GaussianKernel::grad(ConstVectorRef diff) const { return diff * (-eval(diff) / h_); }

double PolynomialKernel::eval_dot(double dot) const {
  const double base = scale * dot + offset;
  double out = 1.0;
  for (int i = 0; i < degree; ++i) out *= base;
  return out;
}

double PolynomialKernel::eval(ConstVectorRef x, ConstVectorRef y) const {
  if (x.size() != y.size()) {
    throw ConfigError("polynomial kernel: dimension mismatch " + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()));
  }
  return eval_dot(x.dot(y));
}

}  // namespace parvi
