#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "boil/errors.hpp"
#include "boil/search_space.hpp"

namespace boil {

enum class KernelKind { SeProduct, FreezeThawTime };

struct KernelParams {
  double lengthscale_x = 0.3;
  double lengthscale_t = 0.3;
  double noise_var = 0.05;
  KernelKind kind = KernelKind::SeProduct;
  // only used by the freeze-thaw time factor
  double ft_alpha = 1.0;
  double ft_beta = 1.0;

  void validate() const {
    if (!(lengthscale_x > 0.0) || !(lengthscale_t > 0.0))
      throw InvalidInput("kernel lengthscales must be positive");
    if (!(noise_var > 0.0)) throw InvalidInput("noise_var must be positive");
    if (kind == KernelKind::FreezeThawTime && (!(ft_alpha > 0.0) || !(ft_beta > 0.0)))
      throw InvalidInput("freeze-thaw alpha/beta must be positive");
  }
};

inline double kernel(const JointInput& a, const JointInput& b, const KernelParams& p) {
  double dx2 = (a.x - b.x).squaredNorm();
  double kx = std::exp(-dx2 / (2.0 * p.lengthscale_x * p.lengthscale_x));
  if (p.kind == KernelKind::SeProduct) {
    double dt = a.t - b.t;
    return kx * std::exp(-dt * dt / (2.0 * p.lengthscale_t * p.lengthscale_t));
  }
  // freeze-thaw time factor: beta^alpha / (t + t' + beta)^alpha
  double f = std::pow(p.ft_beta / (a.t + b.t + p.ft_beta), p.ft_alpha);
  return kx * f;
}

inline Eigen::MatrixXd gram_matrix(const std::vector<JointInput>& zs, const KernelParams& p) {
  p.validate();
  const int n = static_cast<int>(zs.size());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = kernel(zs[i], zs[j], p);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace boil
