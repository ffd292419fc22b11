#pragma once

// Hand-rolled numerical oracles for the test suite, deliberately independent
// of the library's Eigen-based linear algebra: Gaussian elimination with
// partial pivoting, cyclic Jacobi eigenvalues, central finite differences,
// and a Monte-Carlo expected-improvement estimator.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boil/gp.hpp>
#include <boil/kernel.hpp>
#include <boil/rng.hpp>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix gram(const std::vector<boil::JointInput>& zs, const boil::KernelParams& p,
                   bool add_noise) {
  const size_t n = zs.size();
  Matrix a(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) a[i][j] = boil::kernel(zs[i], zs[j], p);
  if (add_noise)
    for (size_t i = 0; i < n; ++i) a[i][i] += p.noise_var;
  return a;
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
  const size_t n = a.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw std::runtime_error("oracle: singular matrix");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (size_t r = n; r-- > 0;) {
    double s = b[r];
    for (size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// log|A| for symmetric positive definite A, via elimination pivots.
inline double log_det_spd(Matrix a) {
  const size_t n = a.size();
  double ld = 0.0;
  for (size_t col = 0; col < n; ++col) {
    if (a[col][col] <= 0.0) throw std::runtime_error("oracle: matrix not positive definite");
    ld += std::log(a[col][col]);
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return ld;
}

// Cyclic Jacobi for symmetric matrices; returns eigenvalues sorted ascending.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (size_t p = 0; p < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double sign = theta >= 0.0 ? 1.0 : -1.0;
        const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct GpPrediction {
  double mean = 0.0;
  double var = 0.0;
};

// Direct dense-solve GP posterior in standardized units.
inline GpPrediction gp_posterior(const std::vector<boil::JointInput>& zs,
                                 const std::vector<double>& y_std,
                                 const boil::KernelParams& p, const boil::JointInput& z) {
  const size_t n = zs.size();
  Matrix c = gram(zs, p, true);
  std::vector<double> ks(n);
  for (size_t i = 0; i < n; ++i) ks[i] = boil::kernel(zs[i], z, p);
  const std::vector<double> w = solve_dense(c, y_std);
  const std::vector<double> v = solve_dense(gram(zs, p, true), ks);
  double mean = 0.0, quad = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mean += ks[i] * w[i];
    quad += ks[i] * v[i];
  }
  return {mean, boil::kernel(z, z, p) - quad};
}

// Direct-formula log marginal likelihood (standard sign) plus the prior.
inline double lml(const std::vector<boil::JointInput>& zs, const std::vector<double>& y_std,
                  const boil::KernelParams& p, const boil::HyperPrior& prior) {
  const size_t n = zs.size();
  Matrix c = gram(zs, p, true);
  const std::vector<double> w = solve_dense(c, y_std);
  double quad = 0.0;
  for (size_t i = 0; i < n; ++i) quad += y_std[i] * w[i];
  const double ld = log_det_spd(gram(zs, p, true));
  double out = -0.5 * quad - 0.5 * ld - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  out += prior.lengthscale_x.log_density(p.lengthscale_x);
  out += prior.lengthscale_t.log_density(p.lengthscale_t);
  out += prior.noise_var.log_density(p.noise_var);
  return out;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// E[max(f - mu_max, 0)], f ~ Normal(mu, sigma^2), by plain Monte Carlo.
inline McEstimate mc_expected_improvement(double mu, double sigma, double mu_max,
                                          std::int64_t draws, std::uint64_t seed) {
  boil::CounterRng rng{boil::mix_key(seed, 0xec0eULL)};
  double sum = 0.0, sumsq = 0.0;
  for (std::int64_t i = 0; i < draws; ++i) {
    const double f = mu + sigma * rng.normal(0, static_cast<std::uint64_t>(i));
    const double imp = f > mu_max ? f - mu_max : 0.0;
    sum += imp;
    sumsq += imp * imp;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, sumsq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

// Uniform test-instance generator on top of the library's counter RNG.
struct TestRng {
  boil::CounterRng rng;
  std::uint64_t counter = 0;
  explicit TestRng(std::uint64_t seed) : rng{boil::mix_key(seed, 0x7e57ULL)} {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * rng.uniform(9, counter++);
  }
  double normal() { return rng.normal(10, counter++); }
  int integer(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform(0.0, 1.0) * (hi - lo + 1)) % (hi - lo + 1);
  }
  boil::JointInput joint(int d) {
    boil::JointInput z;
    z.x.resize(d);
    for (int i = 0; i < d; ++i) z.x[i] = uniform();
    z.t = uniform();
    return z;
  }
};

}  // namespace oracle
