#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "boil/errors.hpp"
#include "boil/kernel.hpp"
#include "boil/search_space.hpp"

namespace boil {

struct Standardization {
  double mean = 0.0;
  double stddev = 1.0;
  double to_std(double raw) const { return (raw - mean) / stddev; }
  double to_raw(double s) const { return mean + stddev * s; }
};

inline Standardization compute_standardization(const Eigen::VectorXd& raw) {
  Standardization s;
  const int n = static_cast<int>(raw.size());
  if (n == 0) return s;
  s.mean = raw.mean();
  double var = (raw.array() - s.mean).square().sum() / n;
  s.stddev = var > 1e-300 ? std::sqrt(var) : 1.0;
  return s;
}

// Observations in normalized input space; outputs kept both raw and
// standardized. Standardization is refreshed explicitly (at refit events),
// not on every append, so cached factorizations stay coherent in between.
struct GpDataset {
  std::vector<JointInput> inputs;
  Eigen::VectorXd raw_outputs;
  Eigen::VectorXd outputs;  // standardized
  Standardization standardization;

  static GpDataset from_raw(std::vector<JointInput> zs, Eigen::VectorXd raw) {
    if (static_cast<int>(zs.size()) != raw.size())
      throw InvalidInput("dataset: inputs/outputs length mismatch");
    GpDataset d;
    d.inputs = std::move(zs);
    d.raw_outputs = std::move(raw);
    d.standardization = compute_standardization(d.raw_outputs);
    d.outputs = (d.raw_outputs.array() - d.standardization.mean) / d.standardization.stddev;
    return d;
  }

  int size() const { return static_cast<int>(inputs.size()); }

  void restandardize() {
    standardization = compute_standardization(raw_outputs);
    outputs = (raw_outputs.array() - standardization.mean) / standardization.stddev;
  }

  void append_raw(JointInput z, double raw) {
    inputs.push_back(std::move(z));
    raw_outputs.conservativeResize(raw_outputs.size() + 1);
    raw_outputs[raw_outputs.size() - 1] = raw;
    outputs.conservativeResize(outputs.size() + 1);
    outputs[outputs.size() - 1] = standardization.to_std(raw);
  }
};

struct LogNormalPrior {
  double log_mode = std::log(0.3);
  double log_scale = 1.0;
  double lo = 1e-2;  // hard box for the MAP search, in parameter units
  double hi = 1e1;

  double mu() const { return log_mode + log_scale * log_scale; }

  double log_density(double v) const {
    double d = std::log(v) - mu();
    return -std::log(v) - std::log(log_scale) - 0.9189385332046727 -
           d * d / (2.0 * log_scale * log_scale);
  }
  double dlog_density_dlogv(double v) const {
    return -1.0 - (std::log(v) - mu()) / (log_scale * log_scale);
  }
};

struct HyperPrior {
  LogNormalPrior lengthscale_x;
  LogNormalPrior lengthscale_t;
  LogNormalPrior noise_var;

  static HyperPrior defaults() {
    HyperPrior p;
    p.lengthscale_x = {std::log(0.3), 1.0, 1e-2, 1e1};
    p.lengthscale_t = {std::log(0.3), 1.0, 1e-2, 1e1};
    // the lower box edge doubles as a stability floor for the noise
    p.noise_var = {std::log(0.05), 1.0, 1e-6, 1.0};
    return p;
  }

  double log_density(const KernelParams& k) const {
    return lengthscale_x.log_density(k.lengthscale_x) +
           lengthscale_t.log_density(k.lengthscale_t) +
           noise_var.log_density(k.noise_var);
  }
};

struct Posterior {
  double mean = 0.0;      // standardized units
  double variance = 0.0;  // standardized units
};

namespace detail {

// Cholesky of K + (noise + jitter) I with escalating jitter.
// Returns the jitter that worked.
inline double robust_llt(const Eigen::MatrixXd& gram, double noise_var,
                         Eigen::MatrixXd& lower) {
  const int n = static_cast<int>(gram.rows());
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd c = gram;
    c.diagonal().array() += noise_var + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      lower = llt.matrixL();
      bool finite = lower.diagonal().minCoeff() > 0.0 && lower.allFinite();
      if (finite) return jitter;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4) break;
  }
  throw NumericalError("cholesky failed for n=" + std::to_string(n) +
                       " even with jitter 1e-4");
}

}  // namespace detail

// GP regressor over the joint space. Immutable for queries; the mutators
// rebuild caches so a model handed to concurrent readers stays const.
class GpModel {
 public:
  GpModel(GpDataset data, KernelParams params)
      : data_(std::move(data)), params_(params) {
    params_.validate();
    rebuild();
  }

  const GpDataset& dataset() const { return data_; }
  const KernelParams& params() const { return params_; }
  int size() const { return data_.size(); }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& chol_lower() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  Posterior posterior(const JointInput& z) const {
    double kss = kernel(z, z, params_);
    if (data_.size() == 0) return {0.0, kss};
    Eigen::VectorXd ks(data_.size());
    for (int i = 0; i < data_.size(); ++i) ks[i] = kernel(z, data_.inputs[i], params_);
    double mean = ks.dot(alpha_);
    Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
    double var = kss - v.squaredNorm();
    if (var < 0.0) {
      if (var < -1e-10)
        throw NumericalError("negative posterior variance: " + std::to_string(var));
      var = 0.0;
    }
    return {mean, var};
  }

  double posterior_mean_raw(const JointInput& z) const {
    return data_.standardization.to_raw(posterior(z).mean);
  }

  double log_marginal_likelihood(const HyperPrior& prior) const {
    if (data_.size() == 0) throw InvalidInput("lml needs a non-empty dataset");
    const int n = data_.size();
    double quad = data_.outputs.dot(alpha_);
    double logdet = 2.0 * chol_.diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * 3.141592653589793) +
           prior.log_density(params_);
  }

  // d/d(ln lengthscale_x, ln lengthscale_t, ln noise_var), prior included.
  Eigen::Vector3d grad_lml(const HyperPrior& prior) const {
    if (data_.size() == 0) throw InvalidInput("grad_lml needs a non-empty dataset");
    const int n = data_.size();
    Eigen::MatrixXd cinv = Eigen::MatrixXd::Identity(n, n);
    chol_.triangularView<Eigen::Lower>().solveInPlace(cinv);
    chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(cinv);

    const double sx2 = params_.lengthscale_x * params_.lengthscale_x;
    const double st2 = params_.lengthscale_t * params_.lengthscale_t;
    double gx = 0.0, gt = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double w = alpha_[i] * alpha_[j] - cinv(i, j);
        double dx2 = (data_.inputs[i].x - data_.inputs[j].x).squaredNorm();
        gx += w * gram_(i, j) * dx2 / sx2;
        if (params_.kind == KernelKind::SeProduct) {
          double dt = data_.inputs[i].t - data_.inputs[j].t;
          gt += w * gram_(i, j) * dt * dt / st2;
        }
      }
    }
    double gn = params_.noise_var * (alpha_.squaredNorm() - cinv.trace());
    Eigen::Vector3d g(0.5 * gx, 0.5 * gt, 0.5 * gn);
    g[0] += prior.lengthscale_x.dlog_density_dlogv(params_.lengthscale_x);
    g[1] += prior.lengthscale_t.dlog_density_dlogv(params_.lengthscale_t);
    g[2] += prior.noise_var.dlog_density_dlogv(params_.noise_var);
    return g;
  }

  void set_params(KernelParams p) {
    p.validate();
    params_ = p;
    rebuild();
  }

  // Appends under the current (frozen) standardization. Tries an O(n^2)
  // incremental Cholesky extension; falls back to a full rebuild.
  void add_observation_raw(JointInput z, double raw) {
    data_.append_raw(std::move(z), raw);
    const int n = data_.size();
    gram_.conservativeResize(n, n);
    for (int i = 0; i < n; ++i) {
      double v = kernel(data_.inputs[n - 1], data_.inputs[i], params_);
      gram_(n - 1, i) = v;
      gram_(i, n - 1) = v;
    }
    if (n == 1 || !try_extend_chol()) {
      rebuild_factor();
    } else {
      refresh_alpha();
    }
  }

  void set_raw_outputs(Eigen::VectorXd raw) {
    if (raw.size() != data_.raw_outputs.size())
      throw InvalidInput("set_raw_outputs: size mismatch");
    data_.raw_outputs = std::move(raw);
    data_.outputs = (data_.raw_outputs.array() - data_.standardization.mean) /
                    data_.standardization.stddev;
    refresh_alpha();
  }

  void restandardize() {
    data_.restandardize();
    refresh_alpha();
  }

 private:
  void rebuild() {
    gram_ = gram_matrix(data_.inputs, params_);
    rebuild_factor();
  }

  void rebuild_factor() {
    if (data_.size() == 0) {
      chol_.resize(0, 0);
      alpha_.resize(0);
      jitter_ = 0.0;
      return;
    }
    jitter_ = detail::robust_llt(gram_, params_.noise_var, chol_);
    refresh_alpha();
  }

  bool try_extend_chol() {
    const int n = data_.size();
    Eigen::VectorXd k = gram_.col(n - 1).head(n - 1);
    Eigen::VectorXd l = chol_.topLeftCorner(n - 1, n - 1)
                            .triangularView<Eigen::Lower>()
                            .solve(k);
    double pivot2 = gram_(n - 1, n - 1) + params_.noise_var + jitter_ - l.squaredNorm();
    if (!(pivot2 > 1e-12)) return false;
    chol_.conservativeResize(n, n);
    chol_.row(n - 1).head(n - 1) = l.transpose();
    chol_.col(n - 1).head(n - 1).setZero();
    chol_(n - 1, n - 1) = std::sqrt(pivot2);
    return true;
  }

  void refresh_alpha() {
    if (data_.size() == 0) {
      alpha_.resize(0);
      return;
    }
    alpha_ = chol_.triangularView<Eigen::Lower>().solve(data_.outputs);
    chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
  }

  GpDataset data_;
  KernelParams params_;
  Eigen::MatrixXd gram_;  // noise-free kernel matrix
  Eigen::MatrixXd chol_;  // lower factor of gram + (noise + jitter) I
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

// Predicted cost in raw cost units (the cost GP standardizes internally).
// An empty model falls back to the standardization mean (0 for no data).
inline double posterior_cost_mean(const GpModel& cost_model, const JointInput& z) {
  return cost_model.posterior_mean_raw(z);
}

// ln(lambda_max / lambda_min) of K + noise_var I via symmetric
// eigendecomposition; +inf when the matrix is numerically singular.
inline double log_condition_number(const std::vector<JointInput>& inputs,
                                   const KernelParams& params) {
  if (inputs.empty()) throw InvalidInput("log_condition_number: empty input set");
  Eigen::MatrixXd c = gram_matrix(inputs, params);
  c.diagonal().array() += params.noise_var;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed in log_condition_number");
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().maxCoeff();
  if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(lmax / lmin);
}

namespace detail {

struct FitWorkspace {
  Eigen::MatrixXd dx2;   // pairwise squared x distances
  Eigen::MatrixXd dt2;   // pairwise squared t distances (SE kernel)
  Eigen::MatrixXd ftf;   // freeze-thaw time factor (fixed alpha/beta)
  const GpDataset* data = nullptr;
  KernelKind kind = KernelKind::SeProduct;
  double ft_alpha = 1.0, ft_beta = 1.0;

  explicit FitWorkspace(const GpDataset& d, const KernelParams& p) : data(&d) {
    kind = p.kind;
    ft_alpha = p.ft_alpha;
    ft_beta = p.ft_beta;
    const int n = d.size();
    dx2.resize(n, n);
    dt2.resize(n, n);
    if (kind == KernelKind::FreezeThawTime) ftf.resize(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double vx = (d.inputs[i].x - d.inputs[j].x).squaredNorm();
        double dt = d.inputs[i].t - d.inputs[j].t;
        dx2(i, j) = dx2(j, i) = vx;
        dt2(i, j) = dt2(j, i) = dt * dt;
        if (kind == KernelKind::FreezeThawTime) {
          double f = std::pow(ft_beta / (d.inputs[i].t + d.inputs[j].t + ft_beta), ft_alpha);
          ftf(i, j) = ftf(j, i) = f;
        }
      }
    }
  }

  Eigen::MatrixXd gram(double lsx, double lst) const {
    Eigen::MatrixXd k = (-dx2.array() / (2.0 * lsx * lsx)).exp();
    if (kind == KernelKind::SeProduct)
      k.array() *= (-dt2.array() / (2.0 * lst * lst)).exp();
    else
      k.array() *= ftf.array();
    return k;
  }

  // objective value only (for line search)
  double lml(const Eigen::Vector3d& logp, const HyperPrior& prior) const {
    const int n = data->size();
    KernelParams kp;
    kp.lengthscale_x = std::exp(logp[0]);
    kp.lengthscale_t = std::exp(logp[1]);
    kp.noise_var = std::exp(logp[2]);
    kp.kind = kind;
    kp.ft_alpha = ft_alpha;
    kp.ft_beta = ft_beta;
    Eigen::MatrixXd g = gram(kp.lengthscale_x, kp.lengthscale_t);
    Eigen::MatrixXd lower;
    robust_llt(g, kp.noise_var, lower);
    Eigen::VectorXd a = lower.triangularView<Eigen::Lower>().solve(data->outputs);
    double quad = a.squaredNorm();
    double logdet = 2.0 * lower.diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * 3.141592653589793) +
           prior.log_density(kp);
  }
};

}  // namespace detail

// MAP fit over (lengthscale_x, lengthscale_t, noise_var) in log space:
// gradient ascent with backtracking line search, warm started from `start`.
// Any numerical failure falls back to `start`, so the fit never loses ground.
inline KernelParams fit_hyperparameters(const GpModel& model, const HyperPrior& prior,
                                        const KernelParams& start) {
  if (model.size() == 0) return start;
  try {
    GpDataset data = model.dataset();
    detail::FitWorkspace ws(data, start);

    auto clamp_box = [&](Eigen::Vector3d lp) {
      lp[0] = std::clamp(lp[0], std::log(prior.lengthscale_x.lo), std::log(prior.lengthscale_x.hi));
      lp[1] = std::clamp(lp[1], std::log(prior.lengthscale_t.lo), std::log(prior.lengthscale_t.hi));
      lp[2] = std::clamp(lp[2], std::log(prior.noise_var.lo), std::log(prior.noise_var.hi));
      return lp;
    };

    Eigen::Vector3d lp = clamp_box({std::log(start.lengthscale_x),
                                    std::log(start.lengthscale_t),
                                    std::log(start.noise_var)});
    double best = ws.lml(lp, prior);

    auto params_at = [&](const Eigen::Vector3d& p) {
      KernelParams kp = start;
      kp.lengthscale_x = std::exp(p[0]);
      kp.lengthscale_t = std::exp(p[1]);
      kp.noise_var = std::exp(p[2]);
      return kp;
    };

    for (int iter = 0; iter < 200; ++iter) {
      GpModel probe(data, params_at(lp));
      Eigen::Vector3d g = probe.grad_lml(prior);
      if (!g.allFinite()) break;
      double step = 0.5;
      bool moved = false;
      while (step > 1e-12) {
        Eigen::Vector3d cand = clamp_box(lp + step * g);
        double val;
        try {
          val = ws.lml(cand, prior);
        } catch (const NumericalError&) {
          val = -std::numeric_limits<double>::infinity();
        }
        if (std::isfinite(val) && val > best) {
          if (val - best < 1e-8) {
            lp = cand;
            best = val;
            moved = false;  // converged
            break;
          }
          lp = cand;
          best = val;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    return params_at(lp);
  } catch (const std::exception&) {
    return start;
  }
}

}  // namespace boil
