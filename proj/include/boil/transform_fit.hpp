#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "boil/curve.hpp"
#include "boil/gp.hpp"

// Fitting the credit-curve parameters (m0, g0) against the GP evidence.
// Each GP row i corresponds to a curve prefix curves[i]; changing (m0, g0)
// recompresses every row and restandardizes the outputs, so the likelihood
// ranks transforms by the shape of the compressed values, never their
// scale. Without the restandardization, shrinking every output toward the
// mean would raise the likelihood unconditionally and the fit would drift
// into saturated transforms that compress all curves to the same value.

namespace boil {

namespace detail {

// Rows whose curve is empty are frozen (sentinel scores for failed
// evaluations); they keep their current raw value and carry no gradient.
inline Eigen::VectorXd recompress_all(const std::vector<LearningCurve>& curves,
                                      const LogisticTransform& tr,
                                      const Eigen::VectorXd& frozen_raw) {
  Eigen::VectorXd y(curves.size());
  for (size_t i = 0; i < curves.size(); ++i)
    y[i] = curves[i].scores.empty()
               ? frozen_raw[static_cast<Eigen::Index>(i)]
               : compress(curves[i], Preference::sigmoid(tr));
  return y;
}

}  // namespace detail

// Marginal likelihood (kernel params fixed) as a function of the transform,
// evaluated on restandardized outputs. A transform that compresses every
// curve to one identical value destroys the evidence and scores -inf.
// Exposed so gradients can be checked directly.
inline double transform_lml(const std::vector<LearningCurve>& curves,
                            const GpModel& model, const LogisticTransform& tr,
                            const HyperPrior& prior) {
  if (static_cast<int>(curves.size()) != model.size())
    throw InvalidInput("transform_lml: one curve prefix per GP row required");
  Eigen::VectorXd raw =
      detail::recompress_all(curves, tr, model.dataset().raw_outputs);
  const int n = static_cast<int>(raw.size());
  if (n >= 2) {
    double var = (raw.array() - raw.mean()).square().sum() / n;
    if (var <= 1e-300) return -std::numeric_limits<double>::infinity();
  }
  GpModel probe = model;
  probe.set_raw_outputs(std::move(raw));
  probe.restandardize();
  return probe.log_marginal_likelihood(prior);
}

// (dL/dm0, dL/dg0). Chain rule: dL/dy_std = -alpha, then through the
// standardization (whose mean and stddev both move with the transform) and
// the compression derivatives.
inline std::pair<double, double> transform_lml_grad(
    const std::vector<LearningCurve>& curves, const GpModel& model,
    const LogisticTransform& tr, const HyperPrior& prior) {
  (void)prior;  // the hyperparameter prior does not depend on (m0, g0)
  if (static_cast<int>(curves.size()) != model.size())
    throw InvalidInput("transform_lml_grad: one curve prefix per GP row required");
  const int n = model.size();
  GpModel probe = model;
  probe.set_raw_outputs(
      detail::recompress_all(curves, tr, model.dataset().raw_outputs));
  probe.restandardize();
  Eigen::VectorXd dm_raw = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd dg_raw = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (curves[i].scores.empty()) continue;  // frozen rows carry no gradient
    auto [dym, dyg] = compress_grad(curves[i], tr);
    dm_raw[i] = dym;
    dg_raw[i] = dyg;
  }
  const Eigen::VectorXd& y_std = probe.dataset().outputs;
  const Eigen::VectorXd& alpha = probe.alpha();
  const double sd = probe.dataset().standardization.stddev;
  const double quad = y_std.dot(alpha);
  const double alpha_sum = alpha.sum();
  auto chain = [&](const Eigen::VectorXd& d) {
    double dmean = d.mean();
    double dsd = (y_std.dot(d) - dmean * y_std.sum()) / n;
    return -(alpha.dot(d) - dmean * alpha_sum - dsd * quad) / sd;
  };
  return {chain(dm_raw), chain(dg_raw)};
}

// Maximizes L over (m0, g0) jointly with the kernel hyperparameters,
// alternating projected gradient ascent on the transform (m0 clamped to
// [t_min, t_max], g0 through log space) with kernel refits. On success the
// model holds outputs recompressed under the returned transform; on any
// numerical failure the inputs are returned unchanged.
inline LogisticTransform fit_transform(const std::vector<LearningCurve>& curves,
                                       GpModel& model, const LogisticTransform& start,
                                       double t_min, double t_max,
                                       const HyperPrior& prior) {
  if (static_cast<int>(curves.size()) != model.size())
    throw InvalidInput("fit_transform: one curve prefix per GP row required");
  if (model.size() == 0) return start;
  GpModel saved = model;
  try {
    LogisticTransform tr = start;
    tr.m0 = std::clamp(tr.m0, t_min, t_max);
    tr.g0 = std::clamp(tr.g0, 1e-5, 1e2);

    // A saturated starting transform zeroes the gradient along with the
    // evidence, so ascent cannot leave it; restart from the canonical
    // initializer when that gives the likelihood something to work with.
    if (!std::isfinite(transform_lml(curves, model, tr, prior))) {
      LogisticTransform fresh{0.5 * (t_min + t_max), 10.0 / (t_max - t_min)};
      if (std::isfinite(transform_lml(curves, model, fresh, prior))) tr = fresh;
    }

    auto ascend = [&](LogisticTransform cur) {
      double best = transform_lml(curves, model, cur, prior);
      for (int iter = 0; iter < 100; ++iter) {
        auto [dm, dg] = transform_lml_grad(curves, model, cur, prior);
        // steepest ascent in (m0, ln g0)
        Eigen::Vector2d g(dm, dg * cur.g0);
        if (!g.allFinite() || g.norm() < 1e-14) break;
        double step = 1.0;
        bool moved = false;
        while (step > 1e-12) {
          LogisticTransform cand = cur;
          cand.m0 = std::clamp(cur.m0 + step * g[0], t_min, t_max);
          cand.g0 = std::clamp(std::exp(std::log(cur.g0) + step * g[1]), 1e-5, 1e2);
          double val;
          try {
            val = transform_lml(curves, model, cand, prior);
          } catch (const NumericalError&) {
            val = -std::numeric_limits<double>::infinity();
          }
          if (std::isfinite(val) && val > best) {
            bool converged = val - best < 1e-9;
            cur = cand;
            best = val;
            moved = !converged;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
      return cur;
    };

    for (int round = 0; round < 2; ++round) {
      tr = ascend(tr);
      model.set_raw_outputs(
          detail::recompress_all(curves, tr, model.dataset().raw_outputs));
      model.restandardize();
      model.set_params(fit_hyperparameters(model, prior, model.params()));
    }
    return tr;
  } catch (const std::exception&) {
    model = std::move(saved);
    return start;
  }
}

}  // namespace boil
