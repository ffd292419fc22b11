#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "boil/curve.hpp"
#include "boil/gp.hpp"
#include "boil/search_space.hpp"

namespace boil {

struct AugmentedPoint {
  JointInput z;  // normalized
  int t_raw = 0;
  double y_raw = 0.0;
  double cost = 0.0;
};

struct AugmentedBatch {
  std::vector<AugmentedPoint> points;
  std::int64_t source_eval_id = -1;
};

struct AugmentOptions {
  int max_points = 15;
  double delta = 20.0;
  // two inputs count as "the same x" for the duplicate guard below this
  // normalized distance
  double same_x_tol = 0.02;
};

namespace detail {

// Grows a lower Cholesky factor of K + sigma2 I one row at a time.
struct IncrementalChol {
  Eigen::MatrixXd lower;
  int n = 0;

  bool extend(const Eigen::VectorXd& k_new, double diag_plus_noise) {
    Eigen::VectorXd l(n);
    if (n > 0)
      l = lower.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(k_new);
    double pivot2 = diag_plus_noise - l.squaredNorm();
    if (!(pivot2 > 1e-14)) return false;
    lower.conservativeResize(n + 1, n + 1);
    if (n > 0) {
      lower.row(n).head(n) = l.transpose();
      lower.col(n).head(n).setZero();
    }
    lower(n, n) = std::sqrt(pivot2);
    ++n;
    return true;
  }
};

}  // namespace detail

// Argmax of the 1-d posterior std over t for a fixed x: grid scan plus a
// local golden-section polish inside the best cell. Ties prefer the grid
// point nearest the middle of the range. t in normalized units.
inline double one_d_variance_argmax(const GpModel& model, const Eigen::VectorXd& x_norm,
                                    double t_lo, double t_hi, int grid = 257) {
  if (!(t_lo <= t_hi)) throw InvalidInput("one_d_variance_argmax: bad t range");
  auto var_at = [&](double t) { return model.posterior({x_norm, t}).variance; };
  double best_v = -1.0, best_t = t_lo;
  double mid = 0.5 * (t_lo + t_hi);
  for (int i = 0; i < grid; ++i) {
    double t = grid == 1 ? t_lo : t_lo + (t_hi - t_lo) * i / (grid - 1);
    double v = var_at(t);
    bool tie_closer = v == best_v && std::abs(t - mid) < std::abs(best_t - mid);
    if (v > best_v || tie_closer) {
      best_v = v;
      best_t = t;
    }
  }
  double cell = grid > 1 ? (t_hi - t_lo) / (grid - 1) : 0.0;
  double a = std::max(t_lo, best_t - cell), b = std::min(t_hi, best_t + cell);
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = var_at(x1), f2 = var_at(x2);
  for (int it = 0; it < 40 && b - a > 1e-10; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = var_at(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = var_at(x1);
    }
  }
  double t_star = 0.5 * (a + b);
  return var_at(t_star) >= best_v ? t_star : best_t;
}

// Greedy selection of curve points to feed back into the GPs: repeatedly
// takes the iteration with the largest posterior std along the curve's
// x-line, subject to
//   - a duplicate guard (within 1 raw iteration of an existing point on the
//     same x-line, the line being same_x_tol wide),
//   - the conditioning cap ln cond(K + noise I) <= delta with the candidate
//     tentatively inserted,
//   - at most max_points.
// Values come from prefix compression; costs from the measured cum_cost
// (posterior cost mean if the curve carries no usable cost).
inline AugmentedBatch select_augmented(const LearningCurve& curve, const GpModel& model,
                                       const GpModel& cost_model, const Preference& pref,
                                       const SearchSpace& space, const AugmentOptions& opt,
                                       std::int64_t source_eval_id = -1) {
  curve.validate();
  AugmentedBatch batch;
  batch.source_eval_id = source_eval_id;
  if (opt.max_points <= 0) return batch;

  const Eigen::VectorXd x_norm = space.normalize(curve.x_raw);
  const KernelParams& kp = model.params();
  const double t_span = static_cast<double>(space.t_max - space.t_min);

  // candidates: integer iterations T_min..t along this curve; wide spans are
  // thinned to 512 evenly spaced integers
  const int t_obs = std::min(curve.length(), space.t_max);
  std::vector<int> cand;
  const int span = t_obs - space.t_min;
  if (span + 1 <= 512) {
    for (int t = space.t_min; t <= t_obs; ++t) cand.push_back(t);
  } else {
    for (int i = 0; i < 512; ++i) {
      int t = space.t_min + static_cast<int>(std::lround(span * (i / 511.0)));
      if (cand.empty() || cand.back() != t) cand.push_back(t);
    }
  }
  if (cand.empty()) return batch;

  std::vector<JointInput> work = model.dataset().inputs;
  std::vector<double> same_line_t;  // raw t of existing points on this x-line
  for (const auto& z : work) {
    if ((z.x - x_norm).norm() < opt.same_x_tol)
      same_line_t.push_back(space.t_min + z.t * t_span);
  }

  detail::IncrementalChol chol;
  chol.lower = model.chol_lower();
  chol.n = model.size();

  // cached solved columns L^-1 k_c, extended as points are accepted
  const int nc = static_cast<int>(cand.size());
  std::vector<Eigen::VectorXd> vcol(nc);
  std::vector<JointInput> cz(nc);
  for (int c = 0; c < nc; ++c) {
    cz[c] = {x_norm, space.normalize_t(cand[c])};
    Eigen::VectorXd k(chol.n);
    for (int i = 0; i < chol.n; ++i) k[i] = kernel(cz[c], work[i], kp);
    vcol[c] = chol.n > 0
                  ? chol.lower.topLeftCorner(chol.n, chol.n)
                        .triangularView<Eigen::Lower>()
                        .solve(k)
                  : Eigen::VectorXd(0);
  }

  // row sums of the extended matrix give a cheap Gershgorin bound on
  // lambda_max; lambda_min >= noise_var, so the bound is conservative
  auto cond_within_delta = [&](const JointInput& z_new) {
    std::vector<JointInput> tent = work;
    tent.push_back(z_new);
    double max_row = 0.0;
    Eigen::MatrixXd g = gram_matrix(tent, kp);
    for (int i = 0; i < g.rows(); ++i)
      max_row = std::max(max_row, g.row(i).cwiseAbs().sum());
    if (std::log((max_row + kp.noise_var) / kp.noise_var) <= opt.delta) return true;
    return log_condition_number(tent, kp) <= opt.delta;
  };

  std::vector<bool> dead(nc, false);
  while (static_cast<int>(batch.points.size()) < opt.max_points) {
    int best = -1;
    double best_var = -1.0;
    for (int c = 0; c < nc; ++c) {
      if (dead[c]) continue;
      bool dup = false;
      for (double te : same_line_t)
        if (std::abs(cand[c] - te) < 1.0) {
          dup = true;
          break;
        }
      if (dup) {
        dead[c] = true;
        continue;
      }
      double kss = kernel(cz[c], cz[c], kp);
      double var = kss - vcol[c].squaredNorm();
      if (var > best_var) {
        best_var = var;
        best = c;
      }
    }
    if (best < 0) break;  // all candidates guarded off

    if (!cond_within_delta(cz[best])) break;

    Eigen::VectorXd k_new(chol.n);
    for (int i = 0; i < chol.n; ++i) k_new[i] = kernel(cz[best], work[i], kp);
    if (!chol.extend(k_new, kernel(cz[best], cz[best], kp) + kp.noise_var)) break;
    work.push_back(cz[best]);
    same_line_t.push_back(cand[best]);

    AugmentedPoint pt;
    pt.z = cz[best];
    pt.t_raw = cand[best];
    pt.y_raw = compress(curve.prefix(cand[best]), pref);
    pt.cost = curve.cum_cost.empty()
                  ? posterior_cost_mean(cost_model, cz[best])
                  : curve.cum_cost[cand[best] - 1];
    batch.points.push_back(std::move(pt));
    dead[best] = true;

    // extend every cached column by the new row
    double lnn = chol.lower(chol.n - 1, chol.n - 1);
    for (int c = 0; c < nc; ++c) {
      if (dead[c]) continue;
      double k_c = kernel(cz[c], work.back(), kp);
      double num = k_c - chol.lower.row(chol.n - 1).head(chol.n - 1).dot(vcol[c]);
      vcol[c].conservativeResize(chol.n);
      vcol[c][chol.n - 1] = num / lnn;
    }
  }

  // authoritative re-check: drop trailing points if the exact conditioning
  // ever disagrees with the incremental path
  while (!batch.points.empty()) {
    if (log_condition_number(work, kp) <= opt.delta) break;
    work.pop_back();
    batch.points.pop_back();
  }
  return batch;
}

}  // namespace boil
