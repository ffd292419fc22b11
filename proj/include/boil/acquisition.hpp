#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "boil/gp.hpp"
#include "boil/rng.hpp"
#include "boil/search_space.hpp"

namespace boil {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * 0.3989422804014327;
}
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Best posterior mean over the observed hyperparameters pushed to the full
// budget (t = 1 in normalized units), in standardized output units.
struct Incumbent {
  double mu_max = 0.0;
};

inline Incumbent incumbent(const GpModel& model, const std::vector<JointInput>& observed) {
  if (observed.empty()) throw InvalidInput("incumbent needs at least one observation");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : observed) {
    JointInput full{z.x, 1.0};
    best = std::max(best, model.posterior(full).mean);
  }
  return {best};
}

// Closed-form EI against a mean-based incumbent. mu, sigma, mu_max are in
// standardized units; sigma = 0 degenerates to max(mu - mu_max, 0).
inline double expected_improvement_value(double mu, double sigma, double mu_max) {
  if (sigma <= 1e-15) return std::max(mu - mu_max, 0.0);
  double lambda = (mu - mu_max) / sigma;
  return sigma * normal_pdf(lambda) + (mu - mu_max) * normal_cdf(lambda);
}

inline double expected_improvement(const GpModel& model, const JointInput& z,
                                   const Incumbent& inc) {
  Posterior p = model.posterior(z);
  return expected_improvement_value(p.mean, std::sqrt(p.variance), inc.mu_max);
}

// softplus(EI) / softplus(predicted cost); cost in raw units. Positive and
// strictly decreasing in the cost prediction.
inline double decision_score(const GpModel& model, const GpModel& cost_model,
                             const JointInput& z, const Incumbent& inc) {
  double alpha = expected_improvement(model, z, inc);
  double mu_c = posterior_cost_mean(cost_model, z);
  return softplus(alpha) / softplus(mu_c);
}

struct AcquisitionDecision {
  JointInput z_next;   // normalized units
  double alpha_value = 0.0;
  double cost_mean = 0.0;
  double score = 0.0;
};

struct AcquisitionOptions {
  bool cost_scaled = true;          // false: plain EI (fixed-budget baselines)
  std::optional<double> fixed_t;    // pin the t coordinate (normalized)
  int probes = 512;
  int refine_from = 8;
  int sweeps = 20;
  // Settings the caller has already run directly. A candidate within
  // exclude_x_tol of an entry's x (normalized, L2) at the same or lower
  // budget (t <= entry t + exclude_t_tol) would replay a known curve
  // prefix, so the search skips it; extending to a higher t stays allowed.
  const std::vector<JointInput>* exclude = nullptr;
  double exclude_x_tol = 0.02;
  double exclude_t_tol = 0.0;  // normalized t units
};

namespace detail {

struct ScoredPoint {
  Eigen::VectorXd p;  // (x..., t) in the unit cube
  double score = -std::numeric_limits<double>::infinity();
};

// Deterministic preference order: higher score, then smaller t, then
// lexicographically smaller x.
inline bool better(const ScoredPoint& a, const ScoredPoint& b) {
  if (a.score != b.score) return a.score > b.score;
  const int d = static_cast<int>(a.p.size()) - 1;
  if (a.p[d] != b.p[d]) return a.p[d] < b.p[d];
  for (int i = 0; i < d; ++i)
    if (a.p[i] != b.p[i]) return a.p[i] < b.p[i];
  return false;
}

}  // namespace detail

// Multi-start maximizer: low-discrepancy probes over the joint cube, then
// coordinate-wise refinement with a shrinking step from the best probes.
// Fully deterministic given the seed.
inline AcquisitionDecision maximize_decision(const GpModel& model, const GpModel& cost_model,
                                             const SearchSpace& space, std::uint64_t rng_seed,
                                             const AcquisitionOptions& opt = {}) {
  const int d = space.dim();
  const int nd = d + 1;
  Incumbent inc = incumbent(model, model.dataset().inputs);

  auto excluded = [&](const Eigen::VectorXd& p) {
    if (!opt.exclude) return false;
    for (const auto& z : *opt.exclude)
      if (p[d] <= z.t + opt.exclude_t_tol && (z.x - p.head(d)).norm() <= opt.exclude_x_tol)
        return true;
    return false;
  };
  auto evaluate = [&](const Eigen::VectorXd& p) {
    if (excluded(p)) return -std::numeric_limits<double>::infinity();
    JointInput z{p.head(d), p[d]};
    double alpha = expected_improvement(model, z, inc);
    if (!opt.cost_scaled) return softplus(alpha);
    return softplus(alpha) / softplus(posterior_cost_mean(cost_model, z));
  };

  auto probes = low_discrepancy(opt.probes, nd, rng_seed);
  std::vector<detail::ScoredPoint> scored;
  scored.reserve(probes.size());
  for (auto& p : probes) {
    if (opt.fixed_t) p[d] = *opt.fixed_t;
    scored.push_back({p, evaluate(p)});
  }
  std::stable_sort(scored.begin(), scored.end(), detail::better);

  detail::ScoredPoint best = scored.front();
  const int starts = std::min<int>(opt.refine_from, static_cast<int>(scored.size()));
  for (int s = 0; s < starts; ++s) {
    detail::ScoredPoint cur = scored[s];
    double step = 0.1;
    for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
      for (int c = 0; c < nd; ++c) {
        if (c == d && opt.fixed_t) continue;
        for (double dir : {+1.0, -1.0}) {
          Eigen::VectorXd cand = cur.p;
          cand[c] = std::clamp(cand[c] + dir * step, 0.0, 1.0);
          if (cand[c] == cur.p[c]) continue;
          detail::ScoredPoint sp{cand, evaluate(cand)};
          if (detail::better(sp, cur)) cur = sp;
        }
      }
      step *= 0.7;
    }
    if (detail::better(cur, best)) best = cur;
  }

  // Exclusions covering every candidate fall back to the plain argmax; a
  // decision is always returned.
  if (!std::isfinite(best.score) && opt.exclude) {
    AcquisitionOptions relaxed = opt;
    relaxed.exclude = nullptr;
    return maximize_decision(model, cost_model, space, rng_seed, relaxed);
  }

  AcquisitionDecision dec;
  dec.z_next = {best.p.head(d), best.p[d]};
  dec.alpha_value = expected_improvement(model, dec.z_next, inc);
  dec.cost_mean = posterior_cost_mean(cost_model, dec.z_next);
  dec.score = best.score;
  return dec;
}

}  // namespace boil
