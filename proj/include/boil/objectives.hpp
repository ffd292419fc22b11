#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>

#include "boil/curve.hpp"
#include "boil/errors.hpp"
#include "boil/rng.hpp"
#include "boil/search_space.hpp"

namespace boil {

// Family of saturating learning curves with optional transient dips:
//   r(u) = A(x) (1 - exp(-u / tau(x))) + noise,
//   A(x) = max(0, 1 - a ||xn - x*||^2),  tau(x) = tau0 (1 + b ||xn - x*||),
// with xn the normalized hyperparameters. A dip starts at any iteration
// with probability p(x) = clamp(dip_prob_base + dip_prob_slope ||xn - x*||),
// drops the score by dip_depth_frac * A, and lasts Geometric(dip_len_p)
// iterations. Cost accrues at per_iter_cost(x) seconds per iteration.
struct SyntheticCurveSpec {
  Eigen::VectorXd x_star;  // normalized units
  double a = 1.0;
  double tau0 = 15.0;
  double b = 1.0;
  double noise_sd = 0.02;
  double dip_prob_base = 0.0;
  double dip_prob_slope = 0.0;
  double dip_depth_frac = 0.5;
  double dip_len_p = 0.3;
  double cost_base = 1.0;
  Eigen::VectorXd cost_weights;  // affine in normalized x; may be empty

  void validate(const SearchSpace& space) const {
    if (x_star.size() != space.dim())
      throw InvalidInput("synthetic spec: x_star dimension mismatch");
    if (!(tau0 > 0.0)) throw InvalidInput("synthetic spec: tau0 must be positive");
    if (noise_sd < 0.0) throw InvalidInput("synthetic spec: noise_sd must be >= 0");
    if (!(dip_len_p > 0.0 && dip_len_p < 1.0))
      throw InvalidInput("synthetic spec: dip_len_p in (0,1)");
    if (cost_weights.size() != 0 && cost_weights.size() != space.dim())
      throw InvalidInput("synthetic spec: cost_weights dimension mismatch");
  }

  double asymptote(const Eigen::VectorXd& xn) const {
    return std::max(0.0, 1.0 - a * (xn - x_star).squaredNorm());
  }
  double tau(const Eigen::VectorXd& xn) const {
    return tau0 * (1.0 + b * (xn - x_star).norm());
  }
  double dip_prob(const Eigen::VectorXd& xn) const {
    return std::clamp(dip_prob_base + dip_prob_slope * (xn - x_star).norm(), 0.0, 0.9);
  }
  double per_iter_cost(const Eigen::VectorXd& xn) const {
    double c = cost_base;
    if (cost_weights.size() == xn.size()) c += cost_weights.dot(xn);
    if (!(c > 0.0)) throw InvalidInput("synthetic spec: per-iteration cost must be positive");
    return c;
  }
};

class Objective {
 public:
  virtual ~Objective() = default;
  virtual LearningCurve evaluate(const Eigen::VectorXd& x_raw, int t) = 0;
};

// Deterministic given (seed, x, t); a shorter budget returns a bitwise
// prefix of a longer one because every iteration draws from a counter
// keyed on (seed, x, u) rather than from sequential state.
class SyntheticObjective : public Objective {
 public:
  SyntheticObjective(SyntheticCurveSpec spec, SearchSpace space, std::uint64_t seed)
      : spec_(std::move(spec)), space_(std::move(space)), seed_(seed) {
    space_.validate();
    spec_.validate(space_);
  }

  LearningCurve evaluate(const Eigen::VectorXd& x_raw, int t) override {
    return simulate(spec_, space_, x_raw, t, seed_, true);
  }

  static LearningCurve noise_free(const SyntheticCurveSpec& spec, const SearchSpace& space,
                                  const Eigen::VectorXd& x_raw, int t) {
    return simulate(spec, space, x_raw, t, 0, false);
  }

  const SyntheticCurveSpec& spec() const { return spec_; }

 private:
  static LearningCurve simulate(const SyntheticCurveSpec& spec, const SearchSpace& space,
                                const Eigen::VectorXd& x_raw, int t, std::uint64_t seed,
                                bool stochastic) {
    if (t < 1) throw InvalidInput("evaluate: t must be >= 1");
    Eigen::VectorXd xn = space.normalize(x_raw);
    double a_x = spec.asymptote(xn);
    double tau_x = spec.tau(xn);
    double p_dip = spec.dip_prob(xn);
    double cost = spec.per_iter_cost(xn);

    CounterRng rng{mix_key(seed, hash_doubles(x_raw.data(), static_cast<int>(x_raw.size()), 0x0bf1ULL))};

    LearningCurve curve;
    curve.x_raw = x_raw;
    curve.scores.reserve(t);
    curve.cum_cost.reserve(t);
    int dip_left = 0;
    for (int u = 1; u <= t; ++u) {
      double r = a_x * (1.0 - std::exp(-static_cast<double>(u) / tau_x));
      if (stochastic) {
        if (dip_left == 0 && rng.uniform(1, u) < p_dip) {
          double ul = rng.uniform(2, u);
          dip_left = 1 + static_cast<int>(std::floor(std::log1p(-ul) / std::log1p(-spec.dip_len_p)));
        }
        if (dip_left > 0) {
          r -= spec.dip_depth_frac * a_x;
          --dip_left;
        }
        r += spec.noise_sd * rng.normal(0, u);
      }
      curve.scores.push_back(r);
      curve.cum_cost.push_back(u * cost);
    }
    return curve;
  }

  SyntheticCurveSpec spec_;
  SearchSpace space_;
  std::uint64_t seed_;
};

// Known optimum and its noise-free compressed utility at the full budget.
// A(x) is maximal and tau(x) minimal at x*, so the noise-free curve at x*
// pointwise dominates any other and stays optimal under monotone
// preferences. With a = 0 every x ties and x* is returned by convention.
inline std::pair<Eigen::VectorXd, double> true_best(const SyntheticCurveSpec& spec,
                                                    const SearchSpace& space,
                                                    const Preference& pref) {
  space.validate();
  spec.validate(space);
  Eigen::VectorXd x_raw = space.denormalize(spec.x_star);
  LearningCurve c = SyntheticObjective::noise_free(spec, space, x_raw, space.t_max);
  return {x_raw, compress(c, pref)};
}

}  // namespace boil
