#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "boil/errors.hpp"

namespace boil {

// One training run: per-iteration scores r(1..t) and cumulative cost.
// x_raw is the hyperparameter vector that produced it, in raw units.
struct LearningCurve {
  std::vector<double> scores;
  std::vector<double> cum_cost;
  Eigen::VectorXd x_raw;

  int length() const { return static_cast<int>(scores.size()); }

  // cum_cost may be empty (cost unknown); otherwise it matches scores.
  void validate() const {
    if (scores.empty()) throw InvalidInput("curve must have at least one iteration");
    if (!cum_cost.empty() && cum_cost.size() != scores.size())
      throw InvalidInput("curve: scores/cum_cost length mismatch");
    double prev = 0.0;
    for (double c : cum_cost) {
      if (!(c > prev)) throw InvalidInput("cum_cost must be strictly increasing and positive");
      prev = c;
    }
  }

  LearningCurve prefix(int t) const {
    if (t < 1 || t > length()) throw InvalidInput("prefix length out of range");
    LearningCurve p;
    p.scores.assign(scores.begin(), scores.begin() + t);
    if (!cum_cost.empty()) p.cum_cost.assign(cum_cost.begin(), cum_cost.begin() + t);
    p.x_raw = x_raw;
    return p;
  }
};

// Logistic credit curve l(u) = 1 / (1 + exp(-g0 (u - m0))), in raw
// iteration units. g0 > 0; m0 is where credit crosses one half.
struct LogisticTransform {
  double m0 = 0.0;
  double g0 = 1.0;
};

inline double logistic_weight(double u, const LogisticTransform& tr) {
  double a = tr.g0 * (u - tr.m0);
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

struct Preference {
  enum class Kind { Sigmoid, Log, Average };
  Kind kind = Kind::Sigmoid;
  LogisticTransform transform;  // Sigmoid only
  int window = 1;               // Average only

  static Preference sigmoid(LogisticTransform tr) { return {Kind::Sigmoid, tr, 1}; }
  static Preference log_weighted() { return {Kind::Log, {}, 1}; }
  static Preference average(int window) {
    if (window < 1) throw InvalidInput("average window must be >= 1");
    return {Kind::Average, {}, window};
  }
};

// Collapses a curve to the scalar the GP regresses on.
//   Sigmoid: sum_u r(u) l(u)
//   Log:     sum_u r(u) ln(1+u)/ln(1+t)
//   Average: mean of the last `window` scores
inline double compress(const LearningCurve& curve, const Preference& pref) {
  curve.validate();
  const int t = curve.length();
  switch (pref.kind) {
    case Preference::Kind::Sigmoid: {
      double y = 0.0;
      for (int u = 1; u <= t; ++u)
        y += curve.scores[u - 1] * logistic_weight(u, pref.transform);
      return y;
    }
    case Preference::Kind::Log: {
      double y = 0.0;
      double denom = std::log(1.0 + t);
      for (int u = 1; u <= t; ++u)
        y += curve.scores[u - 1] * std::log(1.0 + u) / denom;
      return y;
    }
    case Preference::Kind::Average: {
      int w = std::min(pref.window, t);
      double s = 0.0;
      for (int u = t - w + 1; u <= t; ++u) s += curve.scores[u - 1];
      return s / w;
    }
  }
  throw InvalidInput("unknown preference kind");
}

// (d y / d m0, d y / d g0) for the sigmoid compression. Written via
// s (1 - s) so large |g0 (u - m0)| stays stable.
inline std::pair<double, double> compress_grad(const LearningCurve& curve,
                                               const LogisticTransform& tr) {
  curve.validate();
  double dm = 0.0, dg = 0.0;
  for (int u = 1; u <= curve.length(); ++u) {
    double s = logistic_weight(u, tr);
    double ss = s * (1.0 - s);
    dm += curve.scores[u - 1] * (-tr.g0) * ss;
    dg += curve.scores[u - 1] * (u - tr.m0) * ss;
  }
  return {dm, dg};
}

}  // namespace boil
