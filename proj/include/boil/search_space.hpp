#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "boil/errors.hpp"

namespace boil {

enum class AxisScale { Linear, Log };

struct SpaceDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  AxisScale scale = AxisScale::Linear;
};

// One point of the joint input space, always in normalized units:
// x in [0,1]^d, t in [0,1].
struct JointInput {
  Eigen::VectorXd x;
  double t = 0.0;
};

// Hyperparameter box plus the iteration budget range [t_min, t_max].
// All model code works on the unit cube; raw units only appear at the
// objective boundary and in logs.
struct SearchSpace {
  std::vector<SpaceDim> dims;
  int t_min = 1;
  int t_max = 1;

  int dim() const { return static_cast<int>(dims.size()); }

  void validate() const {
    if (dims.empty()) throw InvalidInput("search space needs at least one dimension");
    if (t_min < 1 || t_max <= t_min)
      throw InvalidInput("need 1 <= t_min < t_max");
    for (const auto& d : dims) {
      if (!(d.lower < d.upper))
        throw InvalidInput("dimension '" + d.name + "': lower must be < upper");
      if (d.scale == AxisScale::Log && d.lower <= 0.0)
        throw InvalidInput("dimension '" + d.name + "': log scale needs positive bounds");
    }
  }

  Eigen::VectorXd normalize(const Eigen::VectorXd& raw) const {
    if (raw.size() != dim()) throw InvalidInput("normalize: dimension mismatch");
    Eigen::VectorXd u(dim());
    for (int i = 0; i < dim(); ++i) {
      const auto& d = dims[i];
      double v = d.scale == AxisScale::Log
                     ? (std::log(raw[i]) - std::log(d.lower)) / (std::log(d.upper) - std::log(d.lower))
                     : (raw[i] - d.lower) / (d.upper - d.lower);
      u[i] = std::clamp(v, 0.0, 1.0);
    }
    return u;
  }

  Eigen::VectorXd denormalize(const Eigen::VectorXd& unit) const {
    if (unit.size() != dim()) throw InvalidInput("denormalize: dimension mismatch");
    Eigen::VectorXd raw(dim());
    for (int i = 0; i < dim(); ++i) {
      const auto& d = dims[i];
      double u = std::clamp(unit[i], 0.0, 1.0);
      raw[i] = d.scale == AxisScale::Log
                   ? std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)))
                   : d.lower + u * (d.upper - d.lower);
    }
    return raw;
  }

  double normalize_t(double t_raw) const {
    return std::clamp((t_raw - t_min) / static_cast<double>(t_max - t_min), 0.0, 1.0);
  }

  // Curves are defined at integer iterations, so budgets round to the grid.
  int denormalize_t(double t_unit) const {
    double raw = t_min + std::clamp(t_unit, 0.0, 1.0) * (t_max - t_min);
    int t = static_cast<int>(std::lround(raw));
    return std::clamp(t, t_min, t_max);
  }
};

}  // namespace boil
