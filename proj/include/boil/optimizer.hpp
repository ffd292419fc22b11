#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "boil/acquisition.hpp"
#include "boil/augmentation.hpp"
#include "boil/curve.hpp"
#include "boil/gp.hpp"
#include "boil/logging.hpp"
#include "boil/objectives.hpp"
#include "boil/rng.hpp"
#include "boil/search_space.hpp"
#include "boil/transform_fit.hpp"

namespace boil {

enum class Method { Boil, CmtfBo, BoVanilla, BoL, Random, Hyperband };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Boil: return "boil";
    case Method::CmtfBo: return "cmtf";
    case Method::BoVanilla: return "bo";
    case Method::BoL: return "bo-l";
    case Method::Random: return "random";
    case Method::Hyperband: return "hyperband";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  if (s == "boil") return Method::Boil;
  if (s == "cmtf-bo" || s == "cmtf") return Method::CmtfBo;
  if (s == "bo") return Method::BoVanilla;
  if (s == "bo-l") return Method::BoL;
  if (s == "random") return Method::Random;
  if (s == "hyperband") return Method::Hyperband;
  throw InvalidInput("unknown method '" + s + "'");
}

struct RunOptions {
  int n_evals = 40;
  int init_evals = 0;  // 0 -> 3 * d
  int max_augment = 15;
  double delta = 20.0;
  double same_x_tol = 0.02;
  double cost_budget = std::numeric_limits<double>::infinity();
  Preference::Kind preference = Preference::Kind::Sigmoid;
  int avg_window = 20;
  KernelKind kernel = KernelKind::SeProduct;
};

// One line of a run trace. Augmented rows share `step` with the direct
// evaluation that produced their curve and add nothing to cum_cost.
struct EvalRecord {
  std::int64_t eval_id = 0;
  std::string method;
  std::uint64_t seed = 0;
  int step = 0;
  Eigen::VectorXd x_raw;
  int t = 0;
  double y = 0.0;
  double cost = 0.0;
  double cum_cost = 0.0;
  bool augmented = false;
  double best_so_far = 0.0;
  double m0 = 0.0, g0 = 0.0;
  double lengthscale_x = 0.0, lengthscale_t = 0.0;
  double ln_cond = 0.0;
};

struct TuneResult {
  Eigen::VectorXd x_star;
  double y_star = -std::numeric_limits<double>::infinity();
  double total_cost = 0.0;
  int n_evals = 0;
  int n_augmented = 0;
  std::vector<EvalRecord> records;
};

using RecordSink = std::function<void(const EvalRecord&)>;

// k low-discrepancy hyperparameter points; budgets alternate between the
// cheapest budget and the midpoint so the time axis gets signal early.
inline std::vector<std::pair<Eigen::VectorXd, int>> initial_design(const SearchSpace& space,
                                                                   int k, std::uint64_t seed) {
  space.validate();
  if (k < 1) throw InvalidInput("initial design needs k >= 1");
  auto xs = low_discrepancy(k, space.dim(), mix_key(seed, 0xde5170ULL));
  int mid = static_cast<int>(std::lround(0.5 * (space.t_min + space.t_max)));
  std::vector<std::pair<Eigen::VectorXd, int>> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i)
    out.emplace_back(space.denormalize(xs[i]), i % 2 == 0 ? space.t_min : mid);
  return out;
}

namespace detail {

struct RunState {
  SearchSpace space;
  RunOptions opt;
  Method method;
  std::uint64_t seed;
  std::string label;

  GpModel score_gp;
  GpModel cost_gp;
  std::vector<LearningCurve> row_curves;  // per score-GP row; empty = frozen row
  LogisticTransform tr;
  HyperPrior prior = HyperPrior::defaults();

  TuneResult result;
  RecordSink sink;
  std::vector<JointInput> direct_obs;
  std::int64_t next_eval_id = 0;
  int direct_evals = 0;
  int consecutive_failures = 0;

  RunState(const SearchSpace& sp, const RunOptions& o, Method m, std::uint64_t sd, RecordSink sk)
      : space(sp),
        opt(o),
        method(m),
        seed(sd),
        label(method_name(m)),
        score_gp(GpDataset{}, make_kernel(o)),
        cost_gp(GpDataset{}, make_kernel(o)),
        sink(std::move(sk)) {
    tr.m0 = 0.5 * (space.t_min + space.t_max);
    tr.g0 = 10.0 / (space.t_max - space.t_min);
  }

  static KernelParams make_kernel(const RunOptions& o) {
    KernelParams k;
    k.kind = o.kernel;
    return k;
  }

  Preference preference() const {
    switch (opt.preference) {
      case Preference::Kind::Sigmoid: return Preference::sigmoid(tr);
      case Preference::Kind::Log: return Preference::log_weighted();
      case Preference::Kind::Average: return Preference::average(opt.avg_window);
    }
    throw InvalidInput("unknown preference kind");
  }

  void emit(EvalRecord& rec) {
    rec.best_so_far = std::max(rec.y, result.records.empty()
                                          ? -std::numeric_limits<double>::infinity()
                                          : result.records.back().best_so_far);
    if (rec.y > result.y_star || result.x_star.size() == 0) {
      result.y_star = rec.y;
      result.x_star = rec.x_raw;
    }
    if (sink) sink(rec);
    result.records.push_back(rec);
  }

  void stamp_model_fields(EvalRecord& rec) const {
    rec.m0 = tr.m0;
    rec.g0 = tr.g0;
    rec.lengthscale_x = score_gp.params().lengthscale_x;
    rec.lengthscale_t = score_gp.params().lengthscale_t;
  }
};

}  // namespace detail

// Runs one tuning method to its evaluation/cost budget. Fully deterministic
// given (method, space, options, seed).
inline TuneResult run_method(Method method, Objective& objective, const SearchSpace& space,
                             const RunOptions& opt, std::uint64_t seed,
                             const RecordSink& sink = nullptr);

namespace detail {

inline LearningCurve evaluate_with_retry(RunState& st, Objective& obj,
                                         const Eigen::VectorXd& x_raw, int t, bool& failed) {
  failed = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      LearningCurve c = obj.evaluate(x_raw, t);
      c.validate();
      st.consecutive_failures = 0;
      return c;
    } catch (const ObjectiveError& e) {
      log_warn(std::string("objective failed (attempt ") + std::to_string(attempt + 1) +
               "): " + e.what());
    }
  }
  failed = true;
  if (++st.consecutive_failures >= 3)
    throw ObjectiveError("objective failed on 3 consecutive evaluations, giving up");
  return {};
}

// Sentinel for failed evaluations: one standard deviation below the worst
// observation so the model keeps moving without poisoning the scale.
inline double failure_sentinel(const GpModel& gp) {
  if (gp.size() == 0) return 0.0;
  const auto& raw = gp.dataset().raw_outputs;
  return raw.minCoeff() - gp.dataset().standardization.stddev;
}

inline void refit_models(RunState& st) {
  bool sigmoid = st.opt.preference == Preference::Kind::Sigmoid;
  st.score_gp.restandardize();
  if (sigmoid) {
    st.tr = fit_transform(st.row_curves, st.score_gp, st.tr, st.space.t_min, st.space.t_max,
                          st.prior);
    st.score_gp.restandardize();
  }
  st.score_gp.set_params(fit_hyperparameters(st.score_gp, st.prior, st.score_gp.params()));
  st.cost_gp.restandardize();
  st.cost_gp.set_params(fit_hyperparameters(st.cost_gp, st.prior, st.cost_gp.params()));
}

// One direct evaluation: objective call, compression, model update,
// augmentation, records.
inline void do_evaluation(RunState& st, Objective& obj, const Eigen::VectorXd& x_norm,
                          int t_raw, bool augment) {
  Eigen::VectorXd x_raw = st.space.denormalize(x_norm);
  JointInput z{x_norm, st.space.normalize_t(t_raw)};

  bool failed = false;
  LearningCurve curve = evaluate_with_retry(st, obj, x_raw, t_raw, failed);

  Preference pref = st.preference();
  double y_raw, cost;
  if (failed) {
    y_raw = failure_sentinel(st.score_gp);
    cost = std::max(posterior_cost_mean(st.cost_gp, z), 1e-6);
  } else {
    y_raw = compress(curve, pref);
    cost = curve.cum_cost.empty() ? std::max(posterior_cost_mean(st.cost_gp, z), 1e-6)
                                  : curve.cum_cost.back();
  }

  st.score_gp.add_observation_raw(z, y_raw);
  st.cost_gp.add_observation_raw(z, cost);
  st.row_curves.push_back(failed ? LearningCurve{} : curve);
  st.direct_obs.push_back(z);
  ++st.direct_evals;
  st.result.total_cost += cost;
  st.result.n_evals += 1;

  EvalRecord rec;
  rec.eval_id = st.next_eval_id++;
  rec.method = st.label;
  rec.seed = st.seed;
  rec.step = st.direct_evals;
  rec.x_raw = x_raw;
  rec.t = t_raw;
  rec.y = y_raw;
  rec.cost = cost;
  rec.cum_cost = st.result.total_cost;
  rec.augmented = false;

  AugmentedBatch batch;
  if (augment && !failed) {
    AugmentOptions aopt{st.opt.max_augment, st.opt.delta, st.opt.same_x_tol};
    batch = select_augmented(curve, st.score_gp, st.cost_gp, pref, st.space, aopt, rec.eval_id);
    for (const auto& pt : batch.points) {
      st.score_gp.add_observation_raw(pt.z, pt.y_raw);
      st.cost_gp.add_observation_raw(pt.z, pt.cost);
      st.row_curves.push_back(curve.prefix(pt.t_raw));
    }
    st.result.n_augmented += static_cast<int>(batch.points.size());
  }

  double ln_cond = log_condition_number(st.score_gp.dataset().inputs, st.score_gp.params());
  rec.ln_cond = ln_cond;
  st.stamp_model_fields(rec);
  st.emit(rec);

  for (const auto& pt : batch.points) {
    EvalRecord ar;
    ar.eval_id = st.next_eval_id++;
    ar.method = st.label;
    ar.seed = st.seed;
    ar.step = rec.step;
    ar.x_raw = x_raw;
    ar.t = pt.t_raw;
    ar.y = pt.y_raw;
    ar.cost = pt.cost;
    ar.cum_cost = st.result.total_cost;
    ar.augmented = true;
    ar.ln_cond = ln_cond;
    st.stamp_model_fields(ar);
    st.emit(ar);
  }
}

// Evaluation budget: the initial design plus n_evals acquisition steps.
inline int design_size(const RunState& st) {
  return st.opt.init_evals > 0 ? st.opt.init_evals : 3 * st.space.dim();
}

inline TuneResult run_model_based(RunState& st, Objective& obj) {
  const bool joint_space = st.method == Method::Boil || st.method == Method::CmtfBo;
  const bool augment = st.method == Method::Boil;
  const int d = st.space.dim();
  const int refit_every = 3 * d;
  const int k0 = design_size(st);
  const int eval_cap = k0 + st.opt.n_evals;

  auto design = initial_design(st.space, k0, st.seed);
  for (auto& [x_raw, t] : design) {
    if (st.result.total_cost >= st.opt.cost_budget) break;
    int t_eval = joint_space ? t : st.space.t_max;
    do_evaluation(st, obj, st.space.normalize(x_raw), t_eval, augment);
  }
  if (st.direct_evals > 0) refit_models(st);

  while (st.direct_evals < eval_cap && st.result.total_cost < st.opt.cost_budget) {
    AcquisitionOptions aq;
    aq.cost_scaled = joint_space;
    if (!joint_space) aq.fixed_t = 1.0;
    // Never re-run a setting at a budget it has already covered; the curve
    // prefix is known, so the argmax moves to the best genuinely new point.
    aq.exclude = &st.direct_obs;
    aq.exclude_x_tol = st.opt.same_x_tol;
    aq.exclude_t_tol = 0.5 / (st.space.t_max - st.space.t_min);
    AcquisitionDecision dec =
        maximize_decision(st.score_gp, st.cost_gp, st.space, mix_key(st.seed, 1000 + st.direct_evals), aq);
    int t_raw = joint_space ? st.space.denormalize_t(dec.z_next.t) : st.space.t_max;
    do_evaluation(st, obj, dec.z_next.x, t_raw, augment);
    if (st.direct_evals % refit_every == 0) refit_models(st);
  }

  // Report the incumbent as the answer: among evaluated settings, the one
  // whose posterior mean at the full budget is highest. Raw observed y values
  // are not comparable across budgets (and, for the learned preference,
  // across refits), so argmax-over-y would favor whichever run was longest.
  if (!st.direct_obs.empty()) {
    int best = 0;
    double best_mu = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < st.direct_obs.size(); ++i) {
      const double mu = st.score_gp.posterior({st.direct_obs[i].x, 1.0}).mean;
      if (mu > best_mu) {
        best_mu = mu;
        best = static_cast<int>(i);
      }
    }
    st.result.x_star = st.space.denormalize(st.direct_obs[static_cast<size_t>(best)].x);
  }
  return std::move(st.result);
}

inline TuneResult run_random(RunState& st, Objective& obj) {
  CounterRng rng{mix_key(st.seed, 0x7a2dULL)};
  const int eval_cap = design_size(st) + st.opt.n_evals;
  while (st.direct_evals < eval_cap && st.result.total_cost < st.opt.cost_budget) {
    Eigen::VectorXd x(st.space.dim());
    for (int j = 0; j < st.space.dim(); ++j)
      x[j] = rng.uniform(st.direct_evals, j);
    do_evaluation(st, obj, x, st.space.t_max, false);
  }
  return std::move(st.result);
}

inline TuneResult run_hyperband(RunState& st, Objective& obj) {
  const double eta = 3.0;
  const int r_min = st.space.t_min, r_max = st.space.t_max;
  const int s_max = static_cast<int>(std::floor(std::log(static_cast<double>(r_max) / r_min) /
                                                std::log(eta)));
  const int eval_cap = design_size(st) + st.opt.n_evals;
  int cycle = 0;
  while (st.direct_evals < eval_cap && st.result.total_cost < st.opt.cost_budget) {
    for (int s = s_max; s >= 0; --s) {
      if (st.direct_evals >= eval_cap || st.result.total_cost >= st.opt.cost_budget) break;
      int n = static_cast<int>(std::ceil((s_max + 1.0) / (s + 1.0) * std::pow(eta, s)));
      auto xs = low_discrepancy(n, st.space.dim(),
                                mix_key(st.seed, 0x4b00ULL + 31 * cycle + s));
      std::vector<std::pair<Eigen::VectorXd, double>> alive;  // x_norm, last score
      for (auto& x : xs) alive.emplace_back(x, 0.0);
      for (int round = 0; round <= s; ++round) {
        int r = std::clamp(static_cast<int>(std::lround(r_max * std::pow(eta, round - s))),
                           r_min, r_max);
        for (auto& [x, score] : alive) {
          if (st.direct_evals >= eval_cap || st.result.total_cost >= st.opt.cost_budget)
            break;
          do_evaluation(st, obj, x, r, false);
          score = st.result.records.back().y;
        }
        int keep = std::max(1, static_cast<int>(alive.size() / eta));
        std::stable_sort(alive.begin(), alive.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (round < s) alive.resize(std::min<size_t>(alive.size(), static_cast<size_t>(keep)));
      }
    }
    ++cycle;
  }
  return std::move(st.result);
}

}  // namespace detail

inline TuneResult run_method(Method method, Objective& objective, const SearchSpace& space,
                             const RunOptions& opt, std::uint64_t seed, const RecordSink& sink) {
  space.validate();
  if (opt.n_evals < 0) throw InvalidInput("n_evals must be >= 0");
  RunOptions o = opt;
  if (method == Method::BoVanilla || method == Method::Random || method == Method::Hyperband)
    o.preference = Preference::Kind::Average;
  if (method == Method::BoL) o.preference = Preference::Kind::Sigmoid;

  detail::RunState st(space, o, method, seed, sink);
  switch (method) {
    case Method::Random: return detail::run_random(st, objective);
    case Method::Hyperband: return detail::run_hyperband(st, objective);
    default: return detail::run_model_based(st, objective);
  }
}

// Named entry points: the full method and its ablations/baselines.
inline TuneResult run_boil(Objective& objective, const SearchSpace& space, const RunOptions& opt,
                           std::uint64_t seed, const RecordSink& sink = nullptr) {
  return run_method(Method::Boil, objective, space, opt, seed, sink);
}

inline TuneResult run_baseline(Method method, Objective& objective, const SearchSpace& space,
                               const RunOptions& opt, std::uint64_t seed,
                               const RecordSink& sink = nullptr) {
  if (method == Method::Boil) throw InvalidInput("run_baseline: use run_boil for the full method");
  return run_method(method, objective, space, opt, seed, sink);
}

}  // namespace boil
