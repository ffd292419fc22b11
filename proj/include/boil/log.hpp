#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "boil/errors.hpp"
#include "boil/optimizer.hpp"
#include "boil/stats.hpp"

// Run-log persistence: one JSON object per line, append-only. Readers
// tolerate a truncated final line (a run killed mid-write); anything else
// malformed is an error.

namespace boil {

namespace detail {

using ojson = nlohmann::ordered_json;

// JSON has no infinities; cap instead of emitting null so logs stay numeric.
inline double json_safe(double v) {
  if (std::isnan(v)) return 0.0;
  if (std::isinf(v)) return v > 0 ? 1e300 : -1e300;
  return v;
}

}  // namespace detail

inline detail::ojson record_to_json(const EvalRecord& r) {
  detail::ojson j;
  j["eval_id"] = r.eval_id;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["step"] = r.step;
  j["x"] = detail::ojson::array();
  for (Eigen::Index i = 0; i < r.x_raw.size(); ++i) j["x"].push_back(detail::json_safe(r.x_raw[i]));
  j["t"] = r.t;
  j["y"] = detail::json_safe(r.y);
  j["cost"] = detail::json_safe(r.cost);
  j["cum_cost"] = detail::json_safe(r.cum_cost);
  j["provenance"] = r.augmented ? "augmented" : "direct";
  j["best_so_far"] = detail::json_safe(r.best_so_far);
  j["m0"] = detail::json_safe(r.m0);
  j["g0"] = detail::json_safe(r.g0);
  j["lengthscale_x"] = detail::json_safe(r.lengthscale_x);
  j["lengthscale_t"] = detail::json_safe(r.lengthscale_t);
  j["ln_cond"] = detail::json_safe(r.ln_cond);
  return j;
}

inline std::string record_to_line(const EvalRecord& r) {
  return record_to_json(r).dump() + "\n";
}

inline EvalRecord record_from_json(const detail::ojson& j) {
  EvalRecord r;
  r.eval_id = j.at("eval_id").get<std::int64_t>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.step = j.at("step").get<int>();
  const auto& xs = j.at("x");
  r.x_raw.resize(static_cast<Eigen::Index>(xs.size()));
  for (size_t i = 0; i < xs.size(); ++i)
    r.x_raw[static_cast<Eigen::Index>(i)] = xs[i].get<double>();
  r.t = j.at("t").get<int>();
  r.y = j.at("y").get<double>();
  r.cost = j.at("cost").get<double>();
  r.cum_cost = j.at("cum_cost").get<double>();
  const std::string prov = j.at("provenance").get<std::string>();
  if (prov != "direct" && prov != "augmented")
    throw InvalidInput("provenance must be direct or augmented, got \"" + prov + "\"");
  r.augmented = prov == "augmented";
  r.best_so_far = j.at("best_so_far").get<double>();
  r.m0 = j.at("m0").get<double>();
  r.g0 = j.at("g0").get<double>();
  r.lengthscale_x = j.at("lengthscale_x").get<double>();
  r.lengthscale_t = j.at("lengthscale_t").get<double>();
  r.ln_cond = j.at("ln_cond").get<double>();
  return r;
}

struct LogContents {
  std::vector<EvalRecord> records;
  bool truncated_tail = false;  // final line was cut off mid-write
};

inline LogContents read_log(std::istream& in) {
  LogContents out;
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty())
      throw InvalidInput("malformed log: blank line " + std::to_string(i + 1));
    try {
      out.records.push_back(record_from_json(detail::ojson::parse(lines[i])));
    } catch (const std::exception& e) {
      if (i + 1 == lines.size()) {
        out.truncated_tail = true;
        break;
      }
      throw InvalidInput("malformed log record at line " + std::to_string(i + 1) + ": " +
                         e.what());
    }
  }
  if (out.records.empty()) throw InvalidInput("log contains no records");
  return out;
}

// ---------------------------------------------------------------------------
// Replay summary

struct ReplaySummary {
  Eigen::VectorXd x_star;
  double y_star = -std::numeric_limits<double>::infinity();
  double total_cost = 0.0;
  int n_direct = 0;
  int n_augmented = 0;
  std::vector<int> steps;                  // direct-evaluation step indices
  std::vector<int> augmented_per_step;     // aligned with steps
  double trend_rho = 0.0;                  // spearman(step, augmented count)
};

inline ReplaySummary summarize_log(const std::vector<EvalRecord>& records) {
  ReplaySummary s;
  for (const auto& r : records) {
    if (r.y > s.y_star || s.x_star.size() == 0) {
      s.y_star = r.y;
      s.x_star = r.x_raw;
    }
    s.total_cost = r.cum_cost;
    if (r.augmented) {
      ++s.n_augmented;
      if (!s.steps.empty() && s.steps.back() == r.step) ++s.augmented_per_step.back();
    } else {
      ++s.n_direct;
      s.steps.push_back(r.step);
      s.augmented_per_step.push_back(0);
    }
  }
  std::vector<double> xs(s.steps.begin(), s.steps.end());
  std::vector<double> ys(s.augmented_per_step.begin(), s.augmented_per_step.end());
  s.trend_rho = spearman_rho(xs, ys);
  return s;
}

// ---------------------------------------------------------------------------
// Benchmark report rows: one sample per optimization step. With a
// true-utility callback (synthetic objectives) best_utility is the running
// best noise-free utility over every setting evaluated so far, so methods
// with different internal scoring stay on one comparable scale. Without a
// callback it falls back to the method's own best observed y.

struct ReportRow {
  std::string method;
  std::uint64_t seed = 0;
  double cumulative_cost = 0.0;
  double best_utility = 0.0;
};

using TrueUtilityFn = std::function<double(const Eigen::VectorXd& x_raw)>;

inline std::vector<ReportRow> report_rows(const std::vector<EvalRecord>& records,
                                          const TrueUtilityFn& true_utility = nullptr) {
  std::vector<ReportRow> rows;
  double best_util = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < records.size(); ++i) {
    const EvalRecord& r = records[i];
    best_util = std::max(best_util, true_utility ? true_utility(r.x_raw) : r.y);
    const bool step_ends = i + 1 == records.size() || records[i + 1].step != r.step;
    if (step_ends) {
      ReportRow row;
      row.method = r.method;
      row.seed = r.seed;
      row.cumulative_cost = r.cum_cost;
      row.best_utility = best_util;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "method,seed,cumulative_cost,best_utility\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.seed << ','
        << detail::ojson(detail::json_safe(r.cumulative_cost)).dump() << ','
        << detail::ojson(detail::json_safe(r.best_utility)).dump() << '\n';
}

// Summary JSON written next to each run log.
inline detail::ojson result_to_json(const TuneResult& res, const std::string& method,
                                    std::uint64_t seed, KernelKind kernel) {
  detail::ojson j;
  j["method"] = method;
  j["seed"] = seed;
  j["kernel"] = kernel == KernelKind::FreezeThawTime ? "freeze-thaw-t" : "se-product";
  j["x_star"] = detail::ojson::array();
  for (Eigen::Index i = 0; i < res.x_star.size(); ++i) j["x_star"].push_back(res.x_star[i]);
  j["y_star"] = detail::json_safe(res.y_star);
  j["total_cost"] = detail::json_safe(res.total_cost);
  j["n_evals"] = res.n_evals;
  j["n_augmented"] = res.n_augmented;
  return j;
}

}  // namespace boil
