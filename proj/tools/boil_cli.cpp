// Command-line harness: tune / bench / replay / export, plus a mock trainer
// speaking the external-objective wire protocol (used by the test suite and
// as a reference for wiring up real training scripts).

#include <CLI11.hpp>

#include <boil/boil.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return nlohmann::json(boil::detail::json_safe(v)).dump(); }

std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += num(v[i]);
  }
  return s + "]";
}

struct CliOverrides {
  std::string config_path;
  std::string method;
  std::string fixture;
  std::string preference;
  std::string kernel;
  std::string output_dir;
  std::vector<std::uint64_t> seeds;
  int n = 0;
  int m = -1;
  int window = 0;
  double delta = 0.0;
};

void add_override_flags(CLI::App* cmd, CliOverrides& o, bool with_method) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  if (with_method) cmd->add_option("--method", o.method, "boil|bo|bo-l|cmtf|random|hyperband");
  cmd->add_option("--fixture", o.fixture, "bundled search-space fixture");
  cmd->add_option("--seeds,--seed", o.seeds, "run seeds")->delimiter(',');
  cmd->add_option("--n", o.n, "number of objective evaluations");
  cmd->add_option("--m", o.m, "max augmented points per evaluation");
  cmd->add_option("--delta", o.delta, "ln condition-number cap");
  cmd->add_option("--kernel", o.kernel, "se-product|freeze-thaw-t");
  cmd->add_option("--preference", o.preference, "sigmoid|log|average");
  cmd->add_option("--window", o.window, "window for the average preference");
  cmd->add_option("--output-dir", o.output_dir, "directory for logs and reports");
}

boil::RunConfig build_config(const CliOverrides& o) {
  boil::RunConfig cfg;
  bool have_base = false;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw boil::InvalidInput("cannot open config file: " + o.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = boil::parse_run_config(ss.str());
    have_base = true;
  }
  if (!o.fixture.empty()) {
    cfg.fixture = o.fixture;
    std::tie(cfg.space, cfg.objective) = boil::fixture(o.fixture);
    have_base = true;
  }
  if (!have_base)
    throw boil::InvalidInput("need --config or --fixture to define the search space");
  if (!o.method.empty()) cfg.methods = {boil::method_from_name(o.method)};
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.n > 0) cfg.options.n_evals = o.n;
  if (o.m >= 0) cfg.options.max_augment = o.m;
  if (o.delta > 0) cfg.options.delta = o.delta;
  if (o.window > 0) cfg.options.avg_window = o.window;
  if (!o.preference.empty())
    cfg.options.preference = boil::detail::preference_from_json(
        nlohmann::ordered_json(o.preference), cfg.options.avg_window);
  if (!o.kernel.empty()) {
    if (o.kernel == "se-product") cfg.options.kernel = boil::KernelKind::SeProduct;
    else if (o.kernel == "freeze-thaw-t") cfg.options.kernel = boil::KernelKind::FreezeThawTime;
    else throw boil::InvalidInput("kernel must be se-product or freeze-thaw-t");
  }
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  cfg.space.validate();
  return cfg;
}

std::string run_base_path(const boil::RunConfig& cfg, boil::Method method, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) /
          (std::string(boil::method_name(method)) + "-" + std::to_string(seed)))
      .string();
}

boil::TuneResult run_one(const boil::RunConfig& cfg, boil::Method method, std::uint64_t seed) {
  const std::string base = run_base_path(cfg, method, seed);
  std::ofstream log(base + ".jsonl", std::ios::trunc);
  if (!log) throw boil::InvalidInput("cannot write log file: " + base + ".jsonl");
  auto objective = boil::make_objective(cfg, seed);
  boil::TuneResult res = boil::run_method(
      method, *objective, cfg.space, cfg.options, seed,
      [&log](const boil::EvalRecord& r) { log << boil::record_to_line(r); });
  log.flush();
  std::ofstream summary(base + ".summary.json", std::ios::trunc);
  summary << boil::result_to_json(res, boil::method_name(method), seed, cfg.options.kernel).dump(2)
          << "\n";
  return res;
}

// Runs every (method, seed) pair, one log file per run. Output lines are
// buffered and printed in job order so stdout is deterministic regardless of
// scheduling.
void run_all(const boil::RunConfig& cfg, const std::vector<boil::Method>& methods) {
  fs::create_directories(cfg.output_dir);
  struct Job {
    boil::Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (boil::Method m : methods)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({m, s});

  std::vector<std::string> lines(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        boil::TuneResult r = run_one(cfg, jobs[i].method, jobs[i].seed);
        std::ostringstream os;
        os << boil::method_name(jobs[i].method) << " seed=" << jobs[i].seed
           << " y*=" << num(r.y_star) << " x*=" << vec(r.x_star)
           << " cost=" << num(r.total_cost) << " evals=" << r.n_evals
           << " augmented=" << r.n_augmented;
        lines[i] = os.str();
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };

  const size_t nthreads =
      std::min<size_t>(std::max(1u, std::thread::hardware_concurrency()), jobs.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& line : lines) std::cout << line << "\n";
}

boil::TrueUtilityFn make_true_utility(const boil::RunConfig& cfg) {
  if (cfg.objective.kind != boil::ObjectiveConfig::Kind::Synthetic) return nullptr;
  const boil::SyntheticCurveSpec spec = cfg.objective.synthetic;
  const boil::SearchSpace space = cfg.space;
  const boil::Preference pref = boil::Preference::average(cfg.options.avg_window);
  return [spec, space, pref](const Eigen::VectorXd& x_raw) {
    return boil::compress(boil::SyntheticObjective::noise_free(spec, space, x_raw, space.t_max),
                          pref);
  };
}

void write_report(const boil::RunConfig& cfg, const std::vector<std::string>& files,
                  const std::string& out_path) {
  const boil::TrueUtilityFn fn = make_true_utility(cfg);
  std::vector<boil::ReportRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw boil::InvalidInput("cannot open log: " + f);
    boil::LogContents lc = boil::read_log(in);
    if (lc.truncated_tail)
      std::cerr << "warning: " << f << ": truncated final line ignored\n";
    auto r = boil::report_rows(lc.records, fn);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw boil::InvalidInput("cannot write report: " + out_path);
  boil::write_report_csv(out, rows);
  std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
}

int cmd_tune(const CliOverrides& o) {
  const boil::RunConfig cfg = build_config(o);
  run_all(cfg, {cfg.methods.front()});
  return 0;
}

int cmd_bench(const CliOverrides& o) {
  const boil::RunConfig cfg = build_config(o);
  if (cfg.methods.size() < 2)
    throw boil::InvalidInput("bench needs at least two methods in the config");
  run_all(cfg, cfg.methods);
  std::vector<std::string> files;
  for (boil::Method m : cfg.methods)
    for (std::uint64_t s : cfg.seeds) files.push_back(run_base_path(cfg, m, s) + ".jsonl");
  write_report(cfg, files, (fs::path(cfg.output_dir) / "report.csv").string());
  return 0;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw boil::InvalidInput("cannot open log: " + path);
  boil::LogContents lc = boil::read_log(in);
  if (lc.truncated_tail) std::cerr << "warning: truncated final line ignored\n";
  boil::ReplaySummary s = boil::summarize_log(lc.records);
  std::cout << "records: " << lc.records.size() << " (direct " << s.n_direct << ", augmented "
            << s.n_augmented << ")\n";
  std::cout << "x*: " << vec(s.x_star) << "\n";
  std::cout << "y*: " << num(s.y_star) << "\n";
  std::cout << "total cost: " << num(s.total_cost) << "\n";
  std::cout << "augmented per step:";
  for (int c : s.augmented_per_step) std::cout << ' ' << c;
  std::cout << "\n";
  std::cout << "trend spearman(step, augmented): " << num(s.trend_rho) << "\n";
  return 0;
}

int cmd_export(const CliOverrides& o, std::vector<std::string> files, std::string out_path) {
  boil::RunConfig cfg;  // only used for the true-utility callback
  bool have_cfg = false;
  if (!o.config_path.empty() || !o.fixture.empty()) {
    cfg = build_config(o);
    have_cfg = true;
  }
  if (files.empty()) {
    const std::string dir = !o.output_dir.empty() ? o.output_dir
                            : have_cfg            ? cfg.output_dir
                                                  : std::string();
    if (dir.empty())
      throw boil::InvalidInput("export needs log paths, --output-dir, or --config");
    if (!fs::is_directory(dir)) throw boil::InvalidInput("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw boil::InvalidInput("no .jsonl logs in " + dir);
  }
  if (out_path.empty())
    out_path = !o.output_dir.empty() ? (fs::path(o.output_dir) / "report.csv").string()
                                     : "report.csv";
  if (!have_cfg) cfg.objective.kind = boil::ObjectiveConfig::Kind::External;  // no true utility
  write_report(cfg, files, out_path);
  return 0;
}

// Child side of the wire protocol, backed by a synthetic fixture. Reads the
// request JSON from stdin, writes ITER lines to stdout.
int cmd_mock_trainer(const std::string& fixture_name) {
  std::stringstream ss;
  ss << std::cin.rdbuf();
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mock-trainer: bad request: " << e.what() << "\n";
    return 2;
  }
  auto [space, obj] = boil::fixture(fixture_name);
  Eigen::VectorXd x(space.dim());
  try {
    const auto& params = req.at("params");
    for (int i = 0; i < space.dim(); ++i) x[i] = params.at(space.dims[i].name).get<double>();
    const int t = req.at("max_iter").get<int>();
    const std::uint64_t seed = req.at("seed").get<std::uint64_t>();
    boil::SyntheticObjective objective(obj.synthetic, space, seed);
    boil::LearningCurve c = objective.evaluate(x, t);
    std::cout << "# mock trainer, fixture " << fixture_name << "\n";
    for (size_t u = 0; u < c.scores.size(); ++u)
      std::cout << "ITER " << (u + 1) << " SCORE " << num(c.scores[u]) << " COST "
                << num(c.cum_cost[u]) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mock-trainer: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperparameter tuner for iterative learning jobs"};
  app.require_subcommand(1);

  CliOverrides tune_o, bench_o, export_o;
  std::string replay_path, export_out;
  std::vector<std::string> export_files;
  std::string trainer_fixture = "synthetic-1d";

  CLI::App* tune = app.add_subcommand("tune", "run one method over the configured seeds");
  add_override_flags(tune, tune_o, true);

  CLI::App* bench = app.add_subcommand("bench", "run all configured methods and export report.csv");
  add_override_flags(bench, bench_o, false);

  CLI::App* replay = app.add_subcommand("replay", "summarize a run log");
  replay->add_option("log", replay_path, "path to a .jsonl run log")->required();

  CLI::App* exp = app.add_subcommand("export", "assemble report.csv from run logs");
  add_override_flags(exp, export_o, false);
  exp->add_option("logs", export_files, "log files (default: all .jsonl in --output-dir)");
  exp->add_option("--out", export_out, "output csv path");

  CLI::App* trainer = app.add_subcommand("mock-trainer", "wire-protocol trainer for testing");
  trainer->add_option("--fixture", trainer_fixture, "synthetic fixture backing the trainer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(tune)) return cmd_tune(tune_o);
    if (app.got_subcommand(bench)) return cmd_bench(bench_o);
    if (app.got_subcommand(replay)) return cmd_replay(replay_path);
    if (app.got_subcommand(exp)) return cmd_export(export_o, export_files, export_out);
    if (app.got_subcommand(trainer)) return cmd_mock_trainer(trainer_fixture);
    return 2;
  } catch (const boil::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const boil::ObjectiveError& e) {
    std::cerr << "objective failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
