#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boil/errors.hpp"
#include "boil/objectives.hpp"
#include "boil/search_space.hpp"

// Adapter for real trainers. The child is spawned through /bin/sh, receives
// one JSON object on stdin:
//   {"params": {<name>: <value>, ...}, "max_iter": t, "seed": s}
// and must write one line per iteration to stdout:
//   ITER <u> SCORE <float> COST <float>
// with u = 1..t consecutive and COST the cumulative seconds so far. Lines
// starting with '#' are ignored. Exit status 0 on success.

namespace boil {

namespace detail {

struct PipePair {
  int r = -1, w = -1;
  PipePair() {
    int fds[2];
    if (pipe(fds) != 0) throw ObjectiveError("pipe() failed");
    r = fds[0];
    w = fds[1];
  }
  ~PipePair() {
    if (r >= 0) close(r);
    if (w >= 0) close(w);
  }
};

}  // namespace detail

inline std::string run_child_capture(const std::string& command, const std::string& workdir,
                                     const std::string& stdin_payload, double timeout_s,
                                     std::string& err_out) {
  detail::PipePair in, out, err;
  pid_t pid = fork();
  if (pid < 0) throw ObjectiveError("fork() failed");
  if (pid == 0) {
    dup2(in.r, STDIN_FILENO);
    dup2(out.w, STDOUT_FILENO);
    dup2(err.w, STDERR_FILENO);
    close(in.r);
    close(in.w);
    close(out.r);
    close(out.w);
    close(err.r);
    close(err.w);
    if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(127);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in.r);
  in.r = -1;
  close(out.w);
  out.w = -1;
  close(err.w);
  err.w = -1;

  size_t written = 0;
  while (written < stdin_payload.size()) {
    ssize_t k = write(in.w, stdin_payload.data() + written, stdin_payload.size() - written);
    if (k <= 0) break;  // child may legitimately not read stdin
    written += static_cast<size_t>(k);
  }
  close(in.w);
  in.w = -1;

  std::string stdout_buf, stderr_buf;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  bool timed_out = false;
  char buf[4096];
  while (out.r >= 0 || err.r >= 0) {
    pollfd fds[2];
    int nf = 0;
    int io = -1, ie = -1;
    if (out.r >= 0) {
      io = nf;
      fds[nf++] = {out.r, POLLIN, 0};
    }
    if (err.r >= 0) {
      ie = nf;
      fds[nf++] = {err.r, POLLIN, 0};
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    deadline - std::chrono::steady_clock::now())
                    .count();
    if (left <= 0) {
      timed_out = true;
      break;
    }
    int pr = poll(fds, nf, static_cast<int>(std::min<long long>(left, 1000)));
    if (pr < 0) break;
    if (pr == 0) continue;
    if (io >= 0 && (fds[io].revents & (POLLIN | POLLHUP))) {
      ssize_t k = read(out.r, buf, sizeof buf);
      if (k > 0)
        stdout_buf.append(buf, static_cast<size_t>(k));
      else {
        close(out.r);
        out.r = -1;
      }
    }
    if (ie >= 0 && (fds[ie].revents & (POLLIN | POLLHUP))) {
      ssize_t k = read(err.r, buf, sizeof buf);
      if (k > 0)
        stderr_buf.append(buf, static_cast<size_t>(k));
      else {
        close(err.r);
        err.r = -1;
      }
    }
  }

  int status = 0;
  if (timed_out) {
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
    err_out = stderr_buf;
    throw ObjectiveError("external trainer timed out after " + std::to_string(timeout_s) +
                         "s; stderr tail: " + stderr_buf.substr(stderr_buf.size() > 500
                                                                    ? stderr_buf.size() - 500
                                                                    : 0));
  }
  waitpid(pid, &status, 0);
  err_out = stderr_buf;
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw ObjectiveError("external trainer exited with status " + std::to_string(code) +
                         "; stderr tail: " +
                         stderr_buf.substr(stderr_buf.size() > 500 ? stderr_buf.size() - 500 : 0));
  }
  return stdout_buf;
}

inline LearningCurve parse_trainer_output(const std::string& text, int t,
                                          const Eigen::VectorXd& x_raw) {
  LearningCurve curve;
  curve.x_raw = x_raw;
  std::istringstream in(text);
  std::string line;
  int expect = 1;
  double prev_cost = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kw_iter, kw_score, kw_cost;
    long long u;
    double score, cost;
    if (!(ls >> kw_iter >> u >> kw_score >> score >> kw_cost >> cost) || kw_iter != "ITER" ||
        kw_score != "SCORE" || kw_cost != "COST")
      throw ObjectiveError("malformed trainer line: '" + line + "'");
    if (u != expect)
      throw ObjectiveError("trainer iterations out of order: got " + std::to_string(u) +
                           ", expected " + std::to_string(expect));
    if (!(cost > prev_cost))
      throw ObjectiveError("trainer cumulative cost must increase at iteration " +
                           std::to_string(u));
    curve.scores.push_back(score);
    curve.cum_cost.push_back(cost);
    prev_cost = cost;
    ++expect;
  }
  if (curve.length() != t)
    throw ObjectiveError("trainer produced " + std::to_string(curve.length()) +
                         " iterations, expected " + std::to_string(t));
  return curve;
}

class ExternalObjective : public Objective {
 public:
  ExternalObjective(std::string command, std::string workdir, double timeout_s,
                    SearchSpace space, std::uint64_t seed)
      : command_(std::move(command)),
        workdir_(std::move(workdir)),
        timeout_s_(timeout_s),
        space_(std::move(space)),
        seed_(seed) {
    if (command_.empty()) throw InvalidInput("external objective: empty command");
    if (!(timeout_s_ > 0.0)) throw InvalidInput("external objective: timeout must be positive");
    space_.validate();
  }

  LearningCurve evaluate(const Eigen::VectorXd& x_raw, int t) override {
    nlohmann::json params;
    for (int i = 0; i < space_.dim(); ++i) params[space_.dims[i].name] = x_raw[i];
    nlohmann::json payload{{"params", params}, {"max_iter", t}, {"seed", seed_}};
    std::string err;
    std::string out = run_child_capture(command_, workdir_, payload.dump() + "\n", timeout_s_, err);
    return parse_trainer_output(out, t, x_raw);
  }

 private:
  std::string command_;
  std::string workdir_;
  double timeout_s_;
  SearchSpace space_;
  std::uint64_t seed_;
};

}  // namespace boil
