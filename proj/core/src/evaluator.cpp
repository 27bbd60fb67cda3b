#include "sizer/evaluator.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <thread>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

std::atomic<std::size_t> g_evaluations{0};

}  // namespace

std::size_t global_evaluation_count() noexcept { return g_evaluations.load(); }

EvalResult evaluate(const DesignPoint& point, EvaluatorHandle& backend, const DesignSpace& space) {
  space.check(point.values);
  EvalResult out;
  out.evaluator_id = backend.id();
  const auto start = std::chrono::steady_clock::now();
  backend.count_evaluation();
  ++g_evaluations;
  try {
    out.measurement = backend.run(point.values);
  } catch (const EvaluatorFailure& e) {
    out.error = e.what();
    out.measurement = {};
    for (const auto& m : backend.metrics()) out.measurement.failed.insert(m);
  }
  for (const auto& [name, v] : out.measurement.values)
    if (!std::isfinite(v)) out.measurement.failed.insert(name);
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<EvalResult> evaluate_batch(const std::vector<DesignPoint>& points, EvaluatorHandle& backend,
                                       const DesignSpace& space, std::size_t max_parallel) {
  for (const auto& p : points) space.check(p.values);
  std::vector<EvalResult> out(points.size());
  max_parallel = std::max<std::size_t>(1, max_parallel);
  for (std::size_t start = 0; start < points.size(); start += max_parallel) {
    const std::size_t end = std::min(points.size(), start + max_parallel);
    if (end - start == 1) {
      out[start] = evaluate(points[start], backend, space);
      continue;
    }
    std::vector<std::future<EvalResult>> jobs;
    for (std::size_t i = start; i < end; ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] { return evaluate(points[i], backend, space); }));
    for (std::size_t i = start; i < end; ++i) out[i] = jobs[i - start].get();
  }
  return out;
}

json point_to_json(const ValueMap& values) {
  return {{"schema", std::string(kPointSchema)}, {"values", values}};
}

Measurement result_from_json(const json& j, const std::vector<std::string>& declared) {
  if (!j.is_object()) throw EvaluatorFailure("result document is not a JSON object");
  const json& metrics = j.contains("metrics") && j.at("metrics").is_object() ? j.at("metrics") : j;
  Measurement m;
  if (j.contains("failed") && j.at("failed").is_array())
    for (const auto& f : j.at("failed"))
      if (f.is_string()) m.failed.insert(f.get<std::string>());
  for (const auto& name : declared) {
    if (m.failed.count(name)) continue;
    auto it = metrics.find(name);
    if (it == metrics.end() || !it->is_number()) {
      m.failed.insert(name);
      continue;
    }
    m.values[name] = it->get<double>();
  }
  return m;
}

ExternalEvaluator::ExternalEvaluator(ExternalConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) throw ConfigError("external evaluator needs a command");
  if (cfg_.metrics.empty()) throw ConfigError("external evaluator needs the list of metrics it reports");
  if (cfg_.workdir.empty())
    cfg_.workdir = std::filesystem::temp_directory_path() / ("sizer-eval-" + std::to_string(::getpid()));
}

Measurement ExternalEvaluator::run(const ValueMap& point) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg_.workdir / ("eval-" + std::to_string(serial_++));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw EvaluatorFailure("cannot create evaluation directory " + dir.string() + ": " + ec.message());
  const fs::path point_file = dir / "point.json";
  const fs::path result_file = dir / "result.json";
  {
    std::ofstream out(point_file);
    if (!out) throw EvaluatorFailure("cannot write " + point_file.string());
    out << point_to_json(point).dump(1) << "\n";
  }

  const pid_t pid = ::fork();
  if (pid < 0) throw EvaluatorFailure(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    if (::chdir(dir.c_str()) != 0) ::_exit(126);
    ::setenv("SIZER_POINT", point_file.c_str(), 1);
    ::setenv("SIZER_RESULT", result_file.c_str(), 1);
    int log = ::open("command.log", O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (log >= 0) {
      ::dup2(log, STDOUT_FILENO);
      ::dup2(log, STDERR_FILENO);
      ::close(log);
    }
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", cfg_.command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw EvaluatorFailure(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw EvaluatorFailure("evaluator command timed out after " + std::to_string(cfg_.timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw EvaluatorFailure("evaluator command failed with status " +
                           std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + " (see " +
                           (dir / "command.log").string() + ")");

  std::ifstream in(result_file);
  if (!in) throw EvaluatorFailure("evaluator command produced no " + result_file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw EvaluatorFailure("result.json is not valid JSON: " + std::string(e.what()));
  }
  Measurement m = result_from_json(j, cfg_.metrics);
  if (!cfg_.keep_files) fs::remove_all(dir, ec);
  return m;
}

std::unique_ptr<EvaluatorHandle> make_evaluator(const std::string& selector, const std::vector<std::string>& metrics) {
  if (selector.rfind("mock:", 0) == 0) {
    const std::string arg = selector.substr(5);
    if (arg.size() > 5 && arg.substr(arg.size() - 5) == ".json") return MockModel::from_file(arg);
    return MockModel::builtin(arg);
  }
  if (selector.rfind("extern:", 0) == 0) {
    ExternalConfig cfg;
    cfg.command = selector.substr(7);
    cfg.metrics = metrics;
    return std::make_unique<ExternalEvaluator>(cfg);
  }
  throw ConfigError("unknown evaluator selector '" + selector + "' (expected mock:<name> or extern:<command>)");
}

}  // namespace sizer
