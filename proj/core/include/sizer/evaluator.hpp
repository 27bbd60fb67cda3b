#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/design_space.hpp"
#include "sizer/scoring.hpp"

namespace sizer {

inline constexpr std::string_view kPointSchema = "sizer.point/1";
inline constexpr std::string_view kResultSchema = "sizer.result/1";
inline constexpr std::string_view kModelSchema = "sizer.model/1";

struct EvalResult {
  Measurement measurement;
  double wall_time = 0.0;  // seconds
  std::string evaluator_id;
  std::string error;  // set when the backend failed and every metric is marked failed
};

/// A circuit evaluation backend producing named metrics for a full design point.
class EvaluatorHandle {
 public:
  virtual ~EvaluatorHandle() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> metrics() const = 0;
  /// Throws EvaluatorFailure when no result can be produced.
  virtual Measurement run(const ValueMap& point) = 0;

  std::size_t evaluations() const noexcept { return count_.load(); }
  void count_evaluation() noexcept { ++count_; }

 private:
  std::atomic<std::size_t> count_{0};
};

/// Checks bounds (OutOfBounds), runs the backend and counts the evaluation once.
/// Backend failures come back as failed-status metrics.
EvalResult evaluate(const DesignPoint& point, EvaluatorHandle& backend, const DesignSpace& space);
std::vector<EvalResult> evaluate_batch(const std::vector<DesignPoint>& points, EvaluatorHandle& backend,
                                       const DesignSpace& space, std::size_t max_parallel = 1);

/// Evaluations made through `evaluate` in this process.
std::size_t global_evaluation_count() noexcept;

/// Closed-form analytic stand-in for a benchmark circuit, defined by a coefficient file.
class MockModel : public EvaluatorHandle {
 public:
  static std::unique_ptr<MockModel> builtin(std::string_view name);
  static std::unique_ptr<MockModel> from_json(const nlohmann::json& j);
  static std::unique_ptr<MockModel> from_file(const std::string& path);

  std::string id() const override { return "mock:" + name_; }
  std::vector<std::string> metrics() const override;
  Measurement run(const ValueMap& point) override;

  const std::string& name() const noexcept { return name_; }
  const std::string& title() const noexcept { return title_; }
  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const std::map<std::string, double>& constants() const noexcept { return constants_; }
  const std::map<std::string, std::string>& units() const noexcept { return units_; }
  const ValueMap& certified() const noexcept { return certified_; }
  const ValueMap& nominal() const noexcept { return nominal_; }
  nlohmann::json to_json() const;

 private:
  MockModel() = default;

  std::string name_;
  std::string title_;
  std::vector<Variable> variables_;
  std::map<std::string, double> constants_;
  std::vector<std::string> metric_names_;
  std::map<std::string, std::string> units_;
  ValueMap certified_;
  ValueMap nominal_;
};

std::vector<std::string> mock_model_names();
std::vector<std::unique_ptr<MockModel>> mock_models();

struct ExternalConfig {
  std::string command;
  std::vector<std::string> metrics;
  std::filesystem::path workdir;  // empty: a fresh directory under the system temp path
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  bool keep_files = false;
};

/// Writes `point.json`, runs the command through /bin/sh in a per-evaluation directory
/// (environment SIZER_POINT and SIZER_RESULT hold the two paths) and reads `result.json`.
class ExternalEvaluator : public EvaluatorHandle {
 public:
  explicit ExternalEvaluator(ExternalConfig cfg);
  std::string id() const override { return "extern:" + cfg_.command; }
  std::vector<std::string> metrics() const override { return cfg_.metrics; }
  Measurement run(const ValueMap& point) override;

 private:
  ExternalConfig cfg_;
  std::atomic<std::size_t> serial_{0};
};

nlohmann::json point_to_json(const ValueMap& values);
/// Accepts `{schema, metrics:{...}, failed:[...]}` or a flat `{metric: value}` object;
/// null or missing declared metrics are marked failed.
Measurement result_from_json(const nlohmann::json& j, const std::vector<std::string>& declared);

/// "mock:<name>", "mock:<model.json>" or "extern:<command>"; extern needs the metric names.
std::unique_ptr<EvaluatorHandle> make_evaluator(const std::string& selector,
                                                const std::vector<std::string>& metrics = {});

}  // namespace sizer
