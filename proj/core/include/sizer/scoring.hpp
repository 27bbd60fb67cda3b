#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sizer {

inline constexpr std::string_view kSpecSchema = "sizer.spec/1";

struct MetricSpec {
  std::string name;
  double bound = 0.0;
  int phi = 1;  // +1 lower bound (maximize), -1 upper bound (minimize)
  std::string unit;
};

struct SpecSet {
  std::string circuit;
  std::vector<MetricSpec> metrics;
  std::optional<std::size_t> target;  // index into metrics for single-objective mode
  double failure_penalty = 1.0;       // a failed metric scores -failure_penalty

  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Throws ConfigError on empty or duplicate names, bad signs or an out-of-range target.
  void validate() const;
};

struct Measurement {
  std::map<std::string, double> values;
  std::set<std::string> failed;

  bool is_failed(const std::string& name) const { return failed.count(name) > 0; }
};

enum class ScoreMode { Feasibility, SingleObjective };

struct ScoreVector {
  std::vector<double> r;  // same order as SpecSet::metrics
  double fom = 0.0;
  ScoreMode mode = ScoreMode::Feasibility;
};

/// phi * (F - C) / max(|F|, |C|), or 0 when both are zero.
double score_metric(double measured, double bound, int phi);

ScoreVector fom_feasibility(const SpecSet& spec, const Measurement& meas);
ScoreVector fom_single(const SpecSet& spec, const Measurement& meas);
ScoreVector score(const SpecSet& spec, const Measurement& meas, ScoreMode mode);

/// Copy of `spec` with the target set to the metric called `name`.
SpecSet with_target(SpecSet spec, std::string_view name);

SpecSet spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const SpecSet& spec);
SpecSet load_spec(const std::string& path);

std::string to_string(ScoreMode mode);

}  // namespace sizer
