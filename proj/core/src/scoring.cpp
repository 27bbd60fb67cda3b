#include "sizer/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

std::optional<std::size_t> SpecSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < metrics.size(); ++i)
    if (metrics[i].name == name) return i;
  return std::nullopt;
}

void SpecSet::validate() const {
  if (metrics.empty()) throw ConfigError("spec set has no metrics");
  std::set<std::string> seen;
  for (const auto& m : metrics) {
    if (m.name.empty()) throw ConfigError("spec metric without a name");
    if (!seen.insert(m.name).second) throw ConfigError("duplicate spec metric '" + m.name + "'");
    if (m.phi != 1 && m.phi != -1) throw ConfigError("metric '" + m.name + "' direction must be +1 or -1");
    if (!std::isfinite(m.bound)) throw ConfigError("metric '" + m.name + "' has a non-finite bound");
  }
  if (target && *target >= metrics.size()) throw ConfigError("spec target index out of range");
  if (!std::isfinite(failure_penalty) || failure_penalty < 0) throw ConfigError("failure penalty must be >= 0");
}

double score_metric(double measured, double bound, int phi) {
  if (!std::isfinite(measured) || !std::isfinite(bound))
    throw NonFiniteInput("score_metric needs finite inputs");
  const double denom = std::max(std::abs(measured), std::abs(bound));
  if (denom == 0.0) return 0.0;
  return static_cast<double>(phi) * (measured - bound) / denom;
}

namespace {

std::vector<double> metric_scores(const SpecSet& spec, const Measurement& meas) {
  std::vector<double> r;
  r.reserve(spec.metrics.size());
  for (const auto& m : spec.metrics) {
    if (meas.is_failed(m.name)) {
      r.push_back(-spec.failure_penalty);
      continue;
    }
    auto it = meas.values.find(m.name);
    if (it == meas.values.end()) throw MissingMetric(m.name);
    if (!std::isfinite(it->second)) throw NonFiniteInput("metric '" + m.name + "' is not finite");
    r.push_back(score_metric(it->second, m.bound, m.phi));
  }
  return r;
}

}  // namespace

ScoreVector fom_feasibility(const SpecSet& spec, const Measurement& meas) {
  ScoreVector s;
  s.mode = ScoreMode::Feasibility;
  s.r = metric_scores(spec, meas);
  for (double r : s.r) s.fom += std::min(0.0, r);
  return s;
}

ScoreVector fom_single(const SpecSet& spec, const Measurement& meas) {
  if (!spec.target) throw ConfigError("single-objective scoring needs a target metric");
  ScoreVector s;
  s.mode = ScoreMode::SingleObjective;
  s.r = metric_scores(spec, meas);
  const std::size_t t = *spec.target;
  double penalty = 0.0;
  bool satisfied = true;
  for (std::size_t i = 0; i < s.r.size(); ++i) {
    if (i == t) continue;
    penalty += std::min(0.0, s.r[i]);
    if (s.r[i] < 0) satisfied = false;
  }
  const double reward = satisfied ? s.r[t] : std::min(0.0, s.r[t]);
  s.fom = penalty + reward;
  return s;
}

ScoreVector score(const SpecSet& spec, const Measurement& meas, ScoreMode mode) {
  return mode == ScoreMode::Feasibility ? fom_feasibility(spec, meas) : fom_single(spec, meas);
}

SpecSet with_target(SpecSet spec, std::string_view name) {
  auto idx = spec.index_of(name);
  if (!idx) throw ConfigError("target metric '" + std::string(name) + "' is not in the spec set");
  spec.target = idx;
  return spec;
}

SpecSet spec_from_json(const json& j) {
  try {
    if (j.value("schema", std::string(kSpecSchema)) != kSpecSchema)
      throw SchemaError("unknown spec schema '" + j.at("schema").get<std::string>() + "'");
    SpecSet s;
    s.circuit = j.value("circuit", std::string{});
    s.failure_penalty = j.value("failure_penalty", 1.0);
    for (const auto& mj : j.at("metrics")) {
      MetricSpec m;
      m.name = mj.at("name").get<std::string>();
      m.bound = mj.at("bound").get<double>();
      const auto dir = mj.at("direction").get<std::string>();
      if (dir == "max" || dir == ">=")
        m.phi = 1;
      else if (dir == "min" || dir == "<=")
        m.phi = -1;
      else
        throw SchemaError("metric '" + m.name + "' has unknown direction '" + dir + "'");
      m.unit = mj.value("unit", std::string{});
      if (mj.value("target", false)) {
        if (s.target) throw SchemaError("more than one target metric");
        s.target = s.metrics.size();
      }
      s.metrics.push_back(std::move(m));
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("spec document is malformed: ") + e.what());
  }
}

json spec_to_json(const SpecSet& spec) {
  json metrics = json::array();
  for (std::size_t i = 0; i < spec.metrics.size(); ++i) {
    const auto& m = spec.metrics[i];
    json mj{{"name", m.name}, {"bound", m.bound}, {"direction", m.phi > 0 ? "max" : "min"}, {"unit", m.unit}};
    if (spec.target && *spec.target == i) mj["target"] = true;
    metrics.push_back(mj);
  }
  return {{"schema", std::string(kSpecSchema)},
          {"circuit", spec.circuit},
          {"failure_penalty", spec.failure_penalty},
          {"metrics", metrics}};
}

SpecSet load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("spec file '" + path + "' is not valid JSON: " + e.what());
  }
  return spec_from_json(j);
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::Feasibility ? "feasibility" : "single"; }

}  // namespace sizer
