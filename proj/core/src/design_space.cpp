#include "sizer/design_space.hpp"

#include <algorithm>
#include <cmath>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

double Variable::to_unit(double x) const {
  if (scale == Scale::Log) return (std::log(x) - std::log(lower)) / (std::log(upper) - std::log(lower));
  return (x - lower) / (upper - lower);
}

double Variable::from_unit(double u) const {
  if (scale == Scale::Log) return std::exp(std::log(lower) + u * (std::log(upper) - std::log(lower)));
  return lower + u * (upper - lower);
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::InitSample: return "init-sample";
    case Provenance::TrustRegion: return "trust-region";
    case Provenance::AdvisorSuggested: return "advisor-suggested";
  }
  return "unknown";
}

DesignSpace::DesignSpace(std::vector<Variable> variables, const TyingPlan& plan)
    : all_(std::move(variables)), plan_(plan) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all_.size(); ++i) {
    const auto& v = all_[i];
    if (!(v.lower < v.upper)) throw ConfigError("variable '" + v.name + "' needs lower < upper");
    if (v.scale == Scale::Log && v.lower <= 0) throw ConfigError("log-scaled variable '" + v.name + "' needs lower > 0");
    if (!index.emplace(v.name, i).second) throw ConfigError("duplicate variable '" + v.name + "'");
  }

  // follower name -> (leader name, ratio)
  std::map<std::string, std::pair<std::string, double>> follows;
  for (const auto& g : plan_.groups) {
    if (g.variables.size() < 2) continue;
    for (const auto& n : g.variables) {
      if (!index.count(n)) throw ConfigError("tying group names unknown variable '" + n + "'");
      if (follows.count(n)) throw ConfigError("variable '" + n + "' is tied twice");
    }
    const double ratio = g.relation == TieGroup::Relation::Ratio ? g.ratio() : 1.0;
    if (!(ratio > 0)) throw ConfigError("tie ratio must be positive");
    for (std::size_t k = 1; k < g.variables.size(); ++k) follows[g.variables[k]] = {g.variables[0], ratio};
  }
  for (const auto& [f, lr] : follows)
    if (follows.count(lr.first)) throw ConfigError("tie leader '" + lr.first + "' is itself a follower");

  std::map<std::string, std::size_t> free_index;
  for (const auto& v : all_) {
    if (follows.count(v.name)) continue;
    free_index[v.name] = free_.size();
    free_.push_back(v);
  }
  for (const auto& v : all_) {
    auto it = follows.find(v.name);
    if (it == follows.end()) continue;
    const auto [leader, ratio] = it->second;
    Variable& lv = free_[free_index.at(leader)];
    lv.lower = std::max(lv.lower, v.lower / ratio);
    lv.upper = std::min(lv.upper, v.upper / ratio);
    if (!(lv.lower < lv.upper))
      throw ConfigError("tying '" + v.name + "' to '" + leader + "' leaves an empty range");
    followers_.push_back({v.name, free_index.at(leader), ratio});
  }
  plan_.variable_count = all_.size();
  plan_.reduced_dimension = free_.size();
  plo_.assign(free_.size(), 0.0);
  phi_.assign(free_.size(), 1.0);
}

const Variable* DesignSpace::find(const std::string& name) const {
  for (const auto& v : all_)
    if (v.name == name) return &v;
  return nullptr;
}

std::optional<std::size_t> DesignSpace::free_index_of(const std::string& name) const {
  for (std::size_t i = 0; i < free_.size(); ++i)
    if (free_[i].name == name) return i;
  for (const auto& f : followers_)
    if (f.name == name) return f.leader;
  return std::nullopt;
}

std::vector<std::size_t> DesignSpace::ratio_coordinates() const {
  std::vector<std::size_t> out;
  for (const auto& r : pruned_.ratios)
    for (const auto* n : {&r.numerator, &r.denominator})
      if (auto i = free_index_of(*n); i && std::find(out.begin(), out.end(), *i) == out.end()) out.push_back(*i);
  std::sort(out.begin(), out.end());
  return out;
}

ValueMap DesignSpace::expand(const std::vector<double>& unit) const {
  if (unit.size() != free_.size()) throw ConfigError("unit point has wrong dimension");
  ValueMap out;
  std::vector<double> natural(free_.size());
  for (std::size_t i = 0; i < free_.size(); ++i) {
    natural[i] = free_[i].from_unit(std::clamp(unit[i], 0.0, 1.0));
    out[free_[i].name] = natural[i];
  }
  for (const auto& f : followers_) {
    const Variable* v = find(f.name);
    out[f.name] = std::clamp(f.ratio * natural[f.leader], v->lower, v->upper);
  }
  return out;
}

std::vector<double> DesignSpace::reduce(const ValueMap& values) const {
  std::vector<double> u(free_.size());
  for (std::size_t i = 0; i < free_.size(); ++i) {
    auto it = values.find(free_[i].name);
    if (it == values.end()) throw OutOfBounds("point lacks variable '" + free_[i].name + "'");
    u[i] = free_[i].to_unit(it->second);
  }
  return u;
}

bool DesignSpace::contains(const ValueMap& values, double rel_tol) const {
  try {
    check(values, rel_tol);
    return true;
  } catch (const OutOfBounds&) {
    return false;
  }
}

void DesignSpace::check(const ValueMap& values, double rel_tol) const {
  for (const auto& v : all_) {
    auto it = values.find(v.name);
    if (it == values.end()) throw OutOfBounds("point lacks variable '" + v.name + "'");
    const double x = it->second;
    const double slack = rel_tol * std::max(std::abs(v.lower), std::abs(v.upper));
    if (!std::isfinite(x) || x < v.lower - slack || x > v.upper + slack)
      throw OutOfBounds("variable '" + v.name + "' = " + std::to_string(x) + " outside [" + std::to_string(v.lower) +
                        ", " + std::to_string(v.upper) + "]");
  }
  for (const auto& f : followers_) {
    const double lead = values.at(free_[f.leader].name);
    const double x = values.at(f.name);
    if (std::abs(x - f.ratio * lead) > rel_tol * std::abs(f.ratio * lead) + 1e-300)
      throw OutOfBounds("tied variable '" + f.name + "' disagrees with '" + free_[f.leader].name + "'");
  }
}

std::vector<double> DesignSpace::clip_unit(std::vector<double> unit) const {
  for (auto& u : unit) u = std::clamp(u, 0.0, 1.0);
  return unit;
}

void DesignSpace::set_pruned(const PrunedRegion& region) {
  plo_.assign(free_.size(), 0.0);
  phi_.assign(free_.size(), 1.0);
  std::map<std::string, std::size_t> free_index;
  for (std::size_t i = 0; i < free_.size(); ++i) free_index[free_[i].name] = i;

  for (const auto& [name, box] : region.boxes) {
    double lo = box.first, hi = box.second;
    std::size_t idx = 0;
    if (auto it = free_index.find(name); it != free_index.end()) {
      idx = it->second;
    } else {
      auto f = std::find_if(followers_.begin(), followers_.end(), [&](const Follower& x) { return x.name == name; });
      if (f == followers_.end()) throw ConfigError("pruned box names unknown variable '" + name + "'");
      idx = f->leader;
      lo /= f->ratio;
      hi /= f->ratio;
    }
    const Variable& v = free_[idx];
    lo = std::max(lo, v.lower);
    hi = std::min(hi, v.upper);
    if (!(lo < hi)) throw ConfigError("pruned box for '" + name + "' does not intersect its bounds");
    plo_[idx] = std::max(plo_[idx], v.to_unit(lo));
    phi_[idx] = std::min(phi_[idx], v.to_unit(hi));
    if (!(plo_[idx] < phi_[idx])) throw ConfigError("pruned boxes for '" + v.name + "' do not overlap");
  }
  for (const auto& r : region.ratios) {
    if (!find(r.numerator) || !find(r.denominator))
      throw ConfigError("ratio constraint names unknown variable '" + r.numerator + "/" + r.denominator + "'");
    if (!(r.min < r.max)) throw ConfigError("ratio constraint needs min < max");
  }
  pruned_ = region;
}

bool DesignSpace::satisfies_ratios(const std::vector<double>& unit) const {
  if (pruned_.ratios.empty()) return true;
  const ValueMap x = expand(unit);
  for (const auto& r : pruned_.ratios) {
    const double q = x.at(r.numerator) / x.at(r.denominator);
    if (q < r.min || q > r.max) return false;
  }
  return true;
}

bool DesignSpace::in_pruned(const std::vector<double>& unit) const {
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i < unit.size(); ++i)
    if (unit[i] < plo_[i] - tol || unit[i] > phi_[i] + tol) return false;
  return satisfies_ratios(unit);
}

double DesignSpace::pruned_volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < plo_.size(); ++i) v *= phi_[i] - plo_[i];
  return v;
}

json pruned_to_json(const PrunedRegion& p) {
  json boxes = json::object();
  for (const auto& [n, b] : p.boxes) boxes[n] = {b.first, b.second};
  json ratios = json::array();
  for (const auto& r : p.ratios) {
    json rj{{"num", r.numerator}, {"den", r.denominator}, {"min", r.min}};
    if (std::isfinite(r.max)) rj["max"] = r.max;
    ratios.push_back(rj);
  }
  return {{"box", boxes}, {"ratios", ratios}};
}

PrunedRegion pruned_from_json(const json& j) {
  try {
    PrunedRegion p;
    if (!j.is_object()) throw SchemaError("pruned region must be an object");
    if (j.contains("box"))
      for (const auto& [n, b] : j.at("box").items()) {
        if (!b.is_array() || b.size() != 2) throw SchemaError("pruned box for '" + n + "' must be [lower, upper]");
        p.boxes[n] = {b.at(0).get<double>(), b.at(1).get<double>()};
      }
    if (j.contains("ratios"))
      for (const auto& rj : j.at("ratios")) {
        RatioConstraint r;
        r.numerator = rj.at("num").get<std::string>();
        r.denominator = rj.at("den").get<std::string>();
        r.min = rj.value("min", 0.0);
        r.max = rj.value("max", std::numeric_limits<double>::infinity());
        p.ratios.push_back(std::move(r));
      }
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("pruned region is malformed: ") + e.what());
  }
}

std::vector<Variable> variables_from_json(const json& j) {
  try {
    std::vector<Variable> out;
    for (const auto& vj : j) {
      Variable v;
      v.name = vj.at("name").get<std::string>();
      v.lower = vj.at("lower").get<double>();
      v.upper = vj.at("upper").get<double>();
      const auto s = vj.value("scale", std::string("linear"));
      if (s == "log")
        v.scale = Scale::Log;
      else if (s == "linear")
        v.scale = Scale::Linear;
      else
        throw SchemaError("variable '" + v.name + "' has unknown scale '" + s + "'");
      out.push_back(std::move(v));
    }
    return out;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("variable list is malformed: ") + e.what());
  }
}

json variables_to_json(const std::vector<Variable>& vars) {
  json out = json::array();
  for (const auto& v : vars)
    out.push_back({{"name", v.name}, {"lower", v.lower}, {"upper", v.upper},
                   {"scale", v.scale == Scale::Log ? "log" : "linear"}});
  return out;
}

}  // namespace sizer
