#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/understanding.hpp"

namespace sizer {

enum class Scale { Linear, Log };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::Linear;

  double to_unit(double x) const;
  double from_unit(double u) const;
};

using ValueMap = std::map<std::string, double>;

enum class Provenance { InitSample, TrustRegion, AdvisorSuggested };
std::string to_string(Provenance p);

struct DesignPoint {
  ValueMap values;
  Provenance provenance = Provenance::InitSample;
};

/// Bound on numerator/denominator, in natural units.
struct RatioConstraint {
  std::string numerator;
  std::string denominator;
  double min = 0.0;
  double max = std::numeric_limits<double>::infinity();
};

/// Advisor pruning: per-variable box tightening plus pairwise ratio constraints.
struct PrunedRegion {
  std::map<std::string, std::pair<double, double>> boxes;
  std::vector<RatioConstraint> ratios;

  bool empty() const { return boxes.empty() && ratios.empty(); }
};

nlohmann::json pruned_to_json(const PrunedRegion& p);
PrunedRegion pruned_from_json(const nlohmann::json& j);

/// The design box with a tying plan applied. Optimization happens in the unit cube over the
/// free (leading) variables; `expand` maps back to every variable in natural units.
class DesignSpace {
 public:
  DesignSpace() = default;
  explicit DesignSpace(std::vector<Variable> variables, const TyingPlan& plan = {});

  const std::vector<Variable>& variables() const noexcept { return all_; }
  const std::vector<Variable>& free_variables() const noexcept { return free_; }
  std::size_t dimension() const noexcept { return free_.size(); }
  std::size_t full_dimension() const noexcept { return all_.size(); }
  const TyingPlan& tying() const noexcept { return plan_; }
  const Variable* find(const std::string& name) const;
  /// Free coordinate that controls `name` (its own, or its tie leader's).
  std::optional<std::size_t> free_index_of(const std::string& name) const;
  /// Free coordinates that appear in pruning ratio constraints.
  std::vector<std::size_t> ratio_coordinates() const;

  ValueMap expand(const std::vector<double>& unit) const;
  /// Free-variable unit coordinates of a full assignment; followers are ignored.
  std::vector<double> reduce(const ValueMap& values) const;

  bool contains(const ValueMap& values, double rel_tol = 1e-9) const;
  /// Throws OutOfBounds naming the first offending or missing variable.
  void check(const ValueMap& values, double rel_tol = 1e-9) const;
  std::vector<double> clip_unit(std::vector<double> unit) const;

  void set_pruned(const PrunedRegion& region);
  const PrunedRegion& pruned() const noexcept { return pruned_; }
  bool has_pruned() const noexcept { return !pruned_.empty(); }
  /// Unit-coordinate box of the pruned region over the free variables.
  const std::vector<double>& pruned_lower() const noexcept { return plo_; }
  const std::vector<double>& pruned_upper() const noexcept { return phi_; }
  bool in_pruned(const std::vector<double>& unit) const;
  bool satisfies_ratios(const std::vector<double>& unit) const;
  /// Fraction of the unit cube covered by the pruned box (ratios ignored).
  double pruned_volume() const;

 private:
  struct Follower {
    std::string name;
    std::size_t leader = 0;  // index into free_
    double ratio = 1.0;
  };

  std::vector<Variable> all_;
  std::vector<Variable> free_;
  std::vector<Follower> followers_;
  TyingPlan plan_;
  PrunedRegion pruned_;
  std::vector<double> plo_, phi_;
};

std::vector<Variable> variables_from_json(const nlohmann::json& j);
nlohmann::json variables_to_json(const std::vector<Variable>& vars);

}  // namespace sizer
