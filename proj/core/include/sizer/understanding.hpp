#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/advisor.hpp"
#include "sizer/hierarchy.hpp"

namespace sizer {

struct Annotation {
  std::map<std::string, std::string> device_roles;
  std::map<std::string, std::string> module_functions;
  std::map<std::string, std::string> stage_functions;
  std::map<std::string, double> confidence;  // keyed by device, module or stage name

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

nlohmann::json annotation_to_json(const Annotation& a);
/// Strict parse; throws SchemaError naming the first problem.
Annotation annotation_from_json(const nlohmann::json& j);

struct CheckResult {
  bool pass = true;
  std::vector<std::string> offending;  // "<item>: <reason>"
};

struct ChecklistReport {
  CheckResult coverage;     // every item identified
  CheckResult consistency;  // roles agree with topology inside stages
  CheckResult alignment;    // functions agree with hierarchy position

  bool pass() const { return coverage.pass && consistency.pass && alignment.pass; }
  std::vector<std::string> offending_items() const;
};

nlohmann::json checklist_to_json(const ChecklistReport& r);

struct LoopConfig {
  double confidence_threshold = 0.8;
  int max_rounds = 5;
  int retries = 1;  // repair attempts after a malformed reply
};

struct UnderstandResult {
  Annotation annotation;
  ChecklistReport report;
  bool converged = false;
  int rounds = 0;
};

/// Recommended role and function vocabulary; the checklist knows how to verify these.
const std::vector<std::string>& device_role_vocabulary();
const std::vector<std::string>& stage_function_vocabulary();

ChecklistReport run_checklist(const Hierarchy& h, const Annotation& ann);

/// Hypothesis, self-assessment and refinement rounds until every item is confident
/// and the checklist passes, or the round limit is reached.
UnderstandResult understand(const Hierarchy& h, AdvisorSession& session, const LoopConfig& cfg = {});

struct TieGroup {
  enum class Relation { Equal, Ratio };
  std::vector<std::string> variables;  // first entry leads
  Relation relation = Relation::Equal;
  long ratio_num = 1;  // Ratio: variables[1] = num/den * variables[0]
  long ratio_den = 1;
  std::string origin;  // "structure" or "advisor"

  double ratio() const { return static_cast<double>(ratio_num) / static_cast<double>(ratio_den); }
  friend bool operator==(const TieGroup&, const TieGroup&) = default;
};

struct TyingPlan {
  std::vector<TieGroup> groups;
  std::size_t variable_count = 0;
  std::size_t reduced_dimension = 0;
  std::vector<std::string> dropped;  // rejected advisor suggestions with reasons
};

nlohmann::json tying_to_json(const TyingPlan& p);
TyingPlan tying_from_json(const nlohmann::json& j);

/// Equal groups from symmetric module members, plus validated advisor suggestions.
TyingPlan assign_parameters(const Hierarchy& h, const Annotation& ann, AdvisorSession& session,
                            const std::vector<std::string>& variables);

/// Structural groups only.
TyingPlan structural_tying(const Hierarchy& h, const std::vector<std::string>& variables);

/// Design-variable symbols used by the hierarchy's devices, sorted.
std::vector<std::string> design_symbols(const Hierarchy& h);

}  // namespace sizer
