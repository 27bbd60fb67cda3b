#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/circuit_graph.hpp"

namespace sizer {

struct PatternNet {
  std::string label;
  std::string role;  // empty for enclosed nets
  bool conducts = true;
  bool internal = false;  // circuit net may touch no device outside the match
  bool not_rail = false;
};

struct PatternDevice {
  std::string label;
  NodeKind kind = NodeKind::Nmos;
  std::map<TerminalRole, std::size_t> nets;  // G/S/D -> index into Template::nets
};

struct Template {
  std::string name;
  int priority = 0;
  std::vector<Polarity> polarities;  // variants to instantiate
  std::vector<PatternDevice> devices;
  std::vector<PatternNet> nets;
  std::vector<std::pair<std::string, std::string>> symmetry;

  /// Pattern with MOS kinds flipped for the P variant.
  std::vector<PatternDevice> devices_for(Polarity polarity) const;
};

struct MatchResult {
  std::string template_name;
  int priority = 0;
  Polarity polarity = Polarity::N;
  std::map<std::string, std::string> device_binding;  // pattern device -> circuit device
  std::map<std::string, std::string> net_binding;     // pattern net -> circuit net

  /// Circuit device names, sorted. Serves as the canonical form for dedup.
  std::vector<std::string> members() const;
  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

struct CollapseResult {
  CircuitGraph graph;
  std::vector<Supernode> supernodes;  // created by this call
};

std::vector<Template> builtin_library();
std::vector<Template> load_library(const nlohmann::json& j);
nlohmann::json library_to_json(const std::vector<Template>& lib);

/// All label-preserving embeddings of `t` among primitive MOS devices of `g`,
/// one per member set.
std::vector<MatchResult> find_matches(const CircuitGraph& g, const Template& t);

/// Re-checks the template predicate on a binding.
bool verify_match(const CircuitGraph& g, const Template& t, const MatchResult& m);

/// Greedy device-disjoint selection by priority, size, then member names.
std::vector<MatchResult> resolve_overlaps(std::vector<MatchResult> matches);

CollapseResult collapse(const CircuitGraph& g, const std::vector<MatchResult>& matches,
                        const std::vector<Template>& lib = builtin_library());

/// Match, resolve and collapse in rounds until no template matches.
CircuitGraph collapse_to_fixpoint(const CircuitGraph& g, const std::vector<Template>& lib = builtin_library());

}  // namespace sizer
