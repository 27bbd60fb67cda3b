#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/circuit_graph.hpp"
#include "sizer/netlist.hpp"
#include "sizer/stage_analyzer.hpp"
#include "sizer/template_matcher.hpp"

namespace sizer {

/// A primitive device with its place in the module and stage levels.
struct Component {
  Device device;
  std::string module;  // supernode id, empty when not collapsed
  std::string stage;   // stage id, empty when unstaged
};

/// Device, module and stage levels of one circuit plus the collapsed graph they came from.
struct Hierarchy {
  std::string title;
  CircuitGraph graph;  // after template collapsing
  std::vector<Component> components;
  std::vector<Stage> stages;
  std::vector<StageEdge> stage_edges;
  std::vector<std::string> unstaged;  // device-side nodes on no conduction path
  IoNets io;
  std::vector<std::string> diagnostics;
  std::optional<nlohmann::json> annotations;

  const std::vector<Supernode>& modules() const { return graph.supernodes(); }
  const Stage* stage(std::string_view id) const;
  /// Stage id owning a device-side node (primitive or supernode), empty if unstaged.
  std::string stage_of(std::string_view device_side) const;
  const Component* component(std::string_view name) const;
};

struct AnalyzeOptions {
  IoNets io;
  std::vector<Template> library = builtin_library();
  std::size_t path_cap = kDefaultPathCap;
};

Hierarchy analyze(const Netlist& netlist, const AnalyzeOptions& options = {});

inline constexpr std::string_view kHierarchySchema = "sizer.hierarchy/1";

nlohmann::json hierarchy_to_json(const Hierarchy& h);
/// Validates the schema tag and structure; throws SchemaError.
Hierarchy hierarchy_from_json(const nlohmann::json& j);

/// Plain-text rendering: device sentences, modules, stages and stage links.
std::string render_text(const Hierarchy& h);

}  // namespace sizer
