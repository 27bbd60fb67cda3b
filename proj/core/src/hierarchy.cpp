#include "sizer/hierarchy.hpp"

#include <algorithm>
#include <sstream>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

std::string join(const std::set<std::string>& items, std::string_view sep = ", ") {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

void fill_components(Hierarchy& h) {
  h.components.clear();
  for (const auto& n : h.graph.nodes()) {
    if (!n.is_device_side() || n.kind == NodeKind::Supernode) continue;
    h.components.push_back({device_record(h.graph, n.id), "", h.stage_of(n.label)});
  }
  for (const auto& s : h.graph.supernodes())
    for (const auto& d : s.members) h.components.push_back({d, s.id, h.stage_of(s.id)});
  std::sort(h.components.begin(), h.components.end(),
            [](const Component& a, const Component& b) { return a.device.name < b.device.name; });
}

void fill_unstaged(Hierarchy& h) {
  h.unstaged.clear();
  for (const auto& n : h.graph.nodes())
    if (n.is_device_side() && h.stage_of(n.label).empty()) h.unstaged.push_back(n.label);
}

}  // namespace

const Stage* Hierarchy::stage(std::string_view id) const {
  for (const auto& s : stages)
    if (s.id == id) return &s;
  return nullptr;
}

std::string Hierarchy::stage_of(std::string_view device_side) const {
  for (const auto& s : stages)
    if (s.devices.count(std::string(device_side))) return s.id;
  return {};
}

const Component* Hierarchy::component(std::string_view name) const {
  for (const auto& c : components)
    if (c.device.name == name) return &c;
  return nullptr;
}

Hierarchy analyze(const Netlist& netlist, const AnalyzeOptions& options) {
  Hierarchy h;
  h.title = netlist.title;
  h.io = options.io;
  h.graph = collapse_to_fixpoint(build_graph(netlist), options.library);

  for (const auto& net : options.io.inputs)
    if (!h.graph.find_net(net)) h.diagnostics.push_back("declared input net '" + net + "' not found");
  for (const auto& net : options.io.outputs)
    if (!h.graph.find_net(net)) h.diagnostics.push_back("declared output net '" + net + "' not found");

  if (h.graph.device_node_count() > 0) {
    ConductionGraph cg = conduction_graph(h.graph);
    try {
      auto paths = enumerate_paths(cg, options.path_cap);
      auto sg = stage_graph(h.graph, merge_stages(cg, paths), options.io);
      h.stages = std::move(sg.stages);
      h.stage_edges = std::move(sg.edges);
    } catch (const NoConductionPath& e) {
      h.diagnostics.push_back(e.what());
    }
  }
  fill_unstaged(h);
  fill_components(h);
  return h;
}

json hierarchy_to_json(const Hierarchy& h) {
  json j;
  j["schema"] = std::string(kHierarchySchema);
  j["title"] = h.title;
  j["rails"] = {{"gnd", h.graph.ground() ? json(h.graph.node(*h.graph.ground()).label) : json(nullptr)},
                {"vdd", h.graph.supply() ? json(h.graph.node(*h.graph.supply()).label) : json(nullptr)}};
  j["io"] = {{"inputs", h.io.inputs}, {"outputs", h.io.outputs}};

  json components = json::array();
  for (const auto& c : h.components) {
    json cj{{"name", c.device.name}, {"kind", std::string(to_string(c.device.kind))}};
    cj["module"] = c.module.empty() ? json(nullptr) : json(c.module);
    cj["stage"] = c.stage.empty() ? json(nullptr) : json(c.stage);
    components.push_back(cj);
  }
  j["components"] = components;

  json modules = json::array();
  for (const auto& s : h.modules()) {
    json mj = supernode_to_json(s);
    auto st = h.stage_of(s.id);
    mj["stage"] = st.empty() ? json(nullptr) : json(st);
    modules.push_back(mj);
  }
  j["modules"] = modules;

  json stages = json::array();
  for (const auto& s : h.stages)
    stages.push_back({{"id", s.id},
                      {"members", s.devices},
                      {"nets", s.nets},
                      {"flags", {{"primary_input", s.primary_input}, {"primary_output", s.primary_output}}}});
  j["stages"] = stages;

  json edges = json::array();
  for (const auto& e : h.stage_edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"nets", e.nets}});
  j["stage_edges"] = edges;
  j["unstaged"] = h.unstaged;
  j["diagnostics"] = h.diagnostics;
  j["graph"] = graph_to_json(h.graph);
  if (h.annotations) j["annotations"] = *h.annotations;
  return j;
}

Hierarchy hierarchy_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("schema", std::string{}) != kHierarchySchema)
      throw SchemaError("not a hierarchy document (schema tag missing or unknown)");
    Hierarchy h;
    h.title = j.value("title", std::string{});
    h.graph = graph_from_json(j.at("graph"));
    h.io.inputs = j.at("io").at("inputs").get<std::set<std::string>>();
    h.io.outputs = j.at("io").at("outputs").get<std::set<std::string>>();
    for (const auto& sj : j.at("stages")) {
      Stage s;
      s.id = sj.at("id").get<std::string>();
      s.devices = sj.at("members").get<std::set<std::string>>();
      s.nets = sj.at("nets").get<std::set<std::string>>();
      s.primary_input = sj.at("flags").at("primary_input").get<bool>();
      s.primary_output = sj.at("flags").at("primary_output").get<bool>();
      for (const auto& d : s.devices)
        if (!h.graph.find_device(d)) throw SchemaError("stage " + s.id + " lists unknown device '" + d + "'");
      h.stages.push_back(std::move(s));
    }
    for (const auto& ej : j.at("stage_edges"))
      h.stage_edges.push_back(
          {ej.at("a").get<std::string>(), ej.at("b").get<std::string>(), ej.at("nets").get<std::set<std::string>>()});
    h.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    if (j.contains("annotations")) h.annotations = j.at("annotations");
    fill_unstaged(h);
    fill_components(h);
    return h;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("hierarchy document is malformed: ") + e.what());
  }
}

std::string render_text(const Hierarchy& h) {
  std::ostringstream out;
  if (!h.title.empty()) out << "Circuit: " << h.title << "\n";
  out << to_text(h.graph);
  for (const auto& s : h.modules()) {
    out << "Module " << s.id << " (" << s.template_name << ", " << to_string(s.polarity) << "-type): ";
    auto names = s.member_names();
    out << join(std::set<std::string>(names.begin(), names.end()));
    auto st = h.stage_of(s.id);
    if (!st.empty()) out << "; in stage " << st;
    out << "\n";
  }
  for (const auto& s : h.stages) {
    out << "Stage " << s.id;
    if (s.primary_input) out << " [primary input]";
    if (s.primary_output) out << " [primary output]";
    out << ": " << join(s.devices);
    if (!s.nets.empty()) out << "; nets " << join(s.nets);
    out << "\n";
  }
  for (const auto& e : h.stage_edges) out << "Stage " << e.a << " connects to stage " << e.b << " via " << join(e.nets) << "\n";
  if (!h.unstaged.empty()) {
    out << "Unstaged: ";
    for (std::size_t i = 0; i < h.unstaged.size(); ++i) out << (i ? ", " : "") << h.unstaged[i];
    out << "\n";
  }
  for (const auto& d : h.diagnostics) out << "Note: " << d << "\n";
  return out.str();
}

}  // namespace sizer
