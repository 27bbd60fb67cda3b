#include "sizer/understanding.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>
#include <optional>

#include <spdlog/spdlog.h>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool contains(const std::string& haystack, std::string_view needle) {
  return lower(haystack).find(needle) != std::string::npos;
}

// Connectivity queries over the primitive devices of a hierarchy.
class Topology {
 public:
  explicit Topology(const Hierarchy& h) : h_(h) {
    if (h.graph.ground()) rails_.insert(h.graph.node(*h.graph.ground()).label);
    if (h.graph.supply()) rails_.insert(h.graph.node(*h.graph.supply()).label);
    for (const auto& c : h.components) {
      by_name_[c.device.name] = &c;
      for (const auto& t : c.device.terminals)
        if (t.role != TerminalRole::B) on_net_[t.net].push_back({&c, t.role});
    }
  }

  const Component* component(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }
  bool rail(const std::string& net) const { return rails_.count(net) > 0; }
  bool output(const std::string& net) const { return h_.io.outputs.count(net) > 0; }

  static std::optional<std::string> term(const Device& d, TerminalRole r) {
    for (const auto& t : d.terminals)
      if (t.role == r) return t.net;
    return std::nullopt;
  }

  const Supernode* module_of(const Component& c) const {
    if (c.module.empty()) return nullptr;
    for (const auto& s : h_.modules())
      if (s.id == c.module) return &s;
    return nullptr;
  }

  std::vector<const Supernode*> modules(std::string_view tmpl) const {
    std::vector<const Supernode*> out;
    for (const auto& s : h_.modules())
      if (s.template_name == tmpl) out.push_back(&s);
    return out;
  }

  // Terminals attached to a net.
  const std::vector<std::pair<const Component*, TerminalRole>>& at(const std::string& net) const {
    static const std::vector<std::pair<const Component*, TerminalRole>> none;
    auto it = on_net_.find(net);
    return it == on_net_.end() ? none : it->second;
  }

  bool diode_on(const std::string& net, DeviceKind kind) const {
    for (const auto& [c, r] : at(net))
      if (r == TerminalRole::G && c->device.kind == kind && term(c->device, TerminalRole::D) == net) return true;
    return false;
  }
  bool any_diode_on(const std::string& net) const {
    return diode_on(net, DeviceKind::Nmos) || diode_on(net, DeviceKind::Pmos);
  }
  bool vsource_on(const std::string& net) const {
    for (const auto& [c, r] : at(net))
      if (c->device.kind == DeviceKind::VoltageSource) return true;
    return false;
  }
  bool mos_drain_on(const std::string& net, const std::string& except = {}) const {
    for (const auto& [c, r] : at(net))
      if (is_mos(c->device.kind) && r == TerminalRole::D && c->device.name != except) return true;
    return false;
  }
  bool gates_only(const std::string& net, const std::string& except) const {
    for (const auto& [c, r] : at(net))
      if (c->device.name != except && (!is_mos(c->device.kind) || r != TerminalRole::G)) return false;
    return true;
  }
  bool gates_of_both_polarities(const std::string& net) const {
    bool n = false, p = false;
    for (const auto& [c, r] : at(net)) {
      if (r != TerminalRole::G) continue;
      n = n || c->device.kind == DeviceKind::Nmos;
      p = p || c->device.kind == DeviceKind::Pmos;
    }
    return n && p;
  }
  bool diffpair_port(const std::string& net, std::initializer_list<std::string_view> roles) const {
    for (const auto* m : modules("DiffPair"))
      for (auto role : roles) {
        auto it = m->ports.find(std::string(role));
        if (it != m->ports.end() && it->second == net) return true;
      }
    return false;
  }
  std::string stage_of_module(const Supernode& s) const { return h_.stage_of(s.id); }

 private:
  const Hierarchy& h_;
  std::set<std::string> rails_;
  std::map<std::string, const Component*> by_name_;
  std::map<std::string, std::vector<std::pair<const Component*, TerminalRole>>> on_net_;
};

using Rule = std::function<std::optional<std::string>(const Topology&, const Component&)>;

std::optional<std::string> need(bool ok, const char* reason) {
  if (ok) return std::nullopt;
  return std::string(reason);
}

const std::map<std::string, Rule>& device_rules() {
  using T = Topology;
  static const std::map<std::string, Rule> rules = [] {
    std::map<std::string, Rule> r;
    auto mos = [](const Component& c) { return is_mos(c.device.kind); };
    auto g = [](const Component& c) { return *T::term(c.device, TerminalRole::G); };
    auto s = [](const Component& c) { return *T::term(c.device, TerminalRole::S); };
    auto d = [](const Component& c) { return *T::term(c.device, TerminalRole::D); };
    auto p = [](const Component& c) { return *T::term(c.device, TerminalRole::P); };
    auto n = [](const Component& c) { return *T::term(c.device, TerminalRole::N); };
    auto mirrored = [g](const T& t, const Component& c) { return t.diode_on(g(c), c.device.kind); };

    r["input pair transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      auto* m = t.module_of(c);
      return need(m && m->template_name == "DiffPair", "not a member of a differential pair module");
    };
    r["tail current source"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      for (const auto* m : t.modules("DiffPair"))
        if (m->ports.at("tail") == d(c) && t.stage_of_module(*m) == c.stage && !c.stage.empty()) return need(true, "");
      return need(false, "drain is not the tail net of a differential pair in the same stage");
    };
    r["active load"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      if (!mirrored(t, c)) return need(false, "gate is not shared with a diode-connected device of the same polarity");
      return need(t.diffpair_port(d(c), {"out-", "out+"}), "drain does not load a differential pair output");
    };
    r["mirror transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(mirrored(t, c), "gate is not shared with a diode-connected device of the same polarity");
    };
    r["bias diode"] = [=](const T&, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(g(c) == d(c), "gate and drain are on different nets");
    };
    r["current source"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      if (!t.rail(s(c))) return need(false, "source is not on a supply rail");
      return need(g(c) != d(c) && (mirrored(t, c) || t.vsource_on(g(c))), "gate is not on a bias net");
    };
    r["cascode transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      if (t.rail(s(c)) || !t.mos_drain_on(s(c), c.device.name)) return need(false, "source is not stacked on another drain");
      return need(t.any_diode_on(g(c)) || t.vsource_on(g(c)), "gate is not on a bias net");
    };
    r["gain transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      if (!t.rail(s(c)) || g(c) == d(c)) return need(false, "not a common-source device");
      return need(t.mos_drain_on(g(c), c.device.name) && !t.any_diode_on(g(c)) && !t.vsource_on(g(c)),
                  "gate is not driven by a signal node");
    };
    r["pass transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(t.rail(s(c)) && t.output(d(c)), "not between a rail and a declared output");
    };
    r["source follower"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(t.rail(d(c)) && !t.rail(s(c)), "drain is not on a rail or source is");
    };
    r["latch transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      for (const auto& [o, role] : t.at(d(c)))
        if (role == TerminalRole::G && o->device.name != c.device.name && is_mos(o->device.kind) &&
            T::term(o->device, TerminalRole::D) == g(c))
          return need(true, "");
      return need(false, "not cross-coupled with another device");
    };
    r["reset switch"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(t.rail(s(c)) && t.vsource_on(g(c)) && t.gates_of_both_polarities(g(c)),
                  "gate is not on a clock net");
    };
    r["output buffer transistor"] = [=](const T& t, const Component& c) {
      if (!mos(c)) return need(false, "role needs a transistor");
      return need(t.output(d(c)) && !t.output(g(c)), "drain is not a declared output");
    };
    r["compensation capacitor"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::Capacitor) return need(false, "role needs a capacitor");
      return need(!t.rail(p(c)) && !t.rail(n(c)), "one plate is on a rail");
    };
    r["load capacitor"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::Capacitor) return need(false, "role needs a capacitor");
      return need((t.rail(p(c)) && t.output(n(c))) || (t.rail(n(c)) && t.output(p(c))),
                  "not between a rail and a declared output");
    };
    r["node capacitor"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::Capacitor) return need(false, "role needs a capacitor");
      return need((t.rail(p(c)) && !t.rail(n(c)) && !t.output(n(c))) || (t.rail(n(c)) && !t.rail(p(c)) && !t.output(p(c))),
                  "not between a rail and an internal node");
    };
    r["feedback resistor"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::Resistor) return need(false, "role needs a resistor");
      return need(t.diffpair_port(p(c), {"in+", "in-"}) || t.diffpair_port(n(c), {"in+", "in-"}),
                  "does not reach a differential pair input");
    };
    r["bias resistor"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::Resistor) return need(false, "role needs a resistor");
      auto biases = [&](const std::string& net) {
        if (t.diffpair_port(net, {"in+", "in-"})) return false;
        for (const auto& [o, role] : t.at(net))
          if (role == TerminalRole::G) return true;
        return false;
      };
      return need(biases(p(c)) || biases(n(c)), "does not set a gate bias");
    };
    r["reference current source"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::CurrentSource) return need(false, "role needs a current source");
      return need(t.any_diode_on(p(c)) || t.any_diode_on(n(c)), "does not feed a diode-connected device");
    };
    r["load current source"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::CurrentSource) return need(false, "role needs a current source");
      return need(t.output(p(c)) || t.output(n(c)), "not attached to a declared output");
    };
    r["bias voltage source"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::VoltageSource) return need(false, "role needs a voltage source");
      return need(t.rail(n(c)) && t.gates_only(p(c), c.device.name) && !t.diffpair_port(p(c), {"in+", "in-"}) &&
                      !t.gates_of_both_polarities(p(c)),
                  "does not only bias gates");
    };
    r["reference voltage source"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::VoltageSource) return need(false, "role needs a voltage source");
      return need(t.diffpair_port(p(c), {"in+", "in-"}), "does not drive a differential pair input");
    };
    r["clock source"] = [=](const T& t, const Component& c) {
      if (c.device.kind != DeviceKind::VoltageSource) return need(false, "role needs a voltage source");
      return need(t.gates_of_both_polarities(p(c)), "does not drive both NMOS and PMOS gates");
    };
    return r;
  }();
  return rules;
}

struct ModuleKeywords {
  std::vector<std::string_view> any_of;
  std::vector<std::string_view> all_of;
  std::vector<std::string_view> none_of;
};

const std::map<std::string, ModuleKeywords>& module_keywords() {
  static const std::map<std::string, ModuleKeywords> table{
      {"DiffPair", {{}, {"differential pair"}, {}}},
      {"CurrentMirror", {{}, {"current mirror"}, {"cascode"}}},
      {"CascodeMirror", {{}, {"cascode", "mirror"}, {}}},
      {"Cascode", {{}, {"cascode"}, {"mirror"}}},
      {"ClassAB", {{"class-ab", "class ab", "push-pull"}, {}, {}}},
      {"DiodeMOS", {{}, {"diode"}, {}}},
  };
  return table;
}

enum class Need { Yes, No, Any };
struct StageRule {
  Need input;
  Need output;
  bool upstream_input;  // must link to a stage holding a primary input
};

const std::map<std::string, StageRule>& stage_rules() {
  static const std::map<std::string, StageRule> table{
      {"bias branch", {Need::No, Need::No, false}},
      {"input stage", {Need::Yes, Need::Any, false}},
      {"first gain stage", {Need::Yes, Need::Any, false}},
      {"error amplifier", {Need::Yes, Need::Any, false}},
      {"single gain stage", {Need::Yes, Need::Yes, false}},
      {"input and latch stage", {Need::Yes, Need::No, false}},
      {"second gain stage", {Need::No, Need::Yes, true}},
      {"output stage", {Need::No, Need::Yes, false}},
      {"output buffer", {Need::No, Need::Yes, true}},
      {"pass stage", {Need::No, Need::Yes, false}},
      {"buffer stage", {Need::No, Need::No, false}},
  };
  return table;
}

bool satisfies(Need n, bool flag) { return n == Need::Any || (n == Need::Yes) == flag; }

std::map<std::string, std::string> string_map(const json& j, const char* field) {
  std::map<std::string, std::string> out;
  if (!j.contains(field)) return out;
  const json& m = j.at(field);
  if (!m.is_object()) throw SchemaError(std::string("'") + field + "' must be an object");
  for (const auto& [k, v] : m.items()) {
    if (!v.is_string()) throw SchemaError(std::string("'") + field + "." + k + "' must be a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

json annotation_schema() {
  json str_map = {{"type", "object"}, {"additionalProperties", {{"type", "string"}}}};
  return {{"type", "object"},
          {"properties",
           {{"device_roles", str_map},
            {"module_functions", str_map},
            {"stage_functions", str_map},
            {"confidence", {{"type", "object"}, {"additionalProperties", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}}}},
          {"required", {"device_roles", "module_functions", "stage_functions", "confidence"}}};
}

std::vector<std::string> all_items(const Hierarchy& h) {
  std::vector<std::string> items;
  for (const auto& c : h.components) items.push_back(c.device.name);
  for (const auto& m : h.modules()) items.push_back(m.id);
  for (const auto& s : h.stages) items.push_back(s.id);
  return items;
}

// Rejects entries naming items the hierarchy does not contain.
void check_known(const Hierarchy& h, const Annotation& a) {
  std::set<std::string> devices, modules, stages;
  for (const auto& c : h.components) devices.insert(c.device.name);
  for (const auto& m : h.modules()) modules.insert(m.id);
  for (const auto& s : h.stages) stages.insert(s.id);
  for (const auto& [k, v] : a.device_roles)
    if (!devices.count(k)) throw SchemaError("device_roles names unknown device '" + k + "'");
  for (const auto& [k, v] : a.module_functions)
    if (!modules.count(k)) throw SchemaError("module_functions names unknown module '" + k + "'");
  for (const auto& [k, v] : a.stage_functions)
    if (!stages.count(k)) throw SchemaError("stage_functions names unknown stage '" + k + "'");
  for (const auto& [k, v] : a.confidence)
    if (!devices.count(k) && !modules.count(k) && !stages.count(k))
      throw SchemaError("confidence names unknown item '" + k + "'");
}

template <class F>
json ask_validated(AdvisorSession& session, json request, int round, int retries, F&& validate) {
  for (int attempt = 0;; ++attempt) {
    json response = session.call(request);
    try {
      validate(response);
      return response;
    } catch (const SchemaError& e) {
      if (attempt >= retries) throw MalformedAdvisorResponse(round, e.what());
      spdlog::warn("advisor reply rejected ({}), asking for a repair", e.what());
      request["meta"]["repair"] = true;
      request["context"]["validation_error"] = e.what();
      request["context"]["previous_response"] = response;
    }
  }
}

const char* kSystemPrompt =
    "You are an analog circuit design expert. Answer only with JSON that follows the response schema.";

}  // namespace

json annotation_to_json(const Annotation& a) {
  return {{"device_roles", a.device_roles},
          {"module_functions", a.module_functions},
          {"stage_functions", a.stage_functions},
          {"confidence", a.confidence}};
}

Annotation annotation_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("annotation must be a JSON object");
  Annotation a;
  a.device_roles = string_map(j, "device_roles");
  a.module_functions = string_map(j, "module_functions");
  a.stage_functions = string_map(j, "stage_functions");
  if (j.contains("confidence")) {
    if (!j.at("confidence").is_object()) throw SchemaError("'confidence' must be an object");
    for (const auto& [k, v] : j.at("confidence").items()) {
      if (!v.is_number()) throw SchemaError("confidence of '" + k + "' must be a number");
      double c = v.get<double>();
      if (!(c >= 0.0 && c <= 1.0)) throw SchemaError("confidence of '" + k + "' is outside [0,1]");
      a.confidence[k] = c;
    }
  }
  return a;
}

std::vector<std::string> ChecklistReport::offending_items() const {
  std::set<std::string> items;
  for (const auto* r : {&coverage, &consistency, &alignment})
    for (const auto& o : r->offending) items.insert(o.substr(0, o.find(':')));
  return {items.begin(), items.end()};
}

json checklist_to_json(const ChecklistReport& r) {
  auto one = [](const CheckResult& c) { return json{{"pass", c.pass}, {"offending", c.offending}}; };
  return {{"pass", r.pass()},
          {"coverage", one(r.coverage)},
          {"consistency", one(r.consistency)},
          {"alignment", one(r.alignment)}};
}

const std::vector<std::string>& device_role_vocabulary() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& [k, rule] : device_rules()) out.push_back(k);
    return out;
  }();
  return v;
}

const std::vector<std::string>& stage_function_vocabulary() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& [k, rule] : stage_rules()) out.push_back(k);
    return out;
  }();
  return v;
}

ChecklistReport run_checklist(const Hierarchy& h, const Annotation& ann) {
  ChecklistReport rep;
  auto fail = [](CheckResult& r, const std::string& item, const std::string& why) {
    r.pass = false;
    r.offending.push_back(item + ": " + why);
  };
  auto missing = [](const std::map<std::string, std::string>& m, const std::string& k) {
    auto it = m.find(k);
    return it == m.end() || it->second.empty();
  };

  for (const auto& c : h.components)
    if (missing(ann.device_roles, c.device.name)) fail(rep.coverage, c.device.name, "no role assigned");
  for (const auto& m : h.modules())
    if (missing(ann.module_functions, m.id)) fail(rep.coverage, m.id, "no function assigned");
  for (const auto& s : h.stages)
    if (missing(ann.stage_functions, s.id)) fail(rep.coverage, s.id, "no function assigned");
  std::set<std::string> known;
  for (const auto& item : all_items(h)) known.insert(item);
  for (const auto* m : {&ann.device_roles, &ann.module_functions, &ann.stage_functions})
    for (const auto& [k, v] : *m)
      if (!known.count(k)) fail(rep.coverage, k, "not part of the hierarchy");

  Topology topo(h);
  for (const auto& [name, role] : ann.device_roles) {
    const Component* c = topo.component(name);
    if (!c || role.empty()) continue;
    auto rule = device_rules().find(lower(role));
    if (rule == device_rules().end()) {
      fail(rep.consistency, name, "role '" + role + "' is not in the controlled vocabulary");
      continue;
    }
    if (auto why = rule->second(topo, *c)) fail(rep.consistency, name, role + ": " + *why);
  }

  for (const auto& m : h.modules()) {
    auto it = ann.module_functions.find(m.id);
    if (it == ann.module_functions.end() || it->second.empty()) continue;
    auto kw = module_keywords().find(m.template_name);
    if (kw == module_keywords().end()) continue;
    const std::string& f = it->second;
    bool ok = std::all_of(kw->second.all_of.begin(), kw->second.all_of.end(), [&](auto k) { return contains(f, k); }) &&
              std::none_of(kw->second.none_of.begin(), kw->second.none_of.end(), [&](auto k) { return contains(f, k); }) &&
              (kw->second.any_of.empty() ||
               std::any_of(kw->second.any_of.begin(), kw->second.any_of.end(), [&](auto k) { return contains(f, k); }));
    if (!ok) fail(rep.alignment, m.id, "function '" + f + "' does not describe a " + m.template_name + " module");
  }
  for (const auto& s : h.stages) {
    auto it = ann.stage_functions.find(s.id);
    if (it == ann.stage_functions.end() || it->second.empty()) continue;
    auto rule = stage_rules().find(lower(it->second));
    if (rule == stage_rules().end()) {
      fail(rep.alignment, s.id, "function '" + it->second + "' is not in the controlled vocabulary");
      continue;
    }
    if (!satisfies(rule->second.input, s.primary_input))
      fail(rep.alignment, s.id, it->second + (s.primary_input ? " cannot hold a primary input" : " needs a primary input"));
    if (!satisfies(rule->second.output, s.primary_output))
      fail(rep.alignment, s.id,
           it->second + (s.primary_output ? " cannot drive a primary output" : " needs a primary output"));
    if (rule->second.upstream_input) {
      bool linked = false;
      for (const auto& e : h.stage_edges) {
        const std::string& other = e.a == s.id ? e.b : e.b == s.id ? e.a : std::string{};
        if (const Stage* o = other.empty() ? nullptr : h.stage(other); o && o->primary_input) linked = true;
      }
      if (!linked) fail(rep.alignment, s.id, it->second + " is not fed by an input stage");
    }
  }
  return rep;
}

UnderstandResult understand(const Hierarchy& h, AdvisorSession& session, const LoopConfig& cfg) {
  if (!(cfg.confidence_threshold > 0.0 && cfg.confidence_threshold <= 1.0))
    throw ConfigError("confidence threshold must lie in (0, 1]");
  if (cfg.max_rounds < 1) throw ConfigError("max rounds must be at least 1");

  UnderstandResult res;
  json hierarchy_json = hierarchy_to_json(h);
  hierarchy_json.erase("annotations");
  const std::string text = render_text(h);
  std::vector<std::string> focus = all_items(h);

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    json context = {{"hierarchy_json", hierarchy_json},
                    {"focus_items", focus},
                    {"circuit_text", text},
                    {"role_vocabulary", device_role_vocabulary()},
                    {"stage_vocabulary", stage_function_vocabulary()}};
    if (round > 1) {
      context["current_annotation"] = annotation_to_json(res.annotation);
      context["checklist"] = checklist_to_json(res.report);
    }
    std::string task = round == 1
                           ? "Identify the role of every device, the function of every module and the function of "
                             "every stage. Give a confidence in [0,1] for each item."
                           : "Some items are uncertain or failed the consistency checklist. Re-examine only the focus "
                             "items and return refined roles and confidences for them.";
    json request = make_request(kSystemPrompt, context, task, annotation_schema(), "understand", round, h.title);
    json reply = ask_validated(session, request, round, cfg.retries, [&](const json& r) {
      check_known(h, annotation_from_json(r));
    });
    Annotation update = annotation_from_json(reply);
    for (auto& [k, v] : update.device_roles) res.annotation.device_roles[k] = v;
    for (auto& [k, v] : update.module_functions) res.annotation.module_functions[k] = v;
    for (auto& [k, v] : update.stage_functions) res.annotation.stage_functions[k] = v;
    for (auto& [k, v] : update.confidence) res.annotation.confidence[k] = v;

    res.rounds = round;
    res.report = run_checklist(h, res.annotation);
    std::set<std::string> low;
    for (const auto& item : all_items(h)) {
      auto it = res.annotation.confidence.find(item);
      if (it == res.annotation.confidence.end() || it->second < cfg.confidence_threshold) low.insert(item);
    }
    for (const auto& item : res.report.offending_items()) low.insert(item);
    if (low.empty() && res.report.pass()) {
      res.converged = true;
      break;
    }
    focus.assign(low.begin(), low.end());
  }
  return res;
}

std::vector<std::string> design_symbols(const Hierarchy& h) {
  std::set<std::string> out;
  for (const auto& c : h.components)
    for (const auto& [k, v] : c.device.params)
      if (v.is_symbol()) out.insert(v.symbol_name());
  return {out.begin(), out.end()};
}

TyingPlan structural_tying(const Hierarchy& h, const std::vector<std::string>& variables) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < variables.size(); ++i) index[variables[i]] = i;
  std::vector<std::size_t> parent(variables.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };

  for (const auto& m : h.modules()) {
    std::map<std::string, const Device*> members;
    for (const auto& d : m.members) members[d.name] = &d;
    for (const auto& [a, b] : m.symmetric_pairs) {
      const Device* da = members.at(a);
      const Device* db = members.at(b);
      for (const char* key : {"W", "L"}) {
        auto pa = da->params.find(key);
        auto pb = db->params.find(key);
        if (pa == da->params.end() || pb == db->params.end()) continue;
        if (!pa->second.is_symbol() || !pb->second.is_symbol()) continue;
        auto ia = index.find(pa->second.symbol_name());
        auto ib = index.find(pb->second.symbol_name());
        if (ia == index.end() || ib == index.end() || ia->second == ib->second) continue;
        std::size_t ra = find(ia->second), rb = find(ib->second);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::map<std::size_t, std::vector<std::string>> classes;
  for (std::size_t i = 0; i < variables.size(); ++i) classes[find(i)].push_back(variables[i]);

  TyingPlan plan;
  plan.variable_count = variables.size();
  for (auto& [root, vars] : classes)
    if (vars.size() > 1) plan.groups.push_back({vars, TieGroup::Relation::Equal, 1, 1, "structure"});
  std::size_t tied = 0;
  for (const auto& g : plan.groups) tied += g.variables.size() - 1;
  plan.reduced_dimension = plan.variable_count - tied;
  return plan;
}

TyingPlan assign_parameters(const Hierarchy& h, const Annotation& ann, AdvisorSession& session,
                            const std::vector<std::string>& variables) {
  TyingPlan plan = structural_tying(h, variables);
  if (!session.available()) return plan;

  json structural = json::array();
  for (const auto& g : plan.groups) structural.push_back(g.variables);
  json context = {{"hierarchy_json", hierarchy_to_json(h)},
                  {"annotation", annotation_to_json(ann)},
                  {"variables", variables},
                  {"structural_groups", structural}};
  json group_schema = {{"type", "object"},
                       {"properties",
                        {{"variables", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                         {"relation", {{"enum", {"equal", "ratio"}}}},
                         {"ratio", {{"type", "array"}, {"items", {{"type", "integer"}}}}}}}};
  json schema = {{"type", "object"},
                 {"properties", {{"groups", {{"type", "array"}, {"items", group_schema}}}}}};
  json request = make_request(kSystemPrompt, context,
                              "Suggest additional parameter ties (equal sizes or fixed integer ratios) implied by the "
                              "circuit's symmetry and function. Structural ties are already applied.",
                              schema, "tying", 1, h.title);
  json reply;
  try {
    reply = session.call(request);
  } catch (const AdvisorUnavailable& e) {
    spdlog::warn("tying advisor unavailable ({}); using structural ties only", e.what());
    return plan;
  }
  if (!reply.is_object() || !reply.contains("groups") || !reply.at("groups").is_array()) {
    plan.dropped.push_back("reply has no 'groups' array");
    return plan;
  }

  std::set<std::string> known(variables.begin(), variables.end());
  std::map<std::string, std::size_t> owner;
  for (std::size_t i = 0; i < plan.groups.size(); ++i)
    for (const auto& v : plan.groups[i].variables) owner[v] = i;

  for (const auto& gj : reply.at("groups")) {
    auto reject = [&](const std::string& why) {
      plan.dropped.push_back(gj.dump() + ": " + why);
      spdlog::info("dropped tying suggestion {}: {}", gj.dump(), why);
    };
    if (!gj.is_object() || !gj.contains("variables") || !gj.at("variables").is_array()) {
      reject("malformed group");
      continue;
    }
    std::vector<std::string> vars;
    bool ok = true;
    for (const auto& v : gj.at("variables")) {
      if (!v.is_string()) ok = false;
      else vars.push_back(v.get<std::string>());
    }
    std::string relation = gj.value("relation", "equal");
    std::set<std::string> distinct(vars.begin(), vars.end());
    if (!ok || vars.size() < 2 || distinct.size() != vars.size()) {
      reject("needs at least two distinct variable names");
      continue;
    }
    auto unknown = std::find_if(vars.begin(), vars.end(), [&](const std::string& v) { return !known.count(v); });
    if (unknown != vars.end()) {
      reject("unknown variable '" + *unknown + "'");
      continue;
    }
    if (relation == "equal") {
      auto first = owner.find(vars[0]);
      bool same = first != owner.end() && std::all_of(vars.begin(), vars.end(), [&](const std::string& v) {
                    auto it = owner.find(v);
                    return it != owner.end() && it->second == first->second &&
                           plan.groups[it->second].relation == TieGroup::Relation::Equal;
                  });
      if (same) continue;  // already implied
      if (std::any_of(vars.begin(), vars.end(), [&](const std::string& v) { return owner.count(v); })) {
        reject("overlaps an existing group");
        continue;
      }
      for (const auto& v : vars) owner[v] = plan.groups.size();
      plan.groups.push_back({vars, TieGroup::Relation::Equal, 1, 1, "advisor"});
    } else if (relation == "ratio") {
      const json& r = gj.value("ratio", json::array());
      if (vars.size() != 2 || !r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
          !r[1].is_number_integer() || r[0].get<long>() <= 0 || r[1].get<long>() <= 0) {
        reject("ratio groups need two variables and a positive integer [num, den]");
        continue;
      }
      if (owner.count(vars[0]) || owner.count(vars[1])) {
        reject("overlaps an existing group");
        continue;
      }
      for (const auto& v : vars) owner[v] = plan.groups.size();
      plan.groups.push_back({vars, TieGroup::Relation::Ratio, r[0].get<long>(), r[1].get<long>(), "advisor"});
    } else {
      reject("unknown relation '" + relation + "'");
    }
  }
  std::size_t tied = 0;
  for (const auto& g : plan.groups) tied += g.variables.size() - 1;
  plan.reduced_dimension = plan.variable_count - tied;
  return plan;
}

json tying_to_json(const TyingPlan& p) {
  json groups = json::array();
  for (const auto& g : p.groups) {
    json gj = {{"variables", g.variables},
               {"relation", g.relation == TieGroup::Relation::Equal ? "equal" : "ratio"},
               {"origin", g.origin}};
    if (g.relation == TieGroup::Relation::Ratio) gj["ratio"] = {g.ratio_num, g.ratio_den};
    groups.push_back(gj);
  }
  return {{"groups", groups},
          {"variable_count", p.variable_count},
          {"reduced_dimension", p.reduced_dimension},
          {"dropped", p.dropped}};
}

TyingPlan tying_from_json(const json& j) {
  try {
    TyingPlan p;
    for (const auto& gj : j.at("groups")) {
      TieGroup g;
      g.variables = gj.at("variables").get<std::vector<std::string>>();
      std::string rel = gj.value("relation", "equal");
      if (rel == "ratio") {
        g.relation = TieGroup::Relation::Ratio;
        g.ratio_num = gj.at("ratio").at(0).get<long>();
        g.ratio_den = gj.at("ratio").at(1).get<long>();
      } else if (rel != "equal") {
        throw SchemaError("unknown tie relation '" + rel + "'");
      }
      g.origin = gj.value("origin", "structure");
      p.groups.push_back(std::move(g));
    }
    p.variable_count = j.at("variable_count").get<std::size_t>();
    p.reduced_dimension = j.at("reduced_dimension").get<std::size_t>();
    p.dropped = j.value("dropped", std::vector<std::string>{});
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("tying plan is malformed: ") + e.what());
  }
}

}  // namespace sizer
