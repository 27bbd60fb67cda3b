#include "sizer/circuit_graph.hpp"

#include <algorithm>
#include <sstream>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

NodeKind node_kind(DeviceKind k) {
  switch (k) {
    case DeviceKind::Nmos: return NodeKind::Nmos;
    case DeviceKind::Pmos: return NodeKind::Pmos;
    case DeviceKind::Resistor: return NodeKind::Resistor;
    case DeviceKind::Capacitor: return NodeKind::Capacitor;
    case DeviceKind::CurrentSource: return NodeKind::CurrentSource;
    case DeviceKind::VoltageSource: return NodeKind::VoltageSource;
  }
  return NodeKind::Resistor;
}

DeviceKind device_kind(NodeKind k) {
  switch (k) {
    case NodeKind::Nmos: return DeviceKind::Nmos;
    case NodeKind::Pmos: return DeviceKind::Pmos;
    case NodeKind::Resistor: return DeviceKind::Resistor;
    case NodeKind::Capacitor: return DeviceKind::Capacitor;
    case NodeKind::CurrentSource: return DeviceKind::CurrentSource;
    case NodeKind::VoltageSource: return DeviceKind::VoltageSource;
    default: break;
  }
  throw Error("node kind has no device equivalent");
}

EdgeLabel terminal_label(DeviceKind kind, TerminalRole role) {
  if (is_mos(kind)) {
    switch (role) {
      case TerminalRole::D: return EdgeLabel::D;
      case TerminalRole::G: return EdgeLabel::G;
      case TerminalRole::S: return EdgeLabel::S;
      case TerminalRole::B: return EdgeLabel::B;
      default: throw Error("invalid MOS terminal");
    }
  }
  switch (kind) {
    case DeviceKind::Resistor: return EdgeLabel::R;
    case DeviceKind::Capacitor: return EdgeLabel::C;
    case DeviceKind::CurrentSource: return EdgeLabel::I;
    default: return EdgeLabel::V;
  }
}

DeviceKind device_kind_from_string(std::string_view s) {
  for (auto k : {DeviceKind::Nmos, DeviceKind::Pmos, DeviceKind::Resistor, DeviceKind::Capacitor,
                 DeviceKind::CurrentSource, DeviceKind::VoltageSource})
    if (to_string(k) == s) return k;
  throw SchemaError("unknown device kind '" + std::string(s) + "'");
}

TerminalRole terminal_from_string(std::string_view s) {
  for (auto r : {TerminalRole::D, TerminalRole::G, TerminalRole::S, TerminalRole::B, TerminalRole::P, TerminalRole::N})
    if (to_string(r) == s) return r;
  throw SchemaError("unknown terminal role '" + std::string(s) + "'");
}

Polarity polarity_from_string(std::string_view s) {
  for (auto p : {Polarity::N, Polarity::P, Polarity::Complementary})
    if (to_string(p) == s) return p;
  throw SchemaError("unknown polarity '" + std::string(s) + "'");
}

json param_to_json(const ParamValue& v) {
  if (v.is_symbol()) return v.symbol_name();
  return v.literal_value();
}

ParamValue param_from_json(const json& j) {
  if (j.is_string()) return ParamValue::symbol(j.get<std::string>());
  if (j.is_number()) return ParamValue::literal(j.get<double>());
  throw SchemaError("parameter must be a number or a symbol name");
}

std::string net_phrase(const std::string& net) { return "net " + net; }

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Nmos: return "NMOS";
    case NodeKind::Pmos: return "PMOS";
    case NodeKind::Resistor: return "R";
    case NodeKind::Capacitor: return "C";
    case NodeKind::CurrentSource: return "I";
    case NodeKind::VoltageSource: return "V";
    case NodeKind::Supernode: return "SUPERNODE";
    case NodeKind::Net: return "net";
  }
  return "?";
}

std::string_view to_string(NetTag tag) {
  switch (tag) {
    case NetTag::Net: return "net";
    case NetTag::Gnd: return "GND";
    case NetTag::Vdd: return "VDD";
  }
  return "?";
}

std::string_view to_string(EdgeLabel label) {
  switch (label) {
    case EdgeLabel::G: return "G";
    case EdgeLabel::S: return "S";
    case EdgeLabel::D: return "D";
    case EdgeLabel::R: return "R";
    case EdgeLabel::C: return "C";
    case EdgeLabel::I: return "I";
    case EdgeLabel::V: return "V";
    case EdgeLabel::B: return "B";
    case EdgeLabel::Port: return "PORT";
  }
  return "?";
}

std::string_view to_string(Polarity polarity) {
  switch (polarity) {
    case Polarity::N: return "N";
    case Polarity::P: return "P";
    case Polarity::Complementary: return "NP";
  }
  return "?";
}

EdgeLabel edge_label_from_string(std::string_view text) {
  for (auto l : {EdgeLabel::G, EdgeLabel::S, EdgeLabel::D, EdgeLabel::R, EdgeLabel::C, EdgeLabel::I, EdgeLabel::V,
                 EdgeLabel::B, EdgeLabel::Port})
    if (to_string(l) == text) return l;
  throw SchemaError("unknown edge label '" + std::string(text) + "'");
}

bool is_base_label(EdgeLabel label) noexcept { return label != EdgeLabel::B && label != EdgeLabel::Port; }

std::vector<std::string> Supernode::member_names() const {
  std::vector<std::string> names;
  for (const auto& d : members) names.push_back(d.name);
  std::sort(names.begin(), names.end());
  return names;
}

const Node& CircuitGraph::node(NodeId id) const {
  if (!contains(id)) throw UnknownNode("unknown node id " + std::to_string(id.value));
  return nodes_[id.value];
}

const std::vector<std::size_t>& CircuitGraph::incident(NodeId id) const {
  if (!contains(id)) throw UnknownNode("unknown node id " + std::to_string(id.value));
  return incidence_[id.value];
}

std::optional<NodeId> CircuitGraph::find_device(std::string_view label) const {
  for (const auto& n : nodes_)
    if (n.is_device_side() && n.label == label) return n.id;
  return std::nullopt;
}

std::optional<NodeId> CircuitGraph::find_net(std::string_view label) const {
  for (const auto& n : nodes_)
    if (!n.is_device_side() && n.label == label) return n.id;
  return std::nullopt;
}

const Supernode* CircuitGraph::supernode(std::string_view id) const {
  for (const auto& s : supernodes_)
    if (s.id == id) return &s;
  return nullptr;
}

std::size_t CircuitGraph::device_node_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_device_side(); }));
}

std::size_t CircuitGraph::primitive_device_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return n.is_device_side() && n.kind != NodeKind::Supernode;
  }));
}

std::size_t CircuitGraph::net_node_count() const { return nodes_.size() - device_node_count(); }

bool CircuitGraph::is_bipartite() const {
  return std::all_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
    return contains(e.device) && contains(e.net) && node(e.device).is_device_side() && !node(e.net).is_device_side();
  });
}

GraphBuilder& GraphBuilder::add_net(const std::string& label, NetTag tag, bool internal) {
  auto& entry = nets_[label];
  if (tag != NetTag::Net) entry.first = tag;
  entry.second = entry.second || internal;
  return *this;
}

GraphBuilder& GraphBuilder::add_device(const Device& device) {
  for (const auto& t : device.terminals) nets_.try_emplace(t.net, NetTag::Net, false);
  devices_.push_back(device);
  return *this;
}

GraphBuilder& GraphBuilder::add_supernode(const Supernode& supernode) {
  for (const auto& [role, net] : supernode.ports) nets_.try_emplace(net, NetTag::Net, false);
  supernodes_.push_back(supernode);
  return *this;
}

CircuitGraph GraphBuilder::build() const {
  CircuitGraph g;
  g.title_ = title_;

  struct Entry {
    std::string label;
    const Device* device = nullptr;
    const Supernode* super = nullptr;
  };
  std::vector<Entry> side;
  for (const auto& d : devices_) side.push_back({d.name, &d, nullptr});
  for (const auto& s : supernodes_) side.push_back({s.id, nullptr, &s});
  std::sort(side.begin(), side.end(), [](const Entry& a, const Entry& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < side.size(); ++i)
    if (side[i].label == side[i - 1].label) throw DuplicateDevice(side[i].label);

  std::map<std::string, NodeId> net_ids;
  std::uint32_t next = 0;
  for (const auto& e : side) {
    Node n;
    n.id = NodeId{next++};
    n.label = e.label;
    if (e.device) {
      n.kind = node_kind(e.device->kind);
      n.params = e.device->params;
      n.model = e.device->model;
    } else {
      n.kind = NodeKind::Supernode;
    }
    g.nodes_.push_back(std::move(n));
  }
  for (const auto& [label, info] : nets_) {
    Node n;
    n.id = NodeId{next++};
    n.kind = NodeKind::Net;
    n.tag = info.first;
    n.internal = info.second;
    n.label = label;
    net_ids.emplace(label, n.id);
    if (n.tag == NetTag::Gnd && !g.ground_) g.ground_ = n.id;
    if (n.tag == NetTag::Vdd && !g.supply_) g.supply_ = n.id;
    g.nodes_.push_back(std::move(n));
  }

  for (std::size_t i = 0; i < side.size(); ++i) {
    NodeId dev{static_cast<std::uint32_t>(i)};
    if (side[i].device) {
      const Device& d = *side[i].device;
      for (const auto& t : d.terminals)
        g.edges_.push_back({dev, net_ids.at(t.net), terminal_label(d.kind, t.role), t.role, {}, true});
    } else {
      const Supernode& s = *side[i].super;
      for (const auto& [role, net] : s.ports) {
        auto c = s.port_conducts.find(role);
        g.edges_.push_back(
            {dev, net_ids.at(net), EdgeLabel::Port, TerminalRole::P, role, c == s.port_conducts.end() || c->second});
      }
      g.supernodes_.push_back(s);
    }
  }
  std::sort(g.supernodes_.begin(), g.supernodes_.end(),
            [](const Supernode& a, const Supernode& b) { return a.id < b.id; });

  g.incidence_.assign(g.nodes_.size(), {});
  for (std::size_t k = 0; k < g.edges_.size(); ++k) {
    g.incidence_[g.edges_[k].device.value].push_back(k);
    g.incidence_[g.edges_[k].net.value].push_back(k);
  }
  return g;
}

CircuitGraph build_graph(const Netlist& netlist) {
  GraphBuilder b(netlist.title);
  for (const auto& net : netlist.nets) {
    NetTag tag = net == netlist.ground ? NetTag::Gnd : net == netlist.supply ? NetTag::Vdd : NetTag::Net;
    b.add_net(net, tag);
  }
  for (const auto& d : netlist.devices) b.add_device(d);
  return b.build();
}

Device device_record(const CircuitGraph& g, NodeId id) {
  const Node& n = g.node(id);
  Device d;
  d.name = n.label;
  d.kind = device_kind(n.kind);
  d.params = n.params;
  d.model = n.model;
  for (auto k : g.incident(id)) {
    const Edge& e = g.edges()[k];
    d.terminals.push_back({e.terminal, g.node(e.net).label});
  }
  return d;
}

Netlist reconstruct_netlist(const CircuitGraph& g) {
  Netlist out;
  out.title = g.title();
  for (const auto& n : g.nodes()) {
    if (n.is_device_side()) {
      if (n.kind != NodeKind::Supernode) out.devices.push_back(device_record(g, n.id));
    } else {
      out.nets.insert(n.label);
      if (n.tag == NetTag::Gnd) out.ground = n.label;
      if (n.tag == NetTag::Vdd) out.supply = n.label;
    }
  }
  for (const auto& s : g.supernodes())
    for (const auto& d : s.members) out.devices.push_back(d);
  std::sort(out.devices.begin(), out.devices.end(), [](const Device& a, const Device& b) { return a.name < b.name; });
  return out;
}

std::vector<std::pair<NodeId, EdgeLabel>> neighbors(const CircuitGraph& g, NodeId v,
                                                    const std::optional<std::set<EdgeLabel>>& label_filter) {
  std::vector<std::pair<NodeId, EdgeLabel>> out;
  for (auto k : g.incident(v)) {
    const Edge& e = g.edges()[k];
    if (label_filter && !label_filter->count(e.label)) continue;
    out.emplace_back(e.device == v ? e.net : e.device, e.label);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    const auto& la = g.node(a.first).label;
    const auto& lb = g.node(b.first).label;
    if (la != lb) return la < lb;
    return a.second < b.second;
  });
  return out;
}

std::string to_text(const CircuitGraph& g) {
  std::ostringstream out;
  for (const auto& n : g.nodes()) {
    if (!n.is_device_side()) continue;
    std::map<TerminalRole, std::string> term;
    std::vector<const Edge*> ports;
    for (auto k : g.incident(n.id)) {
      const Edge& e = g.edges()[k];
      if (e.label == EdgeLabel::Port)
        ports.push_back(&e);
      else
        term[e.terminal] = g.node(e.net).label;
    }
    out << n.label;
    switch (n.kind) {
      case NodeKind::Nmos:
      case NodeKind::Pmos:
        out << " is an " << to_string(n.kind) << " with gate on " << net_phrase(term[TerminalRole::G])
            << ", source on " << net_phrase(term[TerminalRole::S]) << ", drain on "
            << net_phrase(term[TerminalRole::D]);
        if (term.count(TerminalRole::B)) out << ", bulk on " << net_phrase(term[TerminalRole::B]);
        break;
      case NodeKind::Resistor:
        out << " is a resistor between " << net_phrase(term[TerminalRole::P]) << " and "
            << net_phrase(term[TerminalRole::N]);
        break;
      case NodeKind::Capacitor:
        out << " is a capacitor between " << net_phrase(term[TerminalRole::P]) << " and "
            << net_phrase(term[TerminalRole::N]);
        break;
      case NodeKind::CurrentSource:
        out << " is a current source from " << net_phrase(term[TerminalRole::P]) << " to "
            << net_phrase(term[TerminalRole::N]);
        break;
      case NodeKind::VoltageSource:
        out << " is a voltage source with positive terminal on " << net_phrase(term[TerminalRole::P])
            << " and negative terminal on " << net_phrase(term[TerminalRole::N]);
        break;
      case NodeKind::Supernode: {
        const Supernode* s = g.supernode(n.label);
        out << " is a " << (s ? s->template_name : "module");
        if (s) out << " module (" << to_string(s->polarity) << "-type) made of ";
        if (s) {
          auto names = s->member_names();
          for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ", " : "") << names[i];
        }
        for (std::size_t i = 0; i < ports.size(); ++i)
          out << (i ? ", " : " with ") << "port " << ports[i]->role << " on " << net_phrase(g.node(ports[i]->net).label);
        break;
      }
      case NodeKind::Net: break;
    }
    out << ".\n";
  }
  out << "Ground net: " << (g.ground() ? g.node(*g.ground()).label : "none")
      << ". Supply net: " << (g.supply() ? g.node(*g.supply()).label : "none") << ".\n";
  return out.str();
}

json device_to_json(const Device& d) {
  json j;
  j["name"] = d.name;
  j["kind"] = std::string(to_string(d.kind));
  json terms = json::array();
  for (const auto& t : d.terminals) terms.push_back({std::string(to_string(t.role)), t.net});
  j["terminals"] = terms;
  json params = json::object();
  for (const auto& [k, v] : d.params) params[k] = param_to_json(v);
  j["params"] = params;
  if (!d.model.empty()) j["model"] = d.model;
  return j;
}

Device device_from_json(const json& j) {
  Device d;
  d.name = j.at("name").get<std::string>();
  d.kind = device_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& t : j.at("terminals"))
    d.terminals.push_back({terminal_from_string(t.at(0).get<std::string>()), t.at(1).get<std::string>()});
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) d.params.emplace(k, param_from_json(v));
  d.model = j.value("model", std::string{});
  return d;
}

json supernode_to_json(const Supernode& s) {
  json j;
  j["id"] = s.id;
  j["template"] = s.template_name;
  j["polarity"] = std::string(to_string(s.polarity));
  json members = json::array();
  for (const auto& d : s.members) members.push_back(device_to_json(d));
  j["members"] = members;
  j["member_roles"] = s.member_roles;
  j["ports"] = s.ports;
  j["port_conducts"] = s.port_conducts;
  j["internal_roles"] = s.internal_roles;
  json pairs = json::array();
  for (const auto& [a, b] : s.symmetric_pairs) pairs.push_back({a, b});
  j["symmetric_pairs"] = pairs;
  return j;
}

Supernode supernode_from_json(const json& j) {
  Supernode s;
  s.id = j.at("id").get<std::string>();
  s.template_name = j.at("template").get<std::string>();
  s.polarity = polarity_from_string(j.value("polarity", std::string("N")));
  for (const auto& m : j.at("members")) s.members.push_back(device_from_json(m));
  s.member_roles = j.value("member_roles", std::map<std::string, std::string>{});
  s.ports = j.at("ports").get<std::map<std::string, std::string>>();
  s.port_conducts = j.value("port_conducts", std::map<std::string, bool>{});
  s.internal_roles = j.value("internal_roles", std::set<std::string>{});
  if (j.contains("symmetric_pairs"))
    for (const auto& p : j.at("symmetric_pairs")) s.symmetric_pairs.emplace_back(p.at(0), p.at(1));
  return s;
}

json graph_to_json(const CircuitGraph& g) {
  json j;
  j["schema"] = std::string(kGraphSchema);
  j["title"] = g.title();
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    json o{{"id", n.id.value}, {"label", n.label}};
    o["kind"] = n.is_device_side() ? std::string(to_string(n.kind)) : std::string(to_string(n.tag));
    if (n.internal) o["internal"] = true;
    if (!n.params.empty()) {
      json p = json::object();
      for (const auto& [k, v] : n.params) p[k] = param_to_json(v);
      o["params"] = p;
    }
    if (!n.model.empty()) o["model"] = n.model;
    nodes.push_back(o);
  }
  json edges = json::array();
  for (const auto& e : g.edges()) {
    json o{{"device", e.device.value}, {"net", e.net.value}, {"label", std::string(to_string(e.label))}};
    if (e.label == EdgeLabel::Port) {
      o["role"] = e.role;
      o["conducts"] = e.conducts;
    } else {
      o["terminal"] = std::string(to_string(e.terminal));
    }
    edges.push_back(o);
  }
  j["nodes"] = nodes;
  j["edges"] = edges;
  j["rails"] = {{"gnd", g.ground() ? json(g.node(*g.ground()).label) : json(nullptr)},
                {"vdd", g.supply() ? json(g.node(*g.supply()).label) : json(nullptr)}};
  json supers = json::array();
  for (const auto& s : g.supernodes()) supers.push_back(supernode_to_json(s));
  j["supernodes"] = supers;
  return j;
}

CircuitGraph graph_from_json(const json& j) {
  GraphBuilder b(j.value("title", std::string{}));
  std::map<std::uint32_t, const json*> by_id;
  for (const auto& n : j.at("nodes")) by_id[n.at("id").get<std::uint32_t>()] = &n;
  auto label_of = [&](const json& ref) -> const json& {
    auto it = by_id.find(ref.get<std::uint32_t>());
    if (it == by_id.end()) throw SchemaError("edge references unknown node " + ref.dump());
    return *it->second;
  };

  std::map<std::uint32_t, Device> devices;
  for (const auto& [id, n] : by_id) {
    std::string kind = n->at("kind").get<std::string>();
    std::string label = n->at("label").get<std::string>();
    if (kind == "net" || kind == "GND" || kind == "VDD") {
      NetTag tag = kind == "GND" ? NetTag::Gnd : kind == "VDD" ? NetTag::Vdd : NetTag::Net;
      b.add_net(label, tag, n->value("internal", false));
    } else if (kind != "SUPERNODE") {
      Device d;
      d.name = label;
      d.kind = device_kind_from_string(kind);
      if (n->contains("params"))
        for (const auto& [k, v] : n->at("params").items()) d.params.emplace(k, param_from_json(v));
      d.model = n->value("model", std::string{});
      devices.emplace(id, std::move(d));
    }
  }
  for (const auto& e : j.at("edges")) {
    const json& dev = label_of(e.at("device"));
    const json& net = label_of(e.at("net"));
    auto it = devices.find(dev.at("id").get<std::uint32_t>());
    if (it == devices.end()) continue;  // supernode ports come from the supernode records
    std::string net_kind = net.at("kind").get<std::string>();
    if (net_kind != "net" && net_kind != "GND" && net_kind != "VDD")
      throw SchemaError("edge does not join a device to a net");
    TerminalRole role;
    if (e.contains("terminal")) {
      role = terminal_from_string(e.at("terminal").get<std::string>());
    } else {
      EdgeLabel l = edge_label_from_string(e.at("label").get<std::string>());
      switch (l) {
        case EdgeLabel::G: role = TerminalRole::G; break;
        case EdgeLabel::S: role = TerminalRole::S; break;
        case EdgeLabel::D: role = TerminalRole::D; break;
        case EdgeLabel::B: role = TerminalRole::B; break;
        default: role = it->second.terminals.empty() ? TerminalRole::P : TerminalRole::N; break;
      }
    }
    it->second.terminals.push_back({role, net.at("label").get<std::string>()});
  }
  for (auto& [id, d] : devices) b.add_device(d);
  if (j.contains("supernodes"))
    for (const auto& s : j.at("supernodes")) b.add_supernode(supernode_from_json(s));
  return b.build();
}

}  // namespace sizer
