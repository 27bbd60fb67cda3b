#include "sizer/template_matcher.hpp"

#include <algorithm>
#include <numeric>

#include "embedded_data.hpp"
#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

constexpr TerminalRole kMosTerminals[] = {TerminalRole::G, TerminalRole::S, TerminalRole::D};

EdgeLabel label_of(TerminalRole r) {
  switch (r) {
    case TerminalRole::G: return EdgeLabel::G;
    case TerminalRole::S: return EdgeLabel::S;
    default: return EdgeLabel::D;
  }
}

NodeKind flip(NodeKind k) {
  if (k == NodeKind::Nmos) return NodeKind::Pmos;
  if (k == NodeKind::Pmos) return NodeKind::Nmos;
  return k;
}

Polarity parse_polarity(const std::string& s) {
  if (s == "N") return Polarity::N;
  if (s == "P") return Polarity::P;
  if (s == "NP") return Polarity::Complementary;
  throw SchemaError("unknown polarity variant '" + s + "'");
}

// G/S/D nets of every primitive MOS node.
struct MosView {
  NodeId id;
  NodeKind kind;
  std::map<TerminalRole, NodeId> nets;
};

std::vector<MosView> mos_devices(const CircuitGraph& g) {
  std::vector<MosView> out;
  for (const auto& n : g.nodes()) {
    if (n.kind != NodeKind::Nmos && n.kind != NodeKind::Pmos) continue;
    MosView v{n.id, n.kind, {}};
    for (auto k : g.incident(n.id)) {
      const Edge& e = g.edges()[k];
      if (e.label == EdgeLabel::G || e.label == EdgeLabel::S || e.label == EdgeLabel::D) v.nets[e.terminal] = e.net;
    }
    out.push_back(std::move(v));
  }
  return out;
}

bool net_only_touches(const CircuitGraph& g, NodeId net, const std::set<NodeId>& devices) {
  for (auto k : g.incident(net)) {
    const Edge& e = g.edges()[k];
    if (e.label == EdgeLabel::B) continue;
    if (!devices.count(e.device)) return false;
  }
  return true;
}

// Pattern devices ordered so each one after the first shares a net with an earlier one.
std::vector<std::size_t> search_order(const std::vector<PatternDevice>& devs) {
  auto shared = [&](std::size_t a, std::size_t b) {
    int c = 0;
    for (const auto& [ra, na] : devs[a].nets)
      for (const auto& [rb, nb] : devs[b].nets) c += na == nb;
    return c;
  };
  std::vector<std::size_t> order;
  std::vector<bool> placed(devs.size(), false);
  while (order.size() < devs.size()) {
    std::size_t best = devs.size();
    int best_score = -1;
    for (std::size_t i = 0; i < devs.size(); ++i) {
      if (placed[i]) continue;
      int score = 0;
      for (std::size_t j = 0; j < devs.size(); ++j)
        if (j != i && (order.empty() || placed[j])) score += shared(i, j);
      if (score > best_score) best_score = score, best = i;
    }
    placed[best] = true;
    order.push_back(best);
  }
  return order;
}

class Matcher {
 public:
  Matcher(const CircuitGraph& g, const Template& t, Polarity pol)
      : g_(g), t_(t), pol_(pol), devs_(t.devices_for(pol)), order_(search_order(devs_)), mos_(mos_devices(g)) {
    for (std::size_t i = 0; i < mos_.size(); ++i) index_[mos_[i].id] = i;
    dev_bind_.assign(devs_.size(), SIZE_MAX);
    net_bind_.assign(t.nets.size(), std::nullopt);
  }

  std::vector<MatchResult> run() {
    search(0);
    return std::move(found_);
  }

 private:
  void search(std::size_t depth) {
    if (depth == order_.size()) {
      accept();
      return;
    }
    const PatternDevice& pd = devs_[order_[depth]];
    for (std::size_t c : candidates(pd)) {
      if (used_dev_.count(c) || mos_[c].kind != pd.kind) continue;
      std::vector<std::size_t> newly;
      if (bind_nets(pd, mos_[c], newly)) {
        dev_bind_[order_[depth]] = c;
        used_dev_.insert(c);
        search(depth + 1);
        used_dev_.erase(c);
        dev_bind_[order_[depth]] = SIZE_MAX;
      }
      for (auto idx : newly) {
        used_net_.erase(*net_bind_[idx]);
        net_bind_[idx].reset();
      }
    }
  }

  std::vector<std::size_t> candidates(const PatternDevice& pd) const {
    for (auto r : kMosTerminals) {
      auto pn = pd.nets.at(r);
      if (!net_bind_[pn]) continue;
      std::vector<std::size_t> out;
      for (auto k : g_.incident(*net_bind_[pn])) {
        const Edge& e = g_.edges()[k];
        if (e.label != label_of(r)) continue;
        auto it = index_.find(e.device);
        if (it != index_.end()) out.push_back(it->second);
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
    std::vector<std::size_t> all(mos_.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  bool bind_nets(const PatternDevice& pd, const MosView& dev, std::vector<std::size_t>& newly) {
    for (auto r : kMosTerminals) {
      auto pn = pd.nets.at(r);
      auto it = dev.nets.find(r);
      if (it == dev.nets.end()) return false;
      NodeId cn = it->second;
      if (net_bind_[pn]) {
        if (*net_bind_[pn] != cn) return false;
      } else {
        if (used_net_.count(cn)) return false;
        net_bind_[pn] = cn;
        used_net_.insert(cn);
        newly.push_back(pn);
      }
    }
    return true;
  }

  void accept() {
    std::set<NodeId> members;
    for (auto c : dev_bind_) members.insert(mos_[c].id);
    for (std::size_t i = 0; i < t_.nets.size(); ++i) {
      const PatternNet& pn = t_.nets[i];
      NodeId cn = *net_bind_[i];
      bool rail = g_.node(cn).tag != NetTag::Net;
      if ((pn.not_rail || pn.internal) && rail) return;
      if (pn.internal && !net_only_touches(g_, cn, members)) return;
    }
    MatchResult m;
    m.template_name = t_.name;
    m.priority = t_.priority;
    m.polarity = pol_;
    for (std::size_t i = 0; i < devs_.size(); ++i) m.device_binding[devs_[i].label] = g_.node(mos_[dev_bind_[i]].id).label;
    for (std::size_t i = 0; i < t_.nets.size(); ++i) m.net_binding[t_.nets[i].label] = g_.node(*net_bind_[i]).label;
    auto key = m.members();
    if (seen_.insert(key).second) found_.push_back(std::move(m));
  }

  const CircuitGraph& g_;
  const Template& t_;
  Polarity pol_;
  std::vector<PatternDevice> devs_;
  std::vector<std::size_t> order_;
  std::vector<MosView> mos_;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::size_t> dev_bind_;
  std::vector<std::optional<NodeId>> net_bind_;
  std::set<std::size_t> used_dev_;
  std::set<NodeId> used_net_;
  std::set<std::vector<std::string>> seen_;
  std::vector<MatchResult> found_;
};

const Template& find_template(const std::vector<Template>& lib, const std::string& name) {
  for (const auto& t : lib)
    if (t.name == name) return t;
  throw SchemaError("match refers to unknown template '" + name + "'");
}

}  // namespace

std::vector<PatternDevice> Template::devices_for(Polarity polarity) const {
  auto out = devices;
  if (polarity == Polarity::P)
    for (auto& d : out) d.kind = flip(d.kind);
  return out;
}

std::vector<std::string> MatchResult::members() const {
  std::vector<std::string> out;
  for (const auto& [p, c] : device_binding) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Template> load_library(const json& j) {
  const json& list = j.is_array() ? j : j.at("templates");
  std::vector<Template> lib;
  for (const auto& tj : list) {
    Template t;
    t.name = tj.at("name").get<std::string>();
    t.priority = tj.at("priority").get<int>();
    for (const auto& p : tj.value("polarity_variants", std::vector<std::string>{"N"}))
      t.polarities.push_back(parse_polarity(p));
    auto roles = tj.value("port_roles", std::map<std::string, std::string>{});

    std::map<int, std::size_t> dev_of, net_of;
    for (const auto& n : tj.at("nodes")) {
      int id = n.at("id").get<int>();
      std::string kind = n.at("kind").get<std::string>();
      std::string label = n.at("label").get<std::string>();
      if (kind == "net") {
        PatternNet pn;
        pn.label = label;
        pn.conducts = n.value("conducts", true);
        pn.internal = n.value("internal", false);
        pn.not_rail = n.value("not_rail", false);
        if (auto it = roles.find(label); it != roles.end()) pn.role = it->second;
        if (pn.role.empty() && !pn.internal)
          throw SchemaError("template " + t.name + ": boundary net '" + label + "' has no port role");
        net_of[id] = t.nets.size();
        t.nets.push_back(pn);
      } else if (kind == "NMOS" || kind == "PMOS") {
        dev_of[id] = t.devices.size();
        t.devices.push_back({label, kind == "NMOS" ? NodeKind::Nmos : NodeKind::Pmos, {}});
      } else {
        throw SchemaError("template " + t.name + ": unsupported pattern node kind '" + kind + "'");
      }
    }
    for (const auto& e : tj.at("edges")) {
      auto d = dev_of.find(e.at("device").get<int>());
      auto n = net_of.find(e.at("net").get<int>());
      if (d == dev_of.end() || n == net_of.end()) throw SchemaError("template " + t.name + ": edge endpoint invalid");
      auto label = edge_label_from_string(e.at("label").get<std::string>());
      TerminalRole r = label == EdgeLabel::G   ? TerminalRole::G
                       : label == EdgeLabel::S ? TerminalRole::S
                       : label == EdgeLabel::D ? TerminalRole::D
                                               : throw SchemaError("template " + t.name + ": pattern edges must be G/S/D");
      t.devices[d->second].nets[r] = n->second;
    }
    for (const auto& d : t.devices)
      if (d.nets.size() != 3) throw SchemaError("template " + t.name + ": device " + d.label + " lacks G/S/D edges");
    for (const auto& p : tj.value("symmetry", json::array())) t.symmetry.emplace_back(p.at(0), p.at(1));
    if (t.devices.empty()) throw SchemaError("template " + t.name + " has no devices");
    lib.push_back(std::move(t));
  }
  std::stable_sort(lib.begin(), lib.end(), [](const Template& a, const Template& b) { return a.priority > b.priority; });
  return lib;
}

json library_to_json(const std::vector<Template>& lib) {
  json list = json::array();
  for (const auto& t : lib) {
    json tj;
    tj["name"] = t.name;
    tj["priority"] = t.priority;
    json pols = json::array();
    for (auto p : t.polarities) pols.push_back(std::string(to_string(p)));
    tj["polarity_variants"] = pols;
    json nodes = json::array(), edges = json::array(), roles = json::object();
    for (std::size_t i = 0; i < t.devices.size(); ++i)
      nodes.push_back({{"id", i}, {"kind", std::string(to_string(t.devices[i].kind))}, {"label", t.devices[i].label}});
    for (std::size_t i = 0; i < t.nets.size(); ++i) {
      const auto& n = t.nets[i];
      json nj{{"id", t.devices.size() + i}, {"kind", "net"}, {"label", n.label}};
      if (!n.conducts) nj["conducts"] = false;
      if (n.internal) nj["internal"] = true;
      if (n.not_rail) nj["not_rail"] = true;
      if (!n.role.empty()) roles[n.label] = n.role;
      nodes.push_back(nj);
    }
    for (std::size_t i = 0; i < t.devices.size(); ++i)
      for (const auto& [r, n] : t.devices[i].nets)
        edges.push_back({{"device", i}, {"net", t.devices.size() + n}, {"label", std::string(to_string(label_of(r)))}});
    tj["nodes"] = nodes;
    tj["edges"] = edges;
    tj["port_roles"] = roles;
    json sym = json::array();
    for (const auto& [a, b] : t.symmetry) sym.push_back({a, b});
    tj["symmetry"] = sym;
    list.push_back(tj);
  }
  return {{"schema", "sizer.templates/1"}, {"templates", list}};
}

std::vector<Template> builtin_library() {
  static const std::vector<Template> lib = load_library(json::parse(detail::embedded_templates()));
  return lib;
}

std::vector<MatchResult> find_matches(const CircuitGraph& g, const Template& t) {
  std::vector<MatchResult> out;
  std::set<std::vector<std::string>> seen;
  for (auto pol : t.polarities)
    for (auto& m : Matcher(g, t, pol).run())
      if (seen.insert(m.members()).second) out.push_back(std::move(m));
  return out;
}

bool verify_match(const CircuitGraph& g, const Template& t, const MatchResult& m) {
  auto devs = t.devices_for(m.polarity);
  std::set<std::string> dev_images, net_images;
  std::set<NodeId> members;
  for (const auto& pd : devs) {
    auto it = m.device_binding.find(pd.label);
    if (it == m.device_binding.end()) return false;
    auto id = g.find_device(it->second);
    if (!id || g.node(*id).kind != pd.kind || !dev_images.insert(it->second).second) return false;
    members.insert(*id);
    for (auto r : kMosTerminals) {
      const std::string& expect = m.net_binding.at(t.nets[pd.nets.at(r)].label);
      bool ok = false;
      for (auto k : g.incident(*id)) {
        const Edge& e = g.edges()[k];
        if (e.label == label_of(r) && g.node(e.net).label == expect) ok = true;
      }
      if (!ok) return false;
    }
  }
  if (m.net_binding.size() != t.nets.size()) return false;
  for (const auto& pn : t.nets) {
    const std::string& cn = m.net_binding.at(pn.label);
    if (!net_images.insert(cn).second) return false;
    auto id = g.find_net(cn);
    if (!id) return false;
    bool rail = g.node(*id).tag != NetTag::Net;
    if ((pn.not_rail || pn.internal) && rail) return false;
    if (pn.internal && !net_only_touches(g, *id, members)) return false;
  }
  return true;
}

std::vector<MatchResult> resolve_overlaps(std::vector<MatchResult> matches) {
  std::stable_sort(matches.begin(), matches.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.device_binding.size() != b.device_binding.size()) return a.device_binding.size() > b.device_binding.size();
    return a.members() < b.members();
  });
  std::set<std::string> taken;
  std::vector<MatchResult> kept;
  for (auto& m : matches) {
    auto mem = m.members();
    if (std::any_of(mem.begin(), mem.end(), [&](const std::string& d) { return taken.count(d); })) continue;
    taken.insert(mem.begin(), mem.end());
    kept.push_back(std::move(m));
  }
  return kept;
}

CollapseResult collapse(const CircuitGraph& g, const std::vector<MatchResult>& matches, const std::vector<Template>& lib) {
  std::map<std::string, std::size_t> owner;
  for (std::size_t i = 0; i < matches.size(); ++i)
    for (const auto& d : matches[i].members())
      if (!owner.emplace(d, i).second) throw OverlappingMatches(d);

  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return matches[a].members() < matches[b].members(); });

  std::set<std::string> internal_nets;
  std::vector<Supernode> created;
  std::size_t next = g.supernodes().size() + 1;
  for (auto i : order) {
    const MatchResult& m = matches[i];
    const Template& t = find_template(lib, m.template_name);
    Supernode s;
    s.id = "X" + std::to_string(next++);
    s.template_name = m.template_name;
    s.polarity = m.polarity;
    for (const auto& pd : t.devices) {
      const std::string& name = m.device_binding.at(pd.label);
      auto id = g.find_device(name);
      if (!id) throw UnknownNode("match binds unknown device '" + name + "'");
      s.members.push_back(device_record(g, *id));
      s.member_roles[name] = pd.label;
    }
    for (const auto& pn : t.nets) {
      const std::string& net = m.net_binding.at(pn.label);
      if (pn.internal) {
        s.internal_roles.insert(pn.label);
        internal_nets.insert(net);
      } else {
        s.ports[pn.role] = net;
        s.port_conducts[pn.role] = pn.conducts;
      }
    }
    for (const auto& [a, b] : t.symmetry) s.symmetric_pairs.emplace_back(m.device_binding.at(a), m.device_binding.at(b));
    created.push_back(std::move(s));
  }

  GraphBuilder b(g.title());
  for (const auto& n : g.nodes()) {
    if (n.is_device_side()) continue;
    b.add_net(n.label, n.tag, n.internal || internal_nets.count(n.label));
  }
  for (const auto& n : g.nodes()) {
    if (n.is_device_side() && n.kind != NodeKind::Supernode && !owner.count(n.label))
      b.add_device(device_record(g, n.id));
  }
  for (const auto& s : g.supernodes()) b.add_supernode(s);
  for (const auto& s : created) b.add_supernode(s);
  CircuitGraph out = b.build();

  // Nets left touching only one supernode are enclosed by it.
  std::set<std::string> enclosed;
  for (const auto& n : out.nodes()) {
    if (n.is_device_side() || n.internal || n.tag != NetTag::Net) continue;
    std::set<NodeId> touching;
    for (auto k : out.incident(n.id)) touching.insert(out.edges()[k].device);
    if (touching.size() == 1 && out.node(*touching.begin()).kind == NodeKind::Supernode &&
        std::any_of(created.begin(), created.end(),
                    [&](const Supernode& s) { return s.id == out.node(*touching.begin()).label; }))
      enclosed.insert(n.label);
  }
  if (!enclosed.empty()) {
    GraphBuilder rb(g.title());
    for (const auto& n : out.nodes())
      if (!n.is_device_side()) rb.add_net(n.label, n.tag, n.internal || enclosed.count(n.label));
    for (const auto& n : out.nodes())
      if (n.is_device_side() && n.kind != NodeKind::Supernode) rb.add_device(device_record(out, n.id));
    for (const auto& s : out.supernodes()) rb.add_supernode(s);
    out = rb.build();
  }
  return {std::move(out), std::move(created)};
}

CircuitGraph collapse_to_fixpoint(const CircuitGraph& g, const std::vector<Template>& lib) {
  CircuitGraph current = g;
  while (true) {
    std::vector<MatchResult> all;
    for (const auto& t : lib) {
      auto ms = find_matches(current, t);
      all.insert(all.end(), ms.begin(), ms.end());
    }
    auto kept = resolve_overlaps(std::move(all));
    if (kept.empty()) return current;
    current = collapse(current, kept, lib).graph;
  }
}

}  // namespace sizer
