#include "sizer/stage_analyzer.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "sizer/error.hpp"

namespace sizer {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

bool conducts(const CircuitGraph& g, const Edge& e) {
  switch (e.label) {
    case EdgeLabel::C:
    case EdgeLabel::G:
    case EdgeLabel::B: return false;
    case EdgeLabel::Port: return e.conducts;
    default: return g.node(e.device).is_device_side();
  }
}

}  // namespace

void ConductionGraph::index() {
  adjacency_.assign(vertices.size(), {});
  for (const auto& l : links) {
    adjacency_.at(l.device).push_back(l.net);
    adjacency_.at(l.net).push_back(l.device);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [&](std::size_t a, std::size_t b) {
      if (vertices[a].label != vertices[b].label) return vertices[a].label < vertices[b].label;
      return a < b;
    });
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
}

ConductionGraph conduction_graph(const CircuitGraph& g) {
  ConductionGraph cg;
  std::map<NodeId, std::size_t> slot;
  auto vertex = [&](NodeId id) {
    auto [it, fresh] = slot.emplace(id, cg.vertices.size());
    if (fresh) {
      const Node& n = g.node(id);
      cg.vertices.push_back({n.label, n.is_device_side(), n.tag});
    }
    return it->second;
  };
  if (g.supply()) cg.vdd = vertex(*g.supply());
  if (g.ground()) cg.gnd = vertex(*g.ground());
  for (const auto& e : g.edges()) {
    if (!conducts(g, e)) continue;
    std::size_t d = vertex(e.device);
    std::size_t n = vertex(e.net);
    cg.links.push_back({d, n, e.label});
  }
  cg.index();
  return cg;
}

std::vector<ConductionPath> enumerate_paths(const ConductionGraph& cg, std::size_t cap) {
  std::vector<ConductionPath> paths;
  if (!cg.vdd || !cg.gnd) throw NoConductionPath();
  const std::size_t gnd = *cg.gnd;
  std::vector<bool> on_path(cg.vertices.size(), false);
  ConductionPath current{*cg.vdd};
  on_path[*cg.vdd] = true;

  // Iterative DFS keeps deep ladders off the call stack.
  std::vector<std::size_t> cursor{0};
  while (!cursor.empty()) {
    std::size_t v = current.back();
    const auto& adj = cg.adjacent(v);
    if (cursor.back() == adj.size()) {
      on_path[v] = false;
      current.pop_back();
      cursor.pop_back();
      continue;
    }
    std::size_t w = adj[cursor.back()++];
    if (on_path[w]) continue;
    if (w == gnd) {
      if (paths.size() == cap) throw PathExplosion(cap);
      paths.push_back(current);
      paths.back().push_back(w);
      continue;
    }
    on_path[w] = true;
    current.push_back(w);
    cursor.push_back(0);
  }
  if (paths.empty()) throw NoConductionPath();
  return paths;
}

std::vector<Stage> merge_stages(const ConductionGraph& cg, const std::vector<ConductionPath>& paths) {
  DisjointSets sets(paths.size());
  std::map<std::size_t, std::size_t> first_path;  // vertex -> first path containing it
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (auto v : paths[p]) {
      if (cg.vertices[v].tag != NetTag::Net) continue;
      auto [it, fresh] = first_path.emplace(v, p);
      if (!fresh) sets.unite(it->second, p);
    }
  }
  std::map<std::size_t, Stage> classes;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    Stage& s = classes[sets.find(p)];
    for (auto v : paths[p]) {
      const auto& vx = cg.vertices[v];
      if (vx.device)
        s.devices.insert(vx.label);
      else if (vx.tag == NetTag::Net)
        s.nets.insert(vx.label);
    }
  }
  std::vector<Stage> out;
  for (auto& [root, s] : classes) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), [](const Stage& a, const Stage& b) {
    if (a.devices != b.devices) return a.devices < b.devices;
    return a.nets < b.nets;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "S" + std::to_string(i + 1);
  return out;
}

StageGraph stage_graph(const CircuitGraph& g, std::vector<Stage> stages, const IoNets& io) {
  std::map<std::string, std::size_t> owner;
  for (std::size_t i = 0; i < stages.size(); ++i)
    for (const auto& d : stages[i].devices)
      if (!owner.emplace(d, i).second) throw OverlappingStages("device '" + d + "' belongs to more than one stage");

  std::map<std::pair<std::size_t, std::size_t>, std::set<std::string>> links;
  for (const auto& n : g.nodes()) {
    if (n.is_device_side()) continue;
    std::set<std::size_t> touching;
    for (auto k : g.incident(n.id)) {
      const Edge& e = g.edges()[k];
      if (e.label == EdgeLabel::B) continue;
      auto it = owner.find(g.node(e.device).label);
      if (it != owner.end()) touching.insert(it->second);
    }
    for (auto s : touching) {
      if (io.inputs.count(n.label)) stages[s].primary_input = true;
      if (io.outputs.count(n.label)) stages[s].primary_output = true;
    }
    if (n.tag != NetTag::Net) continue;
    for (auto a = touching.begin(); a != touching.end(); ++a)
      for (auto b = std::next(a); b != touching.end(); ++b) links[{*a, *b}].insert(n.label);
  }
  StageGraph sg;
  for (const auto& [ab, nets] : links) sg.edges.push_back({stages[ab.first].id, stages[ab.second].id, nets});
  sg.stages = std::move(stages);
  return sg;
}

}  // namespace sizer
