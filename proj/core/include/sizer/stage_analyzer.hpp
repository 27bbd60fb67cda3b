#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sizer/circuit_graph.hpp"

namespace sizer {

/// Current-carrying subgraph. Vertices keep the labels and kinds of the source graph.
struct ConductionGraph {
  struct Vertex {
    std::string label;
    bool device = false;
    NetTag tag = NetTag::Net;
  };
  struct Link {
    std::size_t device;
    std::size_t net;
    EdgeLabel label;
  };

  std::vector<Vertex> vertices;
  std::vector<Link> links;
  std::optional<std::size_t> vdd;
  std::optional<std::size_t> gnd;

  /// Distinct neighbors of `v`, ordered by label then index.
  const std::vector<std::size_t>& adjacent(std::size_t v) const { return adjacency_.at(v); }
  void index();  // rebuilds adjacency after vertices/links change

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
};

using ConductionPath = std::vector<std::size_t>;  // vertex indices, VDD first

struct Stage {
  std::string id;
  std::set<std::string> devices;  // primitive devices and supernodes
  std::set<std::string> nets;     // non-rail nets on the stage's paths
  bool primary_input = false;
  bool primary_output = false;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct StageEdge {
  std::string a;
  std::string b;
  std::set<std::string> nets;
  friend bool operator==(const StageEdge&, const StageEdge&) = default;
};

struct IoNets {
  std::set<std::string> inputs;
  std::set<std::string> outputs;
};

struct StageGraph {
  std::vector<Stage> stages;
  std::vector<StageEdge> edges;
};

inline constexpr std::size_t kDefaultPathCap = 100000;

ConductionGraph conduction_graph(const CircuitGraph& g);

/// Simple alternating VDD-to-GND paths in deterministic DFS order.
std::vector<ConductionPath> enumerate_paths(const ConductionGraph& cg, std::size_t cap = kDefaultPathCap);

/// Paths sharing a non-rail vertex end up in the same stage. Stages are named S1.. in
/// order of their smallest device label.
std::vector<Stage> merge_stages(const ConductionGraph& cg, const std::vector<ConductionPath>& paths);

StageGraph stage_graph(const CircuitGraph& g, std::vector<Stage> stages, const IoNets& io);

}  // namespace sizer
