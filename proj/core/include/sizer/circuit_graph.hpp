#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/netlist.hpp"

namespace sizer {

enum class NodeKind { Nmos, Pmos, Resistor, Capacitor, CurrentSource, VoltageSource, Supernode, Net };
enum class NetTag { Net, Gnd, Vdd };

/// Edge labels. G/S/D/R/C/I/V form the base label set; B marks MOS bulk
/// connections and Port marks supernode boundary edges.
enum class EdgeLabel { G, S, D, R, C, I, V, B, Port };

enum class Polarity { N, P, Complementary };

std::string_view to_string(NodeKind kind);
std::string_view to_string(NetTag tag);
std::string_view to_string(EdgeLabel label);
std::string_view to_string(Polarity polarity);
EdgeLabel edge_label_from_string(std::string_view text);
bool is_base_label(EdgeLabel label) noexcept;

struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Net;
  NetTag tag = NetTag::Net;
  std::string label;
  bool internal = false;                     // net enclosed by a single supernode
  std::map<std::string, ParamValue> params;  // primitive devices only
  std::string model;                         // MOS model card

  bool is_device_side() const noexcept { return kind != NodeKind::Net; }
  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  NodeId device;
  NodeId net;
  EdgeLabel label = EdgeLabel::R;
  TerminalRole terminal = TerminalRole::P;  // originating terminal for primitive devices
  std::string role;                         // port role on supernode edges
  bool conducts = true;                     // meaningful for port edges
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// A collapsed template match. Member device records are kept so the graph
/// stays lossless after collapsing.
struct Supernode {
  std::string id;
  std::string template_name;
  Polarity polarity = Polarity::N;
  std::vector<Device> members;
  std::map<std::string, std::string> member_roles;    // device -> pattern device label
  std::map<std::string, std::string> ports;           // role -> net
  std::map<std::string, bool> port_conducts;          // role -> conducts
  std::set<std::string> internal_roles;               // roles whose net is enclosed
  std::vector<std::pair<std::string, std::string>> symmetric_pairs;

  std::vector<std::string> member_names() const;
  friend bool operator==(const Supernode&, const Supernode&) = default;
};

class GraphBuilder;

/// Typed bipartite graph of device-side nodes and net nodes. Immutable once built.
class CircuitGraph {
 public:
  const std::string& title() const noexcept { return title_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Supernode>& supernodes() const noexcept { return supernodes_; }

  bool contains(NodeId id) const noexcept { return id.value < nodes_.size(); }
  const Node& node(NodeId id) const;
  /// Indices into edges() of every edge touching `id`.
  const std::vector<std::size_t>& incident(NodeId id) const;

  std::optional<NodeId> find_device(std::string_view label) const;
  std::optional<NodeId> find_net(std::string_view label) const;
  const Supernode* supernode(std::string_view id) const;

  std::optional<NodeId> ground() const noexcept { return ground_; }
  std::optional<NodeId> supply() const noexcept { return supply_; }

  std::size_t device_node_count() const;  // device-side nodes (primitives and supernodes)
  std::size_t primitive_device_count() const;
  std::size_t net_node_count() const;
  bool is_bipartite() const;

  friend bool operator==(const CircuitGraph&, const CircuitGraph&) = default;

 private:
  friend class GraphBuilder;
  std::string title_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> incidence_;
  std::vector<Supernode> supernodes_;
  std::optional<NodeId> ground_;
  std::optional<NodeId> supply_;
};

/// Assembles a CircuitGraph with deterministic, name-sorted node ids.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string title = {}) : title_(std::move(title)) {}
  GraphBuilder& add_net(const std::string& label, NetTag tag = NetTag::Net, bool internal = false);
  GraphBuilder& add_device(const Device& device);
  GraphBuilder& add_supernode(const Supernode& supernode);
  CircuitGraph build() const;

 private:
  std::string title_;
  std::map<std::string, std::pair<NetTag, bool>> nets_;
  std::vector<Device> devices_;
  std::vector<Supernode> supernodes_;
};

CircuitGraph build_graph(const Netlist& netlist);

/// Device record of a primitive device node, terminals in original order.
Device device_record(const CircuitGraph& g, NodeId id);

/// Rebuilds the netlist from graph structure (supernode members expanded).
Netlist reconstruct_netlist(const CircuitGraph& g);

/// Neighbors of `v`, sorted by neighbor label then edge label.
std::vector<std::pair<NodeId, EdgeLabel>> neighbors(const CircuitGraph& g, NodeId v,
                                                    const std::optional<std::set<EdgeLabel>>& label_filter = {});

/// One sentence per device-side node plus a rails summary; deterministic.
std::string to_text(const CircuitGraph& g);

nlohmann::json device_to_json(const Device& d);
Device device_from_json(const nlohmann::json& j);
nlohmann::json supernode_to_json(const Supernode& s);
Supernode supernode_from_json(const nlohmann::json& j);

nlohmann::json graph_to_json(const CircuitGraph& g);
CircuitGraph graph_from_json(const nlohmann::json& j);

inline constexpr std::string_view kGraphSchema = "sizer.graph/1";

}  // namespace sizer
