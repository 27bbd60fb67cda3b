#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "sizer/circuit_graph.hpp"
#include "sizer/error.hpp"

using namespace sizer;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kDiffPair =
    "* pair\n"
    "M1 x a tail 0 nch W=w1 L=l1\n"
    "M2 y b tail 0 nch W=w1 L=l1\n"
    "I1 tail 0 10u\n"
    "R1 vdd x 10k\n"
    "R2 vdd y 10k\n";

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("smallest MOS graph") {
    auto g = build_graph(parse_netlist("M1 out in 0 0 nch W=2u L=180n\n"));
    CHECK(g.device_node_count() == 1);
    CHECK(g.net_node_count() == 3);
    std::multiset<EdgeLabel> labels;
    for (const auto& e : g.edges()) labels.insert(e.label);
    CHECK(labels == std::multiset<EdgeLabel>{EdgeLabel::D, EdgeLabel::G, EdgeLabel::S, EdgeLabel::B});
    CHECK(g.is_bipartite());
  }

  TEST_CASE("two-branch circuit: edge count equals terminal count") {
    // 2 MOS x 4 terminals + 3 two-terminal devices x 2 = 14
    auto g = build_graph(parse_netlist(kDiffPair));
    CHECK(g.device_node_count() == 5);
    CHECK(g.edges().size() == 14);
    CHECK(g.is_bipartite());
    for (const auto& e : g.edges()) {
      CHECK(g.node(e.device).is_device_side());
      CHECK_FALSE(g.node(e.net).is_device_side());
    }
  }

  TEST_CASE("empty netlist gives an empty graph") {
    auto g = build_graph(parse_netlist("* empty\n"));
    CHECK(g.nodes().empty());
    CHECK(g.edges().empty());
  }

  TEST_CASE("diode-connected device keeps both edges to one net") {
    auto g = build_graph(parse_netlist("M1 d d 0 0 nch W=1u L=1u\nR1 vdd d 1k\n"));
    auto m = *g.find_device("M1");
    auto d = *g.find_net("d");
    auto n = neighbors(g, m);
    CHECK(std::count_if(n.begin(), n.end(), [&](auto& p) { return p.first == d; }) == 2);
  }

  TEST_CASE("neighbors") {
    auto g = build_graph(parse_netlist(kDiffPair));
    auto m1 = *g.find_device("M1");
    auto src = neighbors(g, m1, std::set<EdgeLabel>{EdgeLabel::S});
    REQUIRE(src.size() == 1);
    CHECK(g.node(src[0].first).label == "tail");

    auto tail = *g.find_net("tail");
    auto around = neighbors(g, tail, std::set<EdgeLabel>{EdgeLabel::S});
    REQUIRE(around.size() == 2);
    CHECK(g.node(around[0].first).label == "M1");
    CHECK(g.node(around[1].first).label == "M2");
    CHECK(neighbors(g, tail) == neighbors(g, tail));

    CHECK_THROWS_AS(neighbors(g, NodeId{9999}), UnknownNode);
  }

  TEST_CASE("text rendering") {
    auto g = build_graph(parse_netlist("M1 out in 0 0 nch W=2u L=180n\n"));
    const auto text = to_text(g);
    CHECK(text == to_text(build_graph(parse_netlist("M1 out in 0 0 nch W=2u L=180n\n"))));
    CHECK(text.find("M1 is an NMOS with gate on") != std::string::npos);
    std::size_t device_lines = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) device_lines += line.rfind("M1 ", 0) == 0;
    CHECK(device_lines == 1);
    CHECK(count_lines(text) == 2);

    const auto pair_text = to_text(build_graph(parse_netlist(kDiffPair)));
    for (const char* dev : {"M1 is", "M2 is"}) {
      auto pos = pair_text.find(dev);
      REQUIRE(pos != std::string::npos);
      CHECK(pair_text.substr(pos, pair_text.find('\n', pos) - pos).find("tail") != std::string::npos);
    }
  }

  TEST_CASE("build then reconstruct is lossless on random netlists") {
    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
      const auto text = oracle::random_netlist_text(rng);
      const auto n = parse_netlist(text);
      const auto g = build_graph(n);
      CHECK(g.is_bipartite());
      CHECK_MESSAGE(equivalent(reconstruct_netlist(g), n), text);
      CHECK(graph_from_json(graph_to_json(g)) == g);
    }
  }

  TEST_CASE("benchmark netlists round-trip") {
    for (const char* name : {"ota", "fcota", "sacmp", "ldo", "diffpair_mirror"}) {
      const auto n = parse_netlist(oracle::read_file(oracle::data_path(std::string("netlists/") + name + ".sp")));
      CHECK_MESSAGE(equivalent(reconstruct_netlist(build_graph(n)), n), name);
    }
  }
}
