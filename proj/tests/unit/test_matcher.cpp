#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "sizer/error.hpp"
#include "sizer/template_matcher.hpp"

using namespace sizer;

namespace {

const Template& lib_template(const std::string& name) {
  static const auto lib = builtin_library();
  for (const auto& t : lib)
    if (t.name == name) return t;
  throw std::runtime_error("no template " + name);
}

std::set<std::vector<std::string>> member_sets(const std::vector<MatchResult>& ms) {
  std::set<std::vector<std::string>> out;
  for (const auto& m : ms) out.insert(m.members());
  return out;
}

std::set<std::string> net_labels(const CircuitGraph& g) {
  std::set<std::string> out;
  for (const auto& n : g.nodes())
    if (!n.is_device_side()) out.insert(n.label);
  return out;
}

const char* kPair =
    "M1 x a tail 0 nch W=w1 L=l1\n"
    "M2 y b tail 0 nch W=w1 L=l1\n"
    "I1 tail 0 10u\n"
    "R1 vdd x 10k\n"
    "R2 vdd y 10k\n";

const char* kCascodeMirror =
    "I1 vdd b 10u\n"
    "M1 a a 0 0 nch W=1u L=1u\n"
    "M2 x a 0 0 nch W=1u L=1u\n"
    "M3 b b a 0 nch W=1u L=1u\n"
    "M4 out b x 0 nch W=1u L=1u\n"
    "R1 vdd out 10k\n";

}  // namespace

TEST_SUITE("matcher") {
  TEST_CASE("built-in library order and shapes") {
    const auto lib = builtin_library();
    std::vector<std::string> names;
    for (const auto& t : lib) names.push_back(t.name);
    CHECK(names == std::vector<std::string>{"CascodeMirror", "ClassAB", "Cascode", "DiffPair", "CurrentMirror", "DiodeMOS"});
    for (std::size_t i = 1; i < lib.size(); ++i) CHECK(lib[i - 1].priority > lib[i].priority);

    const auto& dp = lib_template("DiffPair");
    REQUIRE(dp.devices.size() == 2);
    CHECK(dp.devices[0].kind == dp.devices[1].kind);
    CHECK(dp.devices[0].nets.at(TerminalRole::S) == dp.devices[1].nets.at(TerminalRole::S));
    CHECK(dp.devices[0].nets.at(TerminalRole::G) != dp.devices[1].nets.at(TerminalRole::G));
    CHECK(dp.devices[0].nets.at(TerminalRole::D) != dp.devices[1].nets.at(TerminalRole::D));

    const auto& diode = lib_template("DiodeMOS");
    REQUIRE(diode.devices.size() == 1);
    CHECK(diode.devices[0].nets.at(TerminalRole::G) == diode.devices[0].nets.at(TerminalRole::D));

    CHECK(load_library(library_to_json(lib)).size() == lib.size());
  }

  TEST_CASE("hand-built current mirror matches") {
    auto g = build_graph(parse_netlist("I1 vdd g 10u\nM1 g g 0 0 nch W=1u L=1u\nM2 out g 0 0 nch W=1u L=1u\nR1 vdd out 1k\n"));
    auto ms = find_matches(g, lib_template("CurrentMirror"));
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].device_binding.at("MR") == "M1");
    CHECK(ms[0].device_binding.at("MO") == "M2");
  }

  TEST_CASE("differential pair") {
    auto g = build_graph(parse_netlist(kPair));
    auto ms = find_matches(g, lib_template("DiffPair"));
    CHECK(ms.size() == 1);
    CHECK(member_sets(ms) == oracle::exhaustive_matches(parse_netlist(kPair), lib_template("DiffPair")));

    auto split = build_graph(parse_netlist("M1 x a t1 0 nch W=1u L=1u\nM2 y b t2 0 nch W=1u L=1u\nR1 vdd x 1k\n"));
    CHECK(find_matches(split, lib_template("DiffPair")).empty());
  }

  TEST_CASE("diode-connected device") {
    auto g = build_graph(parse_netlist("M1 n1 n1 0 0 nch W=1u L=1u\nR1 vdd n1 1k\n"));
    CHECK(find_matches(g, lib_template("DiodeMOS")).size() == 1);
  }

  TEST_CASE("collapse a differential pair") {
    auto g = build_graph(parse_netlist(kPair));
    auto ms = find_matches(g, lib_template("DiffPair"));
    auto c = collapse(g, ms);
    CHECK(c.supernodes.size() == 1);
    CHECK(c.graph.device_node_count() == 4);
    CHECK(c.graph.primitive_device_count() == 3);
    CHECK(c.graph.find_net("tail").has_value());
    CHECK(net_labels(c.graph) == net_labels(g));
    CHECK(c.graph.is_bipartite());
    CHECK(c.supernodes[0].ports.at("tail") == "tail");
  }

  TEST_CASE("collapse with no matches is the identity") {
    auto g = build_graph(parse_netlist(kPair));
    CHECK(collapse(g, {}).graph == g);
  }

  TEST_CASE("overlapping matches are refused by collapse") {
    auto g = build_graph(parse_netlist(kCascodeMirror));
    auto ms = find_matches(g, lib_template("DiodeMOS"));
    auto mirrors = find_matches(g, lib_template("CurrentMirror"));
    REQUIRE_FALSE(mirrors.empty());
    ms.insert(ms.end(), mirrors.begin(), mirrors.end());
    CHECK_THROWS_AS(collapse(g, ms), OverlappingMatches);
  }

  TEST_CASE("overlap resolution") {
    auto g = build_graph(parse_netlist(kCascodeMirror));
    std::vector<MatchResult> all;
    for (const auto& t : builtin_library()) {
      auto ms = find_matches(g, t);
      all.insert(all.end(), ms.begin(), ms.end());
    }
    auto kept = resolve_overlaps(all);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].template_name == "CascodeMirror");

    auto mirror = build_graph(parse_netlist("I1 vdd g 10u\nM1 g g 0 0 nch W=1u L=1u\nM2 out g 0 0 nch W=1u L=1u\nR1 vdd out 1k\n"));
    auto ms = find_matches(mirror, lib_template("CurrentMirror"));
    auto diodes = find_matches(mirror, lib_template("DiodeMOS"));
    REQUIRE(diodes.size() == 1);
    ms.insert(ms.end(), diodes.begin(), diodes.end());
    kept = resolve_overlaps(ms);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].template_name == "CurrentMirror");

    auto two = build_graph(parse_netlist(std::string(kPair) +
                                         "M3 p c t2 0 nch W=1u L=1u\nM4 q d t2 0 nch W=1u L=1u\nI2 t2 0 1u\nR3 vdd p 1k\nR4 vdd q 1k\n"));
    CHECK(resolve_overlaps(find_matches(two, lib_template("DiffPair"))).size() == 2);
  }

  TEST_CASE("matches are sound and agree with the exhaustive oracle on small random circuits") {
    Rng rng(5);
    oracle::RandomNetlistOptions opts;
    opts.mos_only = true;
    opts.min_devices = 2;
    opts.max_devices = 8;
    opts.nets = 3;
    opts.three_terminal_mos = false;
    std::size_t total = 0;
    for (int i = 0; i < 200; ++i) {
      const auto text = oracle::random_netlist_text(rng, opts);
      const auto n = parse_netlist(text);
      const auto g = build_graph(n);
      for (const auto& t : builtin_library()) {
        const auto ms = find_matches(g, t);
        total += ms.size();
        for (const auto& m : ms) CHECK(verify_match(g, t, m));
        CHECK_MESSAGE(member_sets(ms) == oracle::exhaustive_matches(n, t), t.name << "\n" << text);
      }
    }
    CHECK(total > 50);
  }

  TEST_CASE("golden embeddings are found and removed by one collapse pass") {
    Rng rng(17);
    for (const auto& t : builtin_library()) {
      auto golden = oracle::embed_template(t, 2, rng);
      auto g = build_graph(parse_netlist(golden.text));
      auto ms = find_matches(g, t);
      CHECK_MESSAGE(member_sets(ms) == golden.golden, t.name);
      auto c = collapse(g, resolve_overlaps(ms));
      CHECK(find_matches(c.graph, t).empty());
    }
  }

  TEST_CASE("collapsing to a fixpoint terminates on random circuits") {
    Rng rng(23);
    oracle::RandomNetlistOptions opts;
    opts.mos_only = true;
    opts.max_devices = 14;
    opts.nets = 4;
    for (int i = 0; i < 50; ++i) {
      auto g = build_graph(parse_netlist(oracle::random_netlist_text(rng, opts)));
      auto fixed = collapse_to_fixpoint(g);
      CHECK(fixed.is_bipartite());
      CHECK(net_labels(fixed) == net_labels(g));
      for (const auto& t : builtin_library()) CHECK(resolve_overlaps(find_matches(fixed, t)).empty());
    }
  }
}
