#include <doctest.h>

#include <cmath>
#include <string>

#include "oracles.hpp"
#include "sizer/error.hpp"
#include "sizer/netlist.hpp"

using namespace sizer;

TEST_SUITE("netlist") {
  TEST_CASE("single NMOS card with literal sizes") {
    auto n = parse_netlist("M1 out in 0 0 nch W=2u L=180n\n");
    REQUIRE(n.devices.size() == 1);
    const Device& m = n.devices[0];
    CHECK(m.kind == DeviceKind::Nmos);
    CHECK(m.net(TerminalRole::D) == "out");
    CHECK(m.net(TerminalRole::G) == "in");
    CHECK(m.net(TerminalRole::S) == "0");
    CHECK(m.net(TerminalRole::B) == "0");
    CHECK(m.params.at("W") == ParamValue::literal(2e-6));
    CHECK(m.params.at("L").literal_value() == doctest::Approx(180e-9).epsilon(1e-15));
    CHECK(n.ground == "0");
  }

  TEST_CASE("symbolic sizes become design-variable references") {
    auto n = parse_netlist("M1 out in tail 0 nch W=w1 L=l1\n");
    const Device& m = n.devices.at(0);
    CHECK(m.params.at("W") == ParamValue::symbol("w1"));
    CHECK(m.params.at("L") == ParamValue::symbol("l1"));
  }

  TEST_CASE("duplicate device names are rejected") {
    CHECK_THROWS_AS(parse_netlist("R1 a 0 10k\nR1 b 0 1k\n"), DuplicateDevice);
    try {
      parse_netlist("R1 a 0 10k\nR1 b 0 1k\n");
    } catch (const DuplicateDevice& e) {
      CHECK(e.name() == "R1");
    }
  }

  TEST_CASE("three-net MOS card ties bulk to source") {
    auto n = parse_netlist("M1 d g s nch W=1u L=1u\nR1 s 0 1k\n");
    CHECK(n.devices.at(0).net(TerminalRole::B) == "s");
  }

  TEST_CASE("comments, continuations and .end") {
    auto n = parse_netlist("* title line\nM1 d g 0 0 nch\n+ W=1u L=1u\n* note\nR1 d vdd 1k\n.end\n");
    REQUIRE(n.devices.size() == 2);
    CHECK(n.devices[0].params.at("W").literal_value() == 1e-6);
  }

  TEST_CASE("rejections") {
    CHECK_THROWS_AS(parse_netlist(".subckt amp a b\nR1 a b 1k\n.ends\n"), SyntaxError);
    CHECK_THROWS_AS(parse_netlist("Q1 c b e npn\n"), UnknownDeviceCard);
    CHECK_THROWS_AS(parse_netlist("R1 a b\n"), SyntaxError);
    CHECK_THROWS_AS(parse_netlist("M1 d g s b xch W=1u L=1u\n"), SyntaxError);
    CHECK_THROWS_AS(parse_netlist("R1 a 0 -5k\n"), SyntaxError);
    try {
      parse_netlist("R1 a 0 1k\n\nC1 a 0 1q2\n");
      FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("default rail aliases") {
    auto n = parse_netlist("R1 vdd out 1k\nR2 out 0 1k\n");
    CHECK(n.ground == "0");
    CHECK(n.supply == "vdd");
  }

  TEST_CASE("rail aliases match case-insensitively") {
    auto n = parse_netlist("R1 VDD! out 1k\nR2 out VSS 1k\n");
    CHECK(n.ground == "VSS");
    CHECK(n.supply == "VDD!");
  }

  TEST_CASE("missing ground") {
    CHECK_THROWS_AS(parse_netlist("R1 a b 1k\n"), MissingGround);
  }

  TEST_CASE("supply inferred from a voltage source when no alias exists") {
    auto n = parse_netlist("V1 top 0 1.8\nR1 top 0 1k\n");
    CHECK(n.supply == "top");
    CHECK_FALSE(n.warnings.empty());
  }

  TEST_CASE("empty netlist parses") {
    auto n = parse_netlist("* nothing here\n.end\n");
    CHECK(n.devices.empty());
  }

  TEST_CASE("SI suffixes against a table") {
    CHECK(parse_si_number("2u") == 2e-6);
    CHECK(parse_si_number("1meg") == 1e6);
    CHECK(parse_si_number("1MEG") == 1e6);
    CHECK(parse_si_number("10k") == 1e4);
    CHECK(parse_si_number("3") == 3.0);
    CHECK_FALSE(parse_si_number("k10").has_value());

    const std::vector<std::pair<std::string, int>> table{{"f", -15}, {"p", -12}, {"n", -9}, {"u", -6},
                                                        {"m", -3},  {"k", 3},    {"meg", 6}, {"g", 9}};
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
      const auto& [suffix, exponent] = table[rng.index(table.size())];
      const std::string mantissa = std::to_string(rng.index(1000)) + "." + std::to_string(rng.index(1000));
      const double expected = std::stod(mantissa + "e" + std::to_string(exponent));
      auto got = parse_si_number(mantissa + suffix);
      REQUIRE(got.has_value());
      CHECK(*got == expected);
    }
  }

  TEST_CASE("serialize then parse round-trips random netlists") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const auto text = oracle::random_netlist_text(rng);
      const auto a = parse_netlist(text);
      const auto b = parse_netlist(serialize_netlist(a));
      CHECK_MESSAGE(equivalent(a, b), text);
      for (const auto& d : a.devices)
        for (const auto& t : d.terminals) CHECK(a.nets.count(t.net) == 1);
    }
  }
}
