#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "sizer/error.hpp"
#include "sizer/understanding.hpp"

using namespace sizer;
using nlohmann::json;

namespace {

json labels_of(const std::string& circuit) {
  return json::parse(oracle::read_file(oracle::data_path("labels/" + circuit + ".json")));
}

Hierarchy hierarchy_of(const std::string& circuit) {
  const json labels = labels_of(circuit);
  AnalyzeOptions o;
  o.io.inputs = labels.at("io").at("inputs").get<std::set<std::string>>();
  o.io.outputs = labels.at("io").at("outputs").get<std::set<std::string>>();
  return analyze(parse_netlist(oracle::read_file(oracle::data_path("netlists/" + circuit + ".sp"))), o);
}

json golden_reply(const std::string& circuit, double conf, const std::map<std::string, double>& overrides = {}) {
  json reply = labels_of(circuit);
  reply.erase("circuit");
  reply.erase("io");
  json confidence = json::object();
  for (const char* key : {"device_roles", "module_functions", "stage_functions"})
    for (const auto& [k, v] : reply.at(key).items()) confidence[k] = conf;
  for (const auto& [k, v] : overrides) confidence[k] = v;
  reply["confidence"] = confidence;
  return reply;
}

json entry(json match, json response) { return {{"match", std::move(match)}, {"response", std::move(response)}}; }

void apply_mutation(Annotation& a, const json& m) {
  const std::string op = m.at("op"), item = m.at("item");
  if (op == "set_device_role") a.device_roles[item] = m.at("value");
  else if (op == "remove_device_role") a.device_roles.erase(item);
  else if (op == "set_module_function") a.module_functions[item] = m.at("value");
  else if (op == "remove_module_function") a.module_functions.erase(item);
  else if (op == "set_stage_function") a.stage_functions[item] = m.at("value");
  else if (op == "remove_stage_function") a.stage_functions.erase(item);
  else FAIL("unknown mutation op " << op);
}

const CheckResult& check_named(const ChecklistReport& r, const std::string& name) {
  if (name == "coverage") return r.coverage;
  if (name == "consistency") return r.consistency;
  return r.alignment;
}

const std::vector<std::string> kCircuits{"diffpair_mirror", "ota", "fcota", "sacmp", "ldo"};

}  // namespace

TEST_SUITE("understanding") {
  TEST_CASE("differential pair with mirror load hierarchy") {
    auto h = hierarchy_of("diffpair_mirror");
    CHECK(h.modules().size() == 2);
    CHECK(h.stages.size() == 2);
    CHECK(h.components.size() == 8);
    auto back = hierarchy_from_json(hierarchy_to_json(h));
    CHECK(hierarchy_to_json(back) == hierarchy_to_json(h));
    CHECK(render_text(back) == render_text(h));
  }

  TEST_CASE("golden annotations pass the checklist") {
    for (const auto& c : kCircuits) {
      auto h = hierarchy_of(c);
      auto report = run_checklist(h, annotation_from_json(labels_of(c)));
      CHECK_MESSAGE(report.pass(), c << " " << checklist_to_json(report).dump());
    }
  }

  TEST_CASE("scripted advisors reproduce the golden labels") {
    for (const auto& c : kCircuits) {
      auto h = hierarchy_of(c);
      auto adv = ScriptedAdvisor::from_file(oracle::data_path("advisor/" + c + ".json"));
      AdvisorSession s(&adv);
      auto r = understand(h, s);
      CHECK(r.converged);
      const auto gold = annotation_from_json(labels_of(c));
      CHECK(r.annotation.device_roles == gold.device_roles);
      CHECK(r.annotation.module_functions == gold.module_functions);
      CHECK(r.annotation.stage_functions == gold.stage_functions);
    }
  }

  TEST_CASE("seeded checklist mutations are detected") {
    const json muts = json::parse(oracle::read_file(oracle::data_path("labels/mutations.json"))).at("mutations");
    CHECK(muts.size() >= 30);
    std::map<std::string, Hierarchy> cache;
    for (const auto& m : muts) {
      const std::string c = m.at("circuit");
      if (!cache.count(c)) cache.emplace(c, hierarchy_of(c));
      auto a = annotation_from_json(labels_of(c));
      apply_mutation(a, m);
      auto report = run_checklist(cache.at(c), a);
      const auto& check = check_named(report, m.at("expect").at("check"));
      const std::string item = m.at("expect").at("item");
      const bool hit = std::any_of(check.offending.begin(), check.offending.end(),
                                   [&](const std::string& o) { return o.rfind(item + ":", 0) == 0; });
      CHECK_MESSAGE(hit, m.at("id").get<std::string>() << " " << checklist_to_json(report).dump());
      CHECK_FALSE(report.pass());
    }
  }

  TEST_CASE("unknown roles and foreign items fail the checklist") {
    auto h = hierarchy_of("diffpair_mirror");
    auto a = annotation_from_json(labels_of("diffpair_mirror"));
    a.device_roles["M1"] = "flux capacitor";
    a.device_roles["M99"] = "active load";
    auto r = run_checklist(h, a);
    CHECK_FALSE(r.consistency.pass);
    CHECK_FALSE(r.coverage.pass);
    CHECK(r.offending_items() == std::vector<std::string>{"M1", "M99"});
  }

  TEST_CASE("a low-confidence item is refined in a second round") {
    auto h = hierarchy_of("diffpair_mirror");
    json round2 = {{"device_roles", {{"M1", "input pair transistor"}}}, {"confidence", {{"M1", 0.9}}}};
    ScriptedAdvisor adv(json::array({entry({{"purpose", "understand"}, {"round", 1}},
                                           golden_reply("diffpair_mirror", 0.95, {{"M1", 0.4}})),
                                     entry({{"purpose", "understand"}, {"round", 2}}, round2)}));
    AdvisorSession s(&adv);
    auto r = understand(h, s);
    CHECK(r.converged);
    CHECK(r.rounds == 2);
    CHECK(s.calls() == 2);
    CHECK(r.annotation.confidence.at("M1") == doctest::Approx(0.9));
    const json& ctx = s.transcript()[1].request.at("context");
    CHECK(ctx.at("focus_items") == json::array({"M1"}));
    CHECK(ctx.contains("current_annotation"));
  }

  TEST_CASE("the round limit ends an unconfident loop") {
    auto h = hierarchy_of("diffpair_mirror");
    ScriptedAdvisor adv(json::array({entry({{"purpose", "understand"}}, golden_reply("diffpair_mirror", 0.4))}));
    AdvisorSession s(&adv);
    LoopConfig cfg;
    cfg.max_rounds = 3;
    auto r = understand(h, s, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.rounds == 3);
    CHECK(s.calls() == 3);
    CHECK(r.report.pass());

    cfg.confidence_threshold = 0.3;
    AdvisorSession s2(&adv);
    CHECK(understand(h, s2, cfg).rounds == 1);
  }

  TEST_CASE("malformed replies get one repair attempt") {
    auto h = hierarchy_of("diffpair_mirror");
    json bad = golden_reply("diffpair_mirror", 0.95);
    bad["device_roles"]["M42"] = "active load";
    {
      ScriptedAdvisor adv(json::array({entry({{"repair", true}}, golden_reply("diffpair_mirror", 0.95)),
                                       entry({{"purpose", "understand"}}, bad)}));
      AdvisorSession s(&adv);
      auto r = understand(h, s);
      CHECK(r.converged);
      CHECK(s.calls() == 2);
      CHECK(s.transcript()[1].request.at("context").contains("validation_error"));
    }
    {
      ScriptedAdvisor adv(json::array({entry({{"purpose", "understand"}}, bad)}));
      AdvisorSession s(&adv);
      CHECK_THROWS_AS(understand(h, s), MalformedAdvisorResponse);
      CHECK(s.calls() == 2);
    }
    {
      ScriptedAdvisor adv(json::array({entry({{"purpose", "understand"}}, {{"confidence", {{"M1", 1.5}}}})}));
      AdvisorSession s(&adv);
      CHECK_THROWS_AS(understand(h, s), MalformedAdvisorResponse);
    }
  }

  TEST_CASE("a missing advisor is reported") {
    auto h = hierarchy_of("diffpair_mirror");
    AdvisorSession none(nullptr);
    CHECK_FALSE(none.available());
    CHECK_THROWS_AS(understand(h, none), AdvisorUnavailable);
    ScriptedAdvisor empty(json::array());
    AdvisorSession s(&empty);
    CHECK_THROWS_AS(understand(h, s), AdvisorUnavailable);
    CHECK(s.transcript().at(0).error.size() > 0);
  }

  TEST_CASE("invalid loop settings") {
    auto h = hierarchy_of("diffpair_mirror");
    AdvisorSession s(nullptr);
    LoopConfig cfg;
    cfg.max_rounds = 0;
    CHECK_THROWS_AS(understand(h, s, cfg), ConfigError);
    cfg = {};
    cfg.confidence_threshold = 0.0;
    CHECK_THROWS_AS(understand(h, s, cfg), ConfigError);
  }

  TEST_CASE("structural ties of symmetric module members") {
    auto h = hierarchy_of("diffpair_mirror");
    const auto vars = design_symbols(h);
    CHECK(vars == std::vector<std::string>{"l1", "l2", "l3", "l4", "w1", "w2", "w3", "w4"});
    auto plan = structural_tying(h, vars);
    CHECK(plan.variable_count == 8);
    CHECK(plan.reduced_dimension == 4);
    std::set<std::vector<std::string>> groups;
    for (const auto& g : plan.groups) {
      CHECK(g.relation == TieGroup::Relation::Equal);
      CHECK(g.origin == "structure");
      groups.insert(g.variables);
    }
    CHECK(groups == std::set<std::vector<std::string>>{{"l1", "l2"}, {"l3", "l4"}, {"w1", "w2"}, {"w3", "w4"}});
    auto back = tying_from_json(tying_to_json(plan));
    CHECK(back.groups == plan.groups);
    CHECK(back.reduced_dimension == plan.reduced_dimension);
  }

  TEST_CASE("advisor tying suggestions are validated") {
    auto h = hierarchy_of("diffpair_mirror");
    const auto vars = design_symbols(h);
    json groups = json::array({
        {{"variables", {"w1", "w2"}}, {"relation", "equal"}},
        {{"variables", {"w1", "w3"}}, {"relation", "equal"}},
        {{"variables", {"w1", "nope"}}},
        {{"variables", {"w9"}}},
        {{"variables", {"w1", "w1"}}},
        {{"variables", {"l1", "w4"}}, {"relation", "ratio"}, {"ratio", {2, 1}}},
        {{"variables", {"w1", "l3"}}, {"relation", "ratio"}, {"ratio", {0, 1}}},
        {{"variables", {"w1", "l3"}}, {"relation", "cube"}},
    });
    ScriptedAdvisor adv(json::array({entry({{"purpose", "tying"}}, {{"groups", groups}})}));
    AdvisorSession s(&adv);
    auto plan = assign_parameters(h, annotation_from_json(labels_of("diffpair_mirror")), s, vars);
    CHECK(s.calls() == 1);
    CHECK(plan.groups.size() == 4);
    CHECK(plan.dropped.size() == 7);
    CHECK(plan.reduced_dimension == 4);

    json fresh = json::array({{{"variables", {"w1", "w3"}}, {"relation", "ratio"}, {"ratio", {3, 2}}}});
    ScriptedAdvisor adv2(json::array({entry({{"purpose", "tying"}}, {{"groups", fresh}})}));
    AdvisorSession s2(&adv2);
    auto plain = structural_tying(h, {"w1", "w3", "l1"});
    CHECK(plain.groups.empty());
    auto plan2 = assign_parameters(h, {}, s2, {"w1", "w3", "l1"});
    REQUIRE(plan2.groups.size() == 1);
    CHECK(plan2.groups[0].relation == TieGroup::Relation::Ratio);
    CHECK(plan2.groups[0].ratio() == doctest::Approx(1.5));
    CHECK(plan2.groups[0].origin == "advisor");
    CHECK(plan2.reduced_dimension == 2);

    AdvisorSession none(nullptr);
    CHECK(assign_parameters(h, {}, none, vars).groups.size() == 4);
  }

  TEST_CASE("recorded sessions replay identically") {
    auto h = hierarchy_of("ota");
    auto scripted = ScriptedAdvisor::from_file(oracle::data_path("advisor/ota.json"));
    RecordingAdvisor rec(scripted);
    AdvisorSession s1(&rec);
    auto first = understand(h, s1);
    ScriptedAdvisor replay(rec.fixture());
    AdvisorSession s2(&replay);
    auto second = understand(h, s2);
    CHECK(first.annotation == second.annotation);
    CHECK(first.rounds == second.rounds);
    CHECK(s1.transcript_json() == s2.transcript_json());
  }

  TEST_CASE("annotation schema") {
    CHECK_THROWS_AS(annotation_from_json(json::array()), SchemaError);
    CHECK_THROWS_AS(annotation_from_json({{"device_roles", {{"M1", 3}}}}), SchemaError);
    CHECK_THROWS_AS(annotation_from_json({{"confidence", {{"M1", -0.1}}}}), SchemaError);
    auto a = annotation_from_json(golden_reply("ota", 0.5));
    CHECK(annotation_from_json(annotation_to_json(a)) == a);
  }
}
