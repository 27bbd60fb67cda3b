#include <doctest.h>

#include "oracles.hpp"
#include "sizer/error.hpp"
#include "sizer/optimizer.hpp"

using namespace sizer;
using nlohmann::json;
using doctest::Approx;

namespace {

std::vector<Variable> unit_box(std::size_t d) {
  std::vector<Variable> out;
  for (std::size_t i = 0; i < d; ++i) out.push_back({"x" + std::to_string(i), 0.0, 1.0, Scale::Linear});
  return out;
}

SpecSet spec_f(double bound = 1.0) {
  SpecSet s;
  s.metrics.push_back({"f", bound, 1, ""});
  return s;
}

double bowl(const ValueMap& p, double c = 0.6) {
  double d2 = 0;
  for (const auto& [k, v] : p) d2 += (v - c) * (v - c);
  return 1.0 - d2;
}

oracle::FunctionEvaluator bowl_eval() {
  return oracle::FunctionEvaluator({"f"}, [](const ValueMap& p) {
    Measurement m;
    m.values["f"] = bowl(p);
    return m;
  });
}

oracle::FunctionEvaluator flat_eval() {
  return oracle::FunctionEvaluator({"f"}, [](const ValueMap&) {
    Measurement m;
    m.values["f"] = 0.5;
    return m;
  });
}

OptimizerConfig quick(std::size_t n_iter) {
  OptimizerConfig c;
  c.n_iter = n_iter;
  c.candidates = 300;
  c.gp.adam_steps = 20;
  c.gp.restarts = 0;
  return c;
}

json reply_entry(const std::string& purpose, json response) {
  return {{"match", {{"purpose", purpose}}}, {"response", std::move(response)}};
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("trust region update is clipped") {
    OptimizerConfig cfg;
    auto tr = make_trust_region({0.1, 0.9}, cfg);
    CHECK(tr.radius == cfg.r_init);
    CHECK(tr.lower() == std::vector<double>{0.0, 0.5});
    CHECK(tr.upper()[0] == Approx(0.5));
    CHECK(tr.upper()[1] == 1.0);
    auto up = update_trust_region(tr, true);
    CHECK(up.radius == Approx(0.6));
    CHECK(update_trust_region(up, true).radius == cfg.r_max);
    auto down = tr;
    for (int i = 0; i < 40; ++i) down = update_trust_region(down, false);
    CHECK(down.radius == cfg.r_min);
    CHECK(update_trust_region(tr, false).radius == Approx(0.3));
  }

  TEST_CASE("configuration checks and round trip") {
    OptimizerConfig c;
    c.batch = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.alpha = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.r_init = 0.9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.alpha_dec = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.n_iter = 7;
    c.stagnation_k = 3;
    c.alpha = 0.25;
    c.mode = ScoreMode::SingleObjective;
    auto back = optimizer_config_from_json(optimizer_config_to_json(c));
    CHECK(optimizer_config_to_json(back) == optimizer_config_to_json(c));
    CHECK(optimizer_config_from_json(json{{"K", 9}}).stagnation_k == 9);
    CHECK(OptimizerConfig{}.initial_count(7) == 14);
  }

  TEST_CASE("initial samples honour the pruned share") {
    DesignSpace ds(unit_box(3));
    PrunedRegion r;
    r.boxes["x0"] = {0.0, 0.3};
    ds.set_pruned(r);
    for (double alpha : {0.0, 0.25, 0.8, 1.0}) {
      auto s = initial_sample(ds, 10, alpha, 7);
      REQUIRE(s.points.size() == 10);
      const auto want = static_cast<std::size_t>(std::ceil(alpha * 10 - 1e-9));
      CHECK(std::count(s.from_pruned.begin(), s.from_pruned.end(), true) == static_cast<long>(want));
      for (std::size_t i = 0; i < 10; ++i) CHECK(ds.in_pruned(s.points[i]) == s.from_pruned[i]);
      CHECK_FALSE(s.fallback);
    }
    auto a = initial_sample(ds, 10, 0.8, 7);
    auto b = initial_sample(ds, 10, 0.8, 7);
    CHECK(a.points == b.points);

    DesignSpace whole(unit_box(2));
    PrunedRegion all;
    all.boxes["x0"] = {0.0, 1.0};
    all.boxes["x1"] = {0.0, 1.0};
    whole.set_pruned(all);
    auto f = initial_sample(whole, 6, 0.5, 1);
    CHECK(f.fallback);
    CHECK(f.points.size() == 6);

    DesignSpace plain(unit_box(2));
    CHECK(std::none_of(initial_sample(plain, 5, 0.8, 1).from_pruned.begin(),
                       initial_sample(plain, 5, 0.8, 1).from_pruned.end(), [](bool b) { return b; }));
    CHECK_THROWS_AS(initial_sample(plain, 0, 0.5, 1), ConfigError);
  }

  TEST_CASE("proposals stay inside the trust region and avoid duplicates") {
    Rng rng(11);
    std::vector<UnitPoint> x;
    std::vector<double> y;
    for (auto& p : latin_hypercube(10, 2, rng)) {
      y.push_back(-(p[0] - 0.6) * (p[0] - 0.6) - (p[1] - 0.6) * (p[1] - 0.6));
      x.push_back(std::move(p));
    }
    auto gp = fit_surrogate(x, y, GpConfig{}, rng);
    OptimizerConfig cfg;
    auto tr = make_trust_region({0.95, 0.05}, cfg);
    tr.radius = 0.1;
    auto batch = propose_batch(gp, tr, 4, *std::max_element(y.begin(), y.end()), x, cfg, rng);
    CHECK(batch.size() == 4);
    for (const auto& p : batch) {
      CHECK(tr.contains(p));
      for (double c : p) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
      }
      for (const auto& h : x) {
        double d = 0;
        for (std::size_t k = 0; k < 2; ++k) d = std::max(d, std::abs(h[k] - p[k]));
        CHECK(d > cfg.dedupe_tol);
      }
    }
    std::set<UnitPoint> distinct(batch.begin(), batch.end());
    CHECK(distinct.size() == 4);
  }

  TEST_CASE("a single proposal improves on a quadratic") {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      auto f = [](const UnitPoint& p) {
        double s = 0;
        for (double c : p) s -= (c - 0.55) * (c - 0.55);
        return s;
      };
      std::vector<UnitPoint> x = latin_hypercube(20, 3, rng);
      std::vector<double> y;
      for (const auto& p : x) y.push_back(f(p));
      const auto best = std::max_element(y.begin(), y.end()) - y.begin();
      auto gp = fit_surrogate(x, y, GpConfig{}, rng);
      OptimizerConfig cfg;
      auto tr = make_trust_region(x[best], cfg);
      auto p = propose_batch(gp, tr, 1, y[best], x, cfg, rng);
      REQUIRE(p.size() == 1);
      if (f(p[0]) > y[best]) ++improved;
    }
    CHECK(improved >= 18);
  }

  TEST_CASE("stagnation triggers an intervention exactly every K iterations") {
    DesignSpace ds(unit_box(2));
    auto ev = flat_eval();
    auto cfg = quick(7);
    cfg.stagnation_k = 3;
    auto rep = optimize(ds, spec_f(), ev, nullptr, cfg, 3);
    REQUIRE(rep.trace.size() == 7);
    std::vector<std::size_t> at;
    for (const auto& t : rep.trace)
      if (t.intervened) at.push_back(t.iteration);
    CHECK(at == std::vector<std::size_t>{3, 6});
    REQUIRE(rep.interventions.size() == 2);
    CHECK(rep.interventions[0].source == "fallback");
    CHECK(rep.interventions[0].radius == Approx(cfg.r_max / 2));
    CHECK(rep.trace[2].next_radius == Approx(cfg.r_max / 2));
    CHECK(rep.trace[0].next_radius == Approx(cfg.r_init * cfg.alpha_dec));
    CHECK(rep.status == "budget-exhausted");
    CHECK(rep.history.size() == 4 + 7);
  }

  TEST_CASE("the incumbent never gets worse and runs are reproducible") {
    DesignSpace ds(unit_box(3));
    auto ev = bowl_eval();
    auto cfg = quick(12);
    auto a = optimize(ds, spec_f(), ev, nullptr, cfg, 5);
    for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i].best_fom >= a.trace[i - 1].best_fom);
    double running = -1e300;
    for (const auto& h : a.history) running = std::max(running, h.score.fom);
    CHECK(a.best_fom == running);
    CHECK(a.best().score.fom == a.best_fom);
    CHECK(a.evaluations == a.history.size());

    auto b = optimize(ds, spec_f(), ev, nullptr, cfg, 5);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].unit == b.history[i].unit);
    auto c = optimize(ds, spec_f(), ev, nullptr, cfg, 6);
    CHECK(c.history[0].unit != a.history[0].unit);
  }

  TEST_CASE("zero iterations evaluate only the initial sample") {
    DesignSpace ds(unit_box(3));
    auto ev = bowl_eval();
    auto rep = optimize(ds, spec_f(), ev, nullptr, quick(0), 1);
    CHECK(rep.history.size() == 6);
    CHECK(rep.trace.empty());
    for (const auto& h : rep.history) CHECK(h.point.provenance == Provenance::InitSample);
  }

  TEST_CASE("feasibility mode stops at the first feasible sample") {
    DesignSpace ds(unit_box(2));
    auto ev = bowl_eval();
    auto rep = optimize(ds, spec_f(0.0), ev, nullptr, quick(20), 1);
    CHECK(rep.status == "feasible");
    CHECK(rep.samples_to_feasible == std::optional<std::size_t>(1));
    CHECK(rep.history.size() == 1);

    auto single = quick(3);
    single.mode = ScoreMode::SingleObjective;
    auto spec = with_target(spec_f(0.0), "f");
    auto r2 = optimize(ds, spec, ev, nullptr, single, 1);
    CHECK(r2.status == "completed");
    CHECK(r2.history.size() == 4 + 3);
    CHECK_THROWS_AS(optimize(ds, spec_f(), ev, nullptr, single, 1), ConfigError);

    oracle::FunctionEvaluator wrong({"g"}, [](const ValueMap&) { return Measurement{}; });
    CHECK_THROWS_AS(optimize(ds, spec_f(), wrong, nullptr, quick(1), 1), ConfigError);
  }

  TEST_CASE("advisor interventions are clipped and malformed replies fall back") {
    DesignSpace ds({{"a", 1.0, 10.0, Scale::Linear}, {"b", 0.0, 1.0, Scale::Linear}});
    OptState st;
    OptimizerConfig cfg;
    st.tr = make_trust_region({0.5, 0.5}, cfg);
    HistoryEntry h;
    h.unit = {0.5, 0.5};
    h.point.values = ds.expand(h.unit);
    h.score.r = {-0.5};
    h.score.fom = -0.5;
    h.measurement.values["f"] = 0.5;
    st.history.push_back(h);
    HistoryEntry far = h;
    far.unit = {0.05, 0.95};
    far.score.fom = -0.7;
    st.history.push_back(far);
    st.best_index = 0;
    Rng rng(1);

    ScriptedAdvisor adv(json::array({reply_entry("intervene", {{"center", {{"a", 100.0}, {"zz", 1.0}}},
                                                               {"deltas", {{"b", -0.2}}},
                                                               {"radius", 5.0}})}));
    AdvisorSession s(&adv);
    auto o = intervene(st, ds, spec_f(), json::object(), &s, cfg, rng);
    CHECK(o.source == "advisor");
    CHECK(o.radius == cfg.r_max);
    CHECK(o.center[0] == Approx(1.0));
    CHECK(o.center[1] == Approx(0.3));
    CHECK(o.detail.find("zz") != std::string::npos);
    CHECK(s.calls() == 1);

    ScriptedAdvisor bad(json::array({reply_entry("intervene", {{"center", {{"a", 2.0}}}})}));
    AdvisorSession sb(&bad);
    auto fb = intervene(st, ds, spec_f(), json::object(), &sb, cfg, rng);
    CHECK(fb.source == "fallback");
    CHECK(fb.center == far.unit);
    CHECK(fb.radius == Approx(cfg.r_max / 2));

    auto none = intervene(st, ds, spec_f(), json::object(), nullptr, cfg, rng);
    CHECK(none.source == "fallback");
  }

  TEST_CASE("pruning requests are validated") {
    DesignSpace ds({{"a", 1.0, 10.0, Scale::Linear}, {"b", 1.0, 10.0, Scale::Linear}});
    ScriptedAdvisor good(json::array({reply_entry("prune", {{"box", {{"a", {2.0, 4.0}}}},
                                                            {"ratios", {{{"num", "a"}, {"den", "b"}, {"min", 0.5}}}}})}));
    AdvisorSession s(&good);
    auto r = request_pruning(ds, spec_f(), json::object(), s);
    CHECK(r.boxes.at("a") == std::pair<double, double>{2.0, 4.0});
    CHECK(r.ratios.size() == 1);

    ScriptedAdvisor bad(json::array({reply_entry("prune", {{"box", {{"c", {2.0, 4.0}}}}})}));
    AdvisorSession sb(&bad);
    CHECK_THROWS_AS(request_pruning(ds, spec_f(), json::object(), sb), MalformedAdvisorResponse);
    ScriptedAdvisor none(json::array());
    AdvisorSession sn(&none);
    CHECK_THROWS_AS(request_pruning(ds, spec_f(), json::object(), sn), AdvisorUnavailable);
  }

  TEST_CASE("pruned runs report their initial share") {
    DesignSpace ds(unit_box(2));
    PrunedRegion r;
    r.boxes["x0"] = {0.5, 0.7};
    r.boxes["x1"] = {0.5, 0.7};
    ds.set_pruned(r);
    auto ev = bowl_eval();
    auto cfg = quick(2);
    cfg.alpha = 0.75;
    auto rep = optimize(ds, spec_f(), ev, nullptr, cfg, 2);
    CHECK(rep.init_from_pruned == 3);
    CHECK_FALSE(rep.init_fallback);
  }
}
