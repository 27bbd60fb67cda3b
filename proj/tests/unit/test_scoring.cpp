#include <doctest.h>

#include "oracles.hpp"
#include "sizer/error.hpp"
#include "sizer/scoring.hpp"

using namespace sizer;
using doctest::Approx;

namespace {

SpecSet spec_of(const std::vector<int>& phi, std::optional<std::size_t> target = std::nullopt) {
  SpecSet s;
  for (std::size_t i = 0; i < phi.size(); ++i) s.metrics.push_back({"m" + std::to_string(i), 1.0, phi[i], ""});
  s.target = target;
  return s;
}

// Measurement whose metric i scores exactly r[i] against a bound of 1 with phi = +1 (|r| < 1).
Measurement with_scores(const std::vector<double>& r) {
  Measurement m;
  for (std::size_t i = 0; i < r.size(); ++i)
    m.values["m" + std::to_string(i)] = r[i] >= 0 ? 1.0 / (1.0 - r[i]) : 1.0 + r[i];
  return m;
}

}  // namespace

TEST_SUITE("scoring") {
  TEST_CASE("normalized metric score") {
    CHECK(score_metric(50, 40, 1) == Approx(0.2));
    CHECK(score_metric(0.6e-3, 0.5e-3, -1) == Approx(-1.0 / 6.0));
    for (double f : {-3.0, 0.0, 2.5})
      for (int phi : {1, -1}) CHECK(score_metric(f, f, phi) == 0.0);
    CHECK_THROWS_AS(score_metric(std::nan(""), 1, 1), NonFiniteInput);
    CHECK_THROWS_AS(score_metric(1, INFINITY, 1), NonFiniteInput);
  }

  TEST_CASE("feasibility figure of merit") {
    auto spec = spec_of({1, 1, 1});
    CHECK(fom_feasibility(spec, with_scores({0.2, 0.0, 0.5})).fom == 0.0);
    auto s = fom_feasibility(spec, with_scores({0.2, -0.1, -0.3}));
    CHECK(s.fom == Approx(-0.4));
    CHECK(s.r[0] == Approx(0.2));

    auto failed = with_scores({0.2, -0.1, 0.4});
    failed.failed.insert("m2");
    CHECK(fom_feasibility(spec, failed).fom == Approx(-1.1));
    spec.failure_penalty = 2.0;
    CHECK(fom_feasibility(spec, failed).fom == Approx(-2.1));

    Measurement partial = with_scores({0.1, 0.1});
    CHECK_THROWS_AS(fom_feasibility(spec, partial), MissingMetric);
  }

  TEST_CASE("single-objective figure of merit") {
    auto spec = spec_of({1, 1, 1}, 0);
    CHECK(fom_single(spec, with_scores({0.35, 0.1, 0.0})).fom == Approx(0.35));
    CHECK(fom_single(spec, with_scores({0.35, -0.2, 0.0})).fom == Approx(-0.2));
    CHECK(fom_single(spec, with_scores({-0.1, -0.2, 0.0})).fom == Approx(-0.3));
    CHECK_THROWS_AS(fom_single(spec_of({1}), with_scores({0.1})), ConfigError);
    CHECK(score(spec, with_scores({0.35, 0.1, 0.0}), ScoreMode::SingleObjective).mode == ScoreMode::SingleObjective);
  }

  TEST_CASE("scores agree with the reference formulas on random inputs") {
    Rng rng(3);
    for (int k = 0; k < 2000; ++k) {
      const std::size_t n = 1 + rng.index(6);
      std::vector<double> f, c;
      std::vector<int> phi;
      SpecSet spec;
      Measurement meas;
      for (std::size_t i = 0; i < n; ++i) {
        f.push_back(rng.uniform(-5, 5));
        c.push_back(rng.index(10) == 0 ? f.back() : rng.uniform(-5, 5));
        phi.push_back(rng.index(2) ? 1 : -1);
        spec.metrics.push_back({"m" + std::to_string(i), c[i], phi[i], ""});
        meas.values["m" + std::to_string(i)] = f[i];
      }
      for (std::size_t i = 0; i < n; ++i) CHECK(score_metric(f[i], c[i], phi[i]) == Approx(oracle::ref_score(f[i], c[i], phi[i])));
      const auto feas = fom_feasibility(spec, meas);
      CHECK(feas.fom == Approx(oracle::ref_fom_feasibility(f, c, phi)));
      CHECK(feas.fom <= 0.0);
      const bool all_ok = std::all_of(feas.r.begin(), feas.r.end(), [](double r) { return r >= 0; });
      CHECK((feas.fom == 0.0) == all_ok);

      spec.target = rng.index(n);
      const auto single = fom_single(spec, meas);
      CHECK(single.fom == Approx(oracle::ref_fom_single(f, c, phi, *spec.target)));
      bool violated = false;
      for (std::size_t i = 0; i < n; ++i)
        if (i != *spec.target && single.r[i] < 0) violated = true;
      if (violated) {
        CHECK(single.fom <= 0.0);
        if (single.r[*spec.target] <= 0) CHECK(single.fom == Approx(feas.fom));
      }
    }
  }

  TEST_CASE("scores are monotone in the measured value up to the mirrored bound") {
    Rng rng(9);
    for (int k = 0; k < 500; ++k) {
      const double c = rng.uniform(-3, 3);
      const double s = c < 0 ? -1.0 : 1.0;
      std::vector<double> xs{0.0, c, -c};
      for (int i = 0; i < 40; ++i) xs.push_back(s * rng.uniform(-std::abs(c), 6));
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 1; i < xs.size(); ++i) {
        CHECK(score_metric(xs[i], c, 1) >= score_metric(xs[i - 1], c, 1) - 1e-12);
        CHECK(score_metric(xs[i], c, -1) <= score_metric(xs[i - 1], c, -1) + 1e-12);
      }
    }
  }

  TEST_CASE("beyond the mirrored bound the score turns back toward minus one") {
    CHECK(score_metric(-2, 1, 1) == Approx(-1.5));
    CHECK(score_metric(-6, 1, 1) == Approx(-7.0 / 6.0));
    CHECK(score_metric(-6, 1, 1) > score_metric(-2, 1, 1));
  }

  TEST_CASE("spec documents") {
    auto ota = load_spec(oracle::data_path("specs/ota.json"));
    REQUIRE(ota.metrics.size() == 4);
    CHECK(ota.metrics[0].bound == 40);
    CHECK(ota.metrics[1].bound == 50e6);
    CHECK(ota.metrics[2].bound == 60);
    CHECK(ota.metrics[3].bound == Approx(0.5e-3));
    CHECK(ota.metrics[3].phi == -1);
    auto back = spec_from_json(spec_to_json(with_target(ota, "gain")));
    CHECK(back.target == std::optional<std::size_t>(0));
    CHECK_THROWS_AS(with_target(ota, "slew"), ConfigError);

    auto fc = load_spec(oracle::data_path("specs/fcota.json"));
    CHECK(fc.metrics.size() == 7);
    CHECK(fc.metrics[*fc.index_of("power")].bound == Approx(1e-3));
    CHECK(fc.metrics[*fc.index_of("noise")].bound == Approx(30e-3));
    auto ldo = load_spec(oracle::data_path("specs/ldo.json"));
    CHECK(ldo.metrics[*ldo.index_of("tsetup")].bound == Approx(15e-9));
    CHECK(ldo.metrics[*ldo.index_of("dropout")].bound == Approx(0.15));
    auto sa = load_spec(oracle::data_path("specs/sacmp.json"));
    CHECK(sa.metrics[*sa.index_of("power")].bound == Approx(40e-6));
    CHECK(sa.metrics[*sa.index_of("noise")].bound == Approx(120e-6));

    using nlohmann::json;
    CHECK_THROWS_AS(spec_from_json(json{{"metrics", json::array()}}), ConfigError);
    CHECK_THROWS_AS(spec_from_json(json{{"metrics", {{{"name", "a"}, {"bound", 1}, {"direction", "up"}}}}}), SchemaError);
    CHECK_THROWS_AS(spec_from_json(json{{"metrics", {{{"name", "a"}, {"bound", 1}, {"direction", "max"}},
                                                     {{"name", "a"}, {"bound", 2}, {"direction", "min"}}}}}),
                    ConfigError);
    CHECK_THROWS_AS(load_spec("/nonexistent/spec.json"), ConfigError);
  }
}
