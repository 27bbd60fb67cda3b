#include "sizer/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLoopStream = 0x9E3779B97F4A7C15ULL;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double linf(const UnitPoint& a, const UnitPoint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

json point_digest(const HistoryEntry& e, const DesignSpace& space) {
  json values = json::object();
  for (const auto& v : space.free_variables()) values[v.name] = e.point.values.at(v.name);
  return {{"sample", e.sample}, {"fom", e.score.fom}, {"values", values}};
}

json space_digest(const DesignSpace& space) {
  json vars = variables_to_json(space.free_variables());
  json tied = json::array();
  for (const auto& g : space.tying().groups) tied.push_back(g.variables);
  return {{"free_variables", vars}, {"tied_groups", tied}};
}

}  // namespace

void OptimizerConfig::validate() const {
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (stagnation_k < 1) throw ConfigError("stagnation threshold K must be at least 1");
  if (alpha < 0 || alpha > 1) throw ConfigError("pruned sampling ratio alpha must lie in [0, 1]");
  if (!(alpha_inc > 1)) throw ConfigError("alpha_inc must exceed 1");
  if (!(alpha_dec > 0 && alpha_dec < 1)) throw ConfigError("alpha_dec must lie in (0, 1)");
  if (!(r_min > 0 && r_min < r_max)) throw ConfigError("need 0 < r_min < r_max");
  if (r_init < r_min || r_init > r_max) throw ConfigError("initial radius must lie in [r_min, r_max]");
  if (candidates < 1) throw ConfigError("candidate count must be at least 1");
}

json optimizer_config_to_json(const OptimizerConfig& c) {
  return {{"n_init", c.n_init},
          {"n_iter", c.n_iter},
          {"batch", c.batch},
          {"K", c.stagnation_k},
          {"alpha", c.alpha},
          {"alpha_inc", c.alpha_inc},
          {"alpha_dec", c.alpha_dec},
          {"r_min", c.r_min},
          {"r_max", c.r_max},
          {"r_init", c.r_init},
          {"candidates", c.candidates},
          {"dedupe_tol", c.dedupe_tol},
          {"max_parallel", c.max_parallel},
          {"refit_every", c.refit_every},
          {"gp",
           {{"restarts", c.gp.restarts},
            {"adam_steps", c.gp.adam_steps},
            {"learning_rate", c.gp.learning_rate},
            {"jitter", c.gp.jitter},
            {"jitter_cap", c.gp.jitter_cap}}}};
}

OptimizerConfig optimizer_config_from_json(const json& j, OptimizerConfig c) {
  try {
    c.n_init = j.value("n_init", c.n_init);
    c.n_iter = j.value("n_iter", c.n_iter);
    c.batch = j.value("batch", c.batch);
    c.stagnation_k = j.value("K", c.stagnation_k);
    c.alpha = j.value("alpha", c.alpha);
    c.alpha_inc = j.value("alpha_inc", c.alpha_inc);
    c.alpha_dec = j.value("alpha_dec", c.alpha_dec);
    c.r_min = j.value("r_min", c.r_min);
    c.r_max = j.value("r_max", c.r_max);
    c.r_init = j.value("r_init", c.r_init);
    c.candidates = j.value("candidates", c.candidates);
    c.dedupe_tol = j.value("dedupe_tol", c.dedupe_tol);
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    c.refit_every = j.value("refit_every", c.refit_every);
    if (j.contains("gp")) {
      const auto& g = j.at("gp");
      c.gp.restarts = g.value("restarts", c.gp.restarts);
      c.gp.adam_steps = g.value("adam_steps", c.gp.adam_steps);
      c.gp.learning_rate = g.value("learning_rate", c.gp.learning_rate);
      c.gp.jitter = g.value("jitter", c.gp.jitter);
      c.gp.jitter_cap = g.value("jitter_cap", c.gp.jitter_cap);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("optimizer settings are malformed: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> TrustRegion::lower() const {
  std::vector<double> lo(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) lo[i] = std::max(0.0, center[i] - radius);
  return lo;
}

std::vector<double> TrustRegion::upper() const {
  std::vector<double> hi(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) hi[i] = std::min(1.0, center[i] + radius);
  return hi;
}

bool TrustRegion::contains(const UnitPoint& u, double tol) const { return linf(u, center) <= radius + tol; }

TrustRegion make_trust_region(const UnitPoint& center, const OptimizerConfig& cfg) {
  TrustRegion tr;
  tr.center = center;
  tr.radius = cfg.r_init;
  tr.r_min = cfg.r_min;
  tr.r_max = cfg.r_max;
  tr.alpha_inc = cfg.alpha_inc;
  tr.alpha_dec = cfg.alpha_dec;
  return tr;
}

TrustRegion update_trust_region(TrustRegion tr, bool improved) {
  tr.radius = improved ? std::min(tr.alpha_inc * tr.radius, tr.r_max) : std::max(tr.alpha_dec * tr.radius, tr.r_min);
  return tr;
}

InitialSample initial_sample(const DesignSpace& space, std::size_t n, double alpha, std::uint64_t seed) {
  if (n < 1) throw ConfigError("initial sample needs n >= 1");
  if (alpha < 0 || alpha > 1) throw ConfigError("alpha must lie in [0, 1]");
  Rng rng(seed);
  const std::size_t dim = space.dimension();
  InitialSample out;

  if (!space.has_pruned()) {
    out.points = latin_hypercube(n, dim, rng);
    out.from_pruned.assign(n, false);
    return out;
  }

  const auto n_pruned = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  auto inside = latin_hypercube(n_pruned, space.pruned_lower(), space.pruned_upper(), rng);
  const auto ratio_coords = space.ratio_coordinates();
  for (auto& p : inside) {
    for (int tries = 0; tries < 100 && !space.satisfies_ratios(p); ++tries)
      for (auto i : ratio_coords) p[i] = rng.uniform(space.pruned_lower()[i], space.pruned_upper()[i]);
    if (!space.satisfies_ratios(p)) spdlog::warn("pruned sample still violates a ratio constraint after 100 tries");
  }

  const std::size_t m = n - n_pruned;
  std::vector<UnitPoint> outside;
  std::size_t rejected = 0;
  while (outside.size() < m) {
    if (rejected > 100 * n) {
      out.fallback = true;
      spdlog::warn("pruned region covers nearly the whole space; drawing the remaining {} samples from it all",
                   m - outside.size());
      for (auto& p : latin_hypercube(m - outside.size(), dim, rng)) outside.push_back(std::move(p));
      break;
    }
    for (auto& p : latin_hypercube(m, dim, rng)) {
      if (outside.size() == m) break;
      if (space.in_pruned(p))
        ++rejected;
      else
        outside.push_back(std::move(p));
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  for (auto i : order) {
    const bool from_p = i < n_pruned;
    out.points.push_back(from_p ? inside[i] : outside[i - n_pruned]);
    out.from_pruned.push_back(from_p);
  }
  return out;
}

GaussianProcess fit_surrogate(const std::vector<UnitPoint>& x, const std::vector<double>& fom, const GpConfig& cfg,
                              Rng& rng, const GpHyperparameters* warm_start) {
  GaussianProcess gp;
  gp.fit(x, fom, cfg, rng, warm_start);
  return gp;
}

double expected_improvement(const Prediction& p, double best) {
  const double sigma = std::sqrt(std::max(0.0, p.variance));
  const double gain = p.mean - best;
  if (sigma < 1e-12) return std::max(0.0, gain);
  const double z = gain / sigma;
  return gain * normal_cdf(z) + sigma * normal_pdf(z);
}

std::vector<UnitPoint> propose_batch(const GaussianProcess& gp, const TrustRegion& tr, std::size_t q, double best,
                                     const std::vector<UnitPoint>& history, const OptimizerConfig& cfg, Rng& rng) {
  const std::size_t dim = tr.center.size();
  const auto lo = tr.lower(), hi = tr.upper();
  auto cloud = scrambled_halton(cfg.candidates, dim, rng);
  for (auto& p : cloud)
    for (std::size_t i = 0; i < dim; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * p[i];
  const auto preds = gp.predict(cloud);

  std::vector<double> ei(cloud.size());
  std::vector<bool> usable(cloud.size(), true);
  for (std::size_t c = 0; c < cloud.size(); ++c) {
    ei[c] = expected_improvement(preds[c], best);
    for (const auto& h : history)
      if (linf(cloud[c], h) < cfg.dedupe_tol) {
        usable[c] = false;
        break;
      }
  }
  const auto& ls = gp.hyperparameters().lengthscales;

  std::vector<UnitPoint> out;
  while (out.size() < q) {
    std::optional<std::size_t> pick;
    for (std::size_t c = 0; c < cloud.size(); ++c)
      if (usable[c] && ei[c] > 0 && (!pick || ei[c] > ei[*pick])) pick = c;
    if (!pick) {
      // No positive improvement left: take the most uncertain candidate.
      for (std::size_t c = 0; c < cloud.size(); ++c)
        if (usable[c] && (!pick || preds[c].variance > preds[*pick].variance)) pick = c;
    }
    if (!pick) {
      for (std::size_t c = 0; c < cloud.size(); ++c)
        if (!pick || preds[c].variance > preds[*pick].variance) pick = c;
    }
    const auto& chosen = cloud[*pick];
    out.push_back(chosen);
    usable[*pick] = false;
    // Penalize neighbours of the chosen point so a batch spreads out.
    for (std::size_t c = 0; c < cloud.size(); ++c) {
      if (!usable[c]) continue;
      if (linf(cloud[c], chosen) < cfg.dedupe_tol) {
        usable[c] = false;
        continue;
      }
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double t = (cloud[c][i] - chosen[i]) / (ls.size() == dim ? ls[i] : 1.0);
        r2 += t * t;
      }
      ei[c] *= 1.0 - matern52(std::sqrt(r2));
    }
  }
  return out;
}

InterventionOutcome intervene(const OptState& state, const DesignSpace& space, const SpecSet& spec,
                              const json& circuit_context, AdvisorSession* advisor, const OptimizerConfig& cfg,
                              Rng& rng, const std::string& circuit) {
  auto fallback = [&](const std::string& why) {
    InterventionOutcome o;
    o.source = "fallback";
    o.detail = why;
    o.radius = cfg.r_max / 2;
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < state.history.size(); ++i) {
      const auto& h = state.history[i];
      if (state.tr.contains(h.unit)) continue;
      if (!pick || h.score.fom > state.history[*pick].score.fom) pick = i;
    }
    if (pick) {
      o.center = state.history[*pick].unit;
    } else {
      o.center = latin_hypercube(1, space.dimension(), rng).front();
    }
    return o;
  };

  if (!advisor || !advisor->available()) return fallback("no advisor configured");

  json status = json::array();
  if (state.has_best()) {
    const auto& b = state.best();
    for (std::size_t i = 0; i < spec.metrics.size(); ++i) {
      const auto& m = spec.metrics[i];
      auto it = b.measurement.values.find(m.name);
      status.push_back({{"metric", m.name},
                        {"bound", m.bound},
                        {"direction", m.phi > 0 ? ">=" : "<="},
                        {"unit", m.unit},
                        {"measured", it == b.measurement.values.end() ? json(nullptr) : json(it->second)},
                        {"score", b.score.r.at(i)}});
    }
  }
  std::vector<std::size_t> order(state.history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return state.history[a].score.fom > state.history[b].score.fom;
  });
  json top = json::array(), bottom = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i)
    top.push_back(point_digest(state.history[order[i]], space));
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i)
    bottom.push_back(point_digest(state.history[order[order.size() - 1 - i]], space));

  json center = json::object();
  const auto center_values = space.expand(state.tr.center);
  for (const auto& v : space.free_variables()) center[v.name] = center_values.at(v.name);

  json context = circuit_context.is_object() ? circuit_context : json::object();
  context["design_space"] = space_digest(space);
  context["incumbent_status"] = status;
  context["best_fom"] = state.best_fom;
  context["history_top"] = top;
  context["history_bottom"] = bottom;
  context["trust_region"] = {{"center", center}, {"radius", state.tr.radius}, {"r_min", cfg.r_min}, {"r_max", cfg.r_max}};
  context["evaluations"] = state.history.size();

  json schema = {{"type", "object"},
                 {"properties",
                  {{"center", {{"type", "object"}, {"description", "variable -> value in natural units"}}},
                   {"deltas", {{"type", "object"}, {"description", "variable -> shift in normalized [0,1] units"}}},
                   {"radius", {{"type", "number"}}},
                   {"rationale", {{"type", "string"}}}}},
                 {"required", {"radius"}}};
  const int round = static_cast<int>(state.interventions.size()) + 1;
  auto request = make_request(
      "You are an analog circuit sizing expert steering a trust-region Bayesian optimizer.", context,
      "The optimizer has stagnated. Suggest a new trust-region center (full point or per-variable deltas) and a "
      "radius in normalized coordinates.",
      schema, "intervene", round, circuit);

  json reply;
  try {
    reply = advisor->call(request);
  } catch (const AdvisorUnavailable& e) {
    spdlog::warn("intervention advisor unavailable: {}", e.what());
    return fallback(std::string("advisor unavailable: ") + e.what());
  }

  try {
    if (!reply.is_object()) throw MalformedAdvisorResponse(round, "reply is not an object");
    if (!reply.contains("radius") || !reply.at("radius").is_number())
      throw MalformedAdvisorResponse(round, "reply lacks a numeric radius");
    InterventionOutcome o;
    o.source = "advisor";
    o.radius = std::clamp(reply.at("radius").get<double>(), cfg.r_min, cfg.r_max);
    UnitPoint c = state.has_best() ? state.best().unit : state.tr.center;
    std::vector<std::string> notes;
    if (reply.contains("center")) {
      if (!reply.at("center").is_object()) throw MalformedAdvisorResponse(round, "center must be an object");
      for (const auto& [name, value] : reply.at("center").items()) {
        const auto idx = space.free_index_of(name);
        if (!idx || !value.is_number()) {
          notes.push_back("ignored center entry '" + name + "'");
          continue;
        }
        const auto& v = space.free_variables()[*idx];
        const double x = std::clamp(value.get<double>(), v.lower, v.upper);
        c[*idx] = v.to_unit(x);
      }
    }
    if (reply.contains("deltas")) {
      if (!reply.at("deltas").is_object()) throw MalformedAdvisorResponse(round, "deltas must be an object");
      for (const auto& [name, value] : reply.at("deltas").items()) {
        const auto idx = space.free_index_of(name);
        if (!idx || !value.is_number()) {
          notes.push_back("ignored delta entry '" + name + "'");
          continue;
        }
        c[*idx] += value.get<double>();
      }
    }
    o.center = space.clip_unit(c);
    o.detail = reply.value("rationale", std::string{});
    for (const auto& n : notes) o.detail += (o.detail.empty() ? "" : "; ") + n;
    return o;
  } catch (const MalformedAdvisorResponse& e) {
    spdlog::warn("{}", e.what());
    return fallback(e.what());
  }
}

PrunedRegion request_pruning(const DesignSpace& space, const SpecSet& spec, const json& circuit_context,
                             AdvisorSession& advisor, const std::string& circuit) {
  json context = circuit_context.is_object() ? circuit_context : json::object();
  context["design_space"] = space_digest(space);
  context["spec"] = spec_to_json(spec);
  json schema = {{"type", "object"},
                 {"properties",
                  {{"box", {{"type", "object"}, {"description", "variable -> [lower, upper] in natural units"}}},
                   {"ratios",
                    {{"type", "array"},
                     {"items",
                      {{"type", "object"},
                       {"properties",
                        {{"num", {{"type", "string"}}},
                         {"den", {{"type", "string"}}},
                         {"min", {{"type", "number"}}},
                         {"max", {{"type", "number"}}}}}}}}},
                   {"rationale", {{"type", "string"}}}}}};
  auto request = make_request(
      "You are an analog circuit sizing expert.", context,
      "Propose a conservative pruned region of the design space that removes clearly infeasible sizings only. "
      "Use per-variable boxes and W/L style ratio constraints.",
      schema, "prune", 0, circuit);
  json reply = advisor.call(request);
  PrunedRegion region;
  try {
    region = pruned_from_json(reply);
    DesignSpace probe = space;
    probe.set_pruned(region);
  } catch (const Error& e) {
    throw MalformedAdvisorResponse(0, e.what());
  }
  return region;
}

OptReport optimize(const DesignSpace& space, const SpecSet& spec, EvaluatorHandle& evaluator, AdvisorSession* advisor,
                   const OptimizerConfig& cfg, std::uint64_t seed, const json& circuit_context,
                   const std::string& circuit) {
  cfg.validate();
  spec.validate();
  if (cfg.mode == ScoreMode::SingleObjective && !spec.target)
    throw ConfigError("single-objective mode needs a target metric");
  const auto provided = evaluator.metrics();
  for (const auto& m : spec.metrics)
    if (std::find(provided.begin(), provided.end(), m.name) == provided.end())
      throw ConfigError("evaluator " + evaluator.id() + " does not report metric '" + m.name + "'");
  if (space.dimension() == 0) throw ConfigError("design space has no free variables");

  const auto start = std::chrono::steady_clock::now();
  const std::size_t evals_before = evaluator.evaluations();
  const std::size_t calls_before = advisor ? advisor->calls() : 0;
  const bool feasibility = cfg.mode == ScoreMode::Feasibility;
  const std::size_t n0 = cfg.initial_count(space.dimension());

  OptReport report;
  report.seed = seed;
  report.mode = cfg.mode;
  report.spec = spec;
  report.variables = space.variables();
  report.dimension = space.dimension();
  report.evaluator_id = evaluator.id();

  OptState state;
  state.tr = make_trust_region(UnitPoint(space.dimension(), 0.5), cfg);
  Rng rng(seed ^ kLoopStream);

  auto record = [&](const UnitPoint& u, Provenance prov, std::size_t iteration) {
    HistoryEntry e;
    e.sample = state.history.size() + 1;
    e.iteration = iteration;
    e.unit = u;
    e.point.values = space.expand(u);
    e.point.provenance = prov;
    e.radius = state.tr.radius;
    e.no_imp = state.no_imp;
    EvalResult r = evaluate(e.point, evaluator, space);
    e.measurement = std::move(r.measurement);
    e.error = std::move(r.error);
    e.score = score(spec, e.measurement, cfg.mode);
    state.history.push_back(std::move(e));
    const auto& h = state.history.back();
    if (state.history.size() == 1 || h.score.fom > state.best_fom) {
      state.best_fom = h.score.fom;
      state.best_index = state.history.size() - 1;
    }
    if (feasibility && h.score.fom >= 0 && !report.samples_to_feasible) report.samples_to_feasible = h.sample;
  };
  auto done = [&] { return feasibility && report.samples_to_feasible.has_value(); };

  const auto init = initial_sample(space, n0, cfg.alpha, seed);
  report.init_fallback = init.fallback;
  report.init_from_pruned = static_cast<std::size_t>(std::count(init.from_pruned.begin(), init.from_pruned.end(), true));
  if (init.fallback) report.warnings.push_back("complement of the pruned region was too small; fell back to the full box");
  for (const auto& u : init.points) {
    record(u, Provenance::InitSample, 0);
    if (done()) break;
  }

  if (!done()) {
    state.tr.center = state.best().unit;
    std::optional<GpHyperparameters> warm;
    bool advisor_region = false;
    for (std::size_t t = 0; t < cfg.n_iter; ++t) {
      state.iteration = t + 1;
      std::vector<UnitPoint> xs;
      std::vector<double> ys;
      for (const auto& h : state.history) {
        xs.push_back(h.unit);
        ys.push_back(h.score.fom);
      }
      std::vector<UnitPoint> proposals;
      try {
        GpConfig gcfg = cfg.gp;
        if (warm && cfg.refit_every > 1 && t % cfg.refit_every != 0) {
          gcfg.restarts = 0;
          gcfg.adam_steps = std::max(1, cfg.gp.adam_steps / 3);
        }
        auto gp = fit_surrogate(xs, ys, gcfg, rng, warm ? &*warm : nullptr);
        warm = gp.hyperparameters();
        proposals = propose_batch(gp, state.tr, cfg.batch, state.best_fom, xs, cfg, rng);
      } catch (const SingularKernel& e) {
        report.warnings.push_back(std::string("iteration ") + std::to_string(t + 1) + ": " + e.what());
        proposals = latin_hypercube(cfg.batch, state.tr.lower(), state.tr.upper(), rng);
      }

      TraceEntry trace;
      trace.iteration = t + 1;
      trace.radius = state.tr.radius;
      trace.center = state.tr.center;
      const double before = state.best_fom;
      const auto prov = advisor_region ? Provenance::AdvisorSuggested : Provenance::TrustRegion;
      for (const auto& p : proposals) {
        record(p, prov, t + 1);
        if (done()) break;
      }
      advisor_region = false;
      const bool improved = state.best_fom > before;
      state.tr = update_trust_region(state.tr, improved);
      if (improved) {
        state.tr.center = state.best().unit;
        state.no_imp = 0;
      } else {
        ++state.no_imp;
      }
      trace.improved = improved;

      if (!done() && state.no_imp >= cfg.stagnation_k) {
        auto o = intervene(state, space, spec, circuit_context, advisor, cfg, rng, circuit);
        state.tr.center = o.center;
        state.tr.radius = std::clamp(o.radius, cfg.r_min, cfg.r_max);
        state.no_imp = 0;
        state.interventions.push_back({t + 1, o.source, o.center, state.tr.radius, o.detail});
        trace.intervened = true;
        advisor_region = o.source == "advisor";
      }
      trace.no_imp = state.no_imp;
      trace.next_radius = state.tr.radius;
      trace.best_fom = state.best_fom;
      state.trace.push_back(std::move(trace));
      if (done()) break;
    }
  }

  report.history = std::move(state.history);
  report.trace = std::move(state.trace);
  report.interventions = std::move(state.interventions);
  report.best_index = state.best_index;
  report.best_fom = state.best_fom;
  report.evaluations = evaluator.evaluations() - evals_before;
  report.advisor_calls = advisor ? advisor->calls() - calls_before : 0;
  report.status = feasibility ? (report.samples_to_feasible ? "feasible" : "budget-exhausted") : "completed";
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sizer
