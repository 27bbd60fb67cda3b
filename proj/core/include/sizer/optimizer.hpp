#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/advisor.hpp"
#include "sizer/design_space.hpp"
#include "sizer/evaluator.hpp"
#include "sizer/gaussian_process.hpp"
#include "sizer/sampling.hpp"
#include "sizer/scoring.hpp"

namespace sizer {

struct OptimizerConfig {
  std::size_t n_init = 0;  // 0 means twice the free dimension
  std::size_t n_iter = 100;
  std::size_t batch = 1;
  std::size_t stagnation_k = 5;
  double alpha = 0.8;  // share of initial samples drawn from the pruned region
  double alpha_inc = 1.5;
  double alpha_dec = 0.75;
  double r_min = 1.0 / 64.0;
  double r_max = 0.8;
  double r_init = 0.4;
  std::size_t candidates = 2000;
  double dedupe_tol = 1e-6;  // infinity-norm distance in unit coordinates
  ScoreMode mode = ScoreMode::Feasibility;
  std::size_t max_parallel = 1;
  GpConfig gp;
  std::size_t refit_every = 5;  // full multi-start fit period; other iterations refine the previous fit

  std::size_t initial_count(std::size_t dimension) const { return n_init ? n_init : 2 * dimension; }
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

nlohmann::json optimizer_config_to_json(const OptimizerConfig& c);
/// Reads the keys present in `j` over the defaults in `base`.
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j, OptimizerConfig base = {});

struct TrustRegion {
  UnitPoint center;
  double radius = 0.4;
  double r_min = 1.0 / 64.0;
  double r_max = 0.8;
  double alpha_inc = 1.5;
  double alpha_dec = 0.75;

  std::vector<double> lower() const;
  std::vector<double> upper() const;
  bool contains(const UnitPoint& u, double tol = 1e-12) const;
};

TrustRegion make_trust_region(const UnitPoint& center, const OptimizerConfig& cfg);
/// Expands on improvement, contracts otherwise, clipped to [r_min, r_max].
TrustRegion update_trust_region(TrustRegion tr, bool improved);

struct InitialSample {
  std::vector<UnitPoint> points;  // evaluation order
  std::vector<bool> from_pruned;
  bool fallback = false;  // complement sampling gave up and drew from the whole box
};

/// ceil(alpha*n) Latin-hypercube points in the pruned region and the rest in its complement,
/// shuffled together. Without a pruned region every point comes from the whole box.
InitialSample initial_sample(const DesignSpace& space, std::size_t n, double alpha, std::uint64_t seed);

/// Fits the surrogate to unit-coordinate points and their FoM values.
GaussianProcess fit_surrogate(const std::vector<UnitPoint>& x, const std::vector<double>& fom, const GpConfig& cfg,
                              Rng& rng, const GpHyperparameters* warm_start = nullptr);

double expected_improvement(const Prediction& p, double best);

/// q points maximizing expected improvement over `best` on a scrambled Halton cloud inside the
/// trust region, skipping near-duplicates of `history`.
std::vector<UnitPoint> propose_batch(const GaussianProcess& gp, const TrustRegion& tr, std::size_t q, double best,
                                     const std::vector<UnitPoint>& history, const OptimizerConfig& cfg, Rng& rng);

struct HistoryEntry {
  std::size_t sample = 0;  // 1-based evaluation index
  std::size_t iteration = 0;  // 0 for initial samples
  DesignPoint point;
  UnitPoint unit;
  Measurement measurement;
  ScoreVector score;
  double radius = 0.0;
  std::size_t no_imp = 0;
  std::string error;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double radius = 0.0;       // region used for this iteration's proposals
  double next_radius = 0.0;  // after the update and any intervention
  UnitPoint center;
  bool improved = false;
  std::size_t no_imp = 0;
  bool intervened = false;
  double best_fom = 0.0;
};

struct InterventionRecord {
  std::size_t iteration = 0;
  std::string source;  // "advisor" or "fallback"
  UnitPoint center;
  double radius = 0.0;
  std::string detail;
};

struct OptState {
  std::vector<HistoryEntry> history;
  std::size_t best_index = 0;
  double best_fom = -std::numeric_limits<double>::infinity();
  TrustRegion tr;
  std::size_t no_imp = 0;
  std::size_t iteration = 0;
  std::vector<TraceEntry> trace;
  std::vector<InterventionRecord> interventions;

  bool has_best() const { return !history.empty(); }
  const HistoryEntry& best() const { return history.at(best_index); }
};

struct InterventionOutcome {
  UnitPoint center;
  double radius = 0.0;
  std::string source;
  std::string detail;
};

/// Asks the advisor for a new trust-region center and radius; on any advisor problem applies
/// the deterministic restart (best point outside the current region, else a random point;
/// radius r_max/2).
InterventionOutcome intervene(const OptState& state, const DesignSpace& space, const SpecSet& spec,
                              const nlohmann::json& circuit_context, AdvisorSession* advisor,
                              const OptimizerConfig& cfg, Rng& rng, const std::string& circuit = {});

/// Asks the advisor for a conservative pruned region. Throws AdvisorUnavailable or
/// MalformedAdvisorResponse.
PrunedRegion request_pruning(const DesignSpace& space, const SpecSet& spec, const nlohmann::json& circuit_context,
                             AdvisorSession& advisor, const std::string& circuit = {});

struct OptReport {
  std::uint64_t seed = 0;
  ScoreMode mode = ScoreMode::Feasibility;
  SpecSet spec;
  std::vector<Variable> variables;  // full list
  std::size_t dimension = 0;        // free dimension
  std::string evaluator_id;
  std::vector<HistoryEntry> history;
  std::vector<TraceEntry> trace;
  std::vector<InterventionRecord> interventions;
  std::size_t best_index = 0;
  double best_fom = 0.0;
  std::optional<std::size_t> samples_to_feasible;
  std::size_t evaluations = 0;
  std::size_t advisor_calls = 0;
  double wall_time = 0.0;
  std::string status;  // "feasible", "budget-exhausted" or "completed"
  bool init_fallback = false;
  std::size_t init_from_pruned = 0;
  std::vector<std::string> warnings;

  const HistoryEntry& best() const { return history.at(best_index); }
};

/// Initial sampling followed by the trust-region loop with stagnation-triggered intervention.
/// In feasibility mode the run stops at the first point with FoM = 0.
OptReport optimize(const DesignSpace& space, const SpecSet& spec, EvaluatorHandle& evaluator,
                   AdvisorSession* advisor, const OptimizerConfig& cfg, std::uint64_t seed,
                   const nlohmann::json& circuit_context = {}, const std::string& circuit = {});

}  // namespace sizer
