#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sizer/optimizer.hpp"

namespace sizer {

inline constexpr std::string_view kReportSchema = "sizer.report/1";

/// Deterministic content only; wall times go to `run_metadata`.
nlohmann::json report_to_json(const OptReport& r);
nlohmann::json run_metadata(const OptReport& r);

/// One row per evaluation: sample, iteration, provenance, variables, metrics, scores, FoM,
/// radius and no_imp. Numbers use 17 significant digits.
std::string history_csv(const OptReport& r);

/// The parts of a saved report needed for aggregation and plotting.
struct RunSummary {
  std::string label;
  std::uint64_t seed = 0;
  std::string status;
  std::optional<std::size_t> samples_to_feasible;
  double best_fom = 0.0;
  std::size_t evaluations = 0;
  std::size_t advisor_calls = 0;
  std::vector<double> fom;  // per evaluation, in order
};

RunSummary summarize(const OptReport& r, std::string label = {});
RunSummary summary_from_json(const nlohmann::json& report, std::string label = {});

struct Aggregate {
  std::size_t runs = 0;
  std::size_t feasible = 0;
  std::optional<double> mean_samples;    // over runs that reached feasibility
  std::optional<double> median_samples;
  double mean_best_fom = 0.0;
  double median_best_fom = 0.0;
  double mean_evaluations = 0.0;
  double mean_advisor_calls = 0.0;
};

Aggregate aggregate(const std::vector<RunSummary>& runs);
nlohmann::json aggregate_to_json(const std::vector<RunSummary>& runs, const Aggregate& a);
/// Markdown table with one row per run and a closing aggregate row.
std::string aggregate_table(const std::vector<RunSummary>& runs, const Aggregate& a);

/// Best-so-far FoM against sample count, one polyline per run.
std::string fom_plot_svg(const std::vector<RunSummary>& runs, const std::string& title = {});

}  // namespace sizer
