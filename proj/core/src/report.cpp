#include "sizer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sizer/error.hpp"

namespace sizer {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

json unit_json(const UnitPoint& u) { return u; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

json report_to_json(const OptReport& r) {
  json history = json::array();
  for (const auto& h : r.history) {
    json metrics = json::object();
    for (const auto& [k, v] : h.measurement.values) metrics[k] = v;
    json failed = h.measurement.failed;
    json scores = json::object();
    for (std::size_t i = 0; i < r.spec.metrics.size(); ++i) scores[r.spec.metrics[i].name] = h.score.r.at(i);
    json e{{"sample", h.sample},
           {"iteration", h.iteration},
           {"provenance", to_string(h.point.provenance)},
           {"values", h.point.values},
           {"unit", unit_json(h.unit)},
           {"metrics", metrics},
           {"failed", failed},
           {"scores", scores},
           {"fom", h.score.fom},
           {"radius", h.radius},
           {"no_imp", h.no_imp}};
    if (!h.error.empty()) e["error"] = h.error;
    history.push_back(std::move(e));
  }
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"iteration", t.iteration},
                     {"radius", t.radius},
                     {"next_radius", t.next_radius},
                     {"center", unit_json(t.center)},
                     {"improved", t.improved},
                     {"no_imp", t.no_imp},
                     {"intervened", t.intervened},
                     {"best_fom", t.best_fom}});
  json interventions = json::array();
  for (const auto& i : r.interventions)
    interventions.push_back({{"iteration", i.iteration},
                             {"source", i.source},
                             {"center", unit_json(i.center)},
                             {"radius", i.radius},
                             {"detail", i.detail}});
  json best = nullptr;
  if (!r.history.empty())
    best = {{"sample", r.best().sample}, {"fom", r.best_fom}, {"values", r.best().point.values}};

  return {{"schema", std::string(kReportSchema)},
          {"seed", r.seed},
          {"mode", to_string(r.mode)},
          {"spec", spec_to_json(r.spec)},
          {"variables", variables_to_json(r.variables)},
          {"dimension", r.dimension},
          {"evaluator", r.evaluator_id},
          {"status", r.status},
          {"samples_to_feasible", r.samples_to_feasible ? json(*r.samples_to_feasible) : json(nullptr)},
          {"best", best},
          {"evaluations", r.evaluations},
          {"advisor_calls", r.advisor_calls},
          {"init_from_pruned", r.init_from_pruned},
          {"init_fallback", r.init_fallback},
          {"warnings", r.warnings},
          {"history", history},
          {"trace", trace},
          {"interventions", interventions}};
}

json run_metadata(const OptReport& r) {
  return {{"seed", r.seed}, {"wall_time_s", r.wall_time}, {"evaluations", r.evaluations}};
}

std::string history_csv(const OptReport& r) {
  std::ostringstream out;
  out << "sample,iteration,provenance";
  for (const auto& v : r.variables) out << "," << v.name;
  for (const auto& m : r.spec.metrics) out << "," << m.name;
  for (const auto& m : r.spec.metrics) out << ",r_" << m.name;
  out << ",fom,radius,no_imp\n";
  for (const auto& h : r.history) {
    out << h.sample << "," << h.iteration << "," << to_string(h.point.provenance);
    for (const auto& v : r.variables) out << "," << num(h.point.values.at(v.name));
    for (const auto& m : r.spec.metrics) {
      auto it = h.measurement.values.find(m.name);
      out << "," << (h.measurement.is_failed(m.name) || it == h.measurement.values.end() ? "failed" : num(it->second));
    }
    for (double s : h.score.r) out << "," << num(s);
    out << "," << num(h.score.fom) << "," << num(h.radius) << "," << h.no_imp << "\n";
  }
  return out.str();
}

RunSummary summarize(const OptReport& r, std::string label) {
  RunSummary s;
  s.label = label.empty() ? "seed " + std::to_string(r.seed) : std::move(label);
  s.seed = r.seed;
  s.status = r.status;
  s.samples_to_feasible = r.samples_to_feasible;
  s.best_fom = r.best_fom;
  s.evaluations = r.evaluations;
  s.advisor_calls = r.advisor_calls;
  for (const auto& h : r.history) s.fom.push_back(h.score.fom);
  return s;
}

RunSummary summary_from_json(const json& j, std::string label) {
  try {
    if (j.value("schema", std::string{}) != kReportSchema) throw SchemaError("not a report document (schema tag)");
    RunSummary s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.label = label.empty() ? "seed " + std::to_string(s.seed) : std::move(label);
    s.status = j.at("status").get<std::string>();
    if (!j.at("samples_to_feasible").is_null()) s.samples_to_feasible = j.at("samples_to_feasible").get<std::size_t>();
    s.best_fom = j.at("best").is_null() ? 0.0 : j.at("best").at("fom").get<double>();
    s.evaluations = j.at("evaluations").get<std::size_t>();
    s.advisor_calls = j.at("advisor_calls").get<std::size_t>();
    for (const auto& h : j.at("history")) s.fom.push_back(h.at("fom").get<double>());
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("report document is malformed: ") + e.what());
  }
}

Aggregate aggregate(const std::vector<RunSummary>& runs) {
  Aggregate a;
  a.runs = runs.size();
  std::vector<double> samples, best;
  double evals = 0, calls = 0;
  for (const auto& r : runs) {
    if (r.samples_to_feasible) samples.push_back(static_cast<double>(*r.samples_to_feasible));
    best.push_back(r.best_fom);
    evals += static_cast<double>(r.evaluations);
    calls += static_cast<double>(r.advisor_calls);
  }
  a.feasible = samples.size();
  if (!samples.empty()) {
    a.mean_samples = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    a.median_samples = median(samples);
  }
  if (!runs.empty()) {
    const double n = static_cast<double>(runs.size());
    a.mean_best_fom = std::accumulate(best.begin(), best.end(), 0.0) / n;
    a.median_best_fom = median(best);
    a.mean_evaluations = evals / n;
    a.mean_advisor_calls = calls / n;
  }
  return a;
}

json aggregate_to_json(const std::vector<RunSummary>& runs, const Aggregate& a) {
  json rows = json::array();
  for (const auto& r : runs)
    rows.push_back({{"label", r.label},
                    {"seed", r.seed},
                    {"status", r.status},
                    {"samples_to_feasible", r.samples_to_feasible ? json(*r.samples_to_feasible) : json(nullptr)},
                    {"best_fom", r.best_fom},
                    {"evaluations", r.evaluations},
                    {"advisor_calls", r.advisor_calls}});
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"runs", rows},
          {"summary",
           {{"runs", a.runs},
            {"feasible", a.feasible},
            {"mean_samples_to_feasible", opt(a.mean_samples)},
            {"median_samples_to_feasible", opt(a.median_samples)},
            {"mean_best_fom", a.mean_best_fom},
            {"median_best_fom", a.median_best_fom},
            {"mean_evaluations", a.mean_evaluations},
            {"mean_advisor_calls", a.mean_advisor_calls}}}};
}

std::string aggregate_table(const std::vector<RunSummary>& runs, const Aggregate& a) {
  std::ostringstream out;
  out << "| run | status | samples to feasible | best FoM | evaluations | advisor calls |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : runs)
    out << "| " << r.label << " | " << r.status << " | "
        << (r.samples_to_feasible ? std::to_string(*r.samples_to_feasible) : "-") << " | " << short_num(r.best_fom)
        << " | " << r.evaluations << " | " << r.advisor_calls << " |\n";
  out << "| mean (" << a.feasible << "/" << a.runs << " feasible) | | "
      << (a.mean_samples ? short_num(*a.mean_samples) : "-") << " (median "
      << (a.median_samples ? short_num(*a.median_samples) : "-") << ") | " << short_num(a.mean_best_fom) << " | "
      << short_num(a.mean_evaluations) << " | " << short_num(a.mean_advisor_calls) << " |\n";
  return out.str();
}

std::string fom_plot_svg(const std::vector<RunSummary>& runs, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 30, B = 45;
  std::size_t max_n = 1;
  double lo = 0.0;
  for (const auto& r : runs) {
    max_n = std::max(max_n, r.fom.size());
    double best = -std::numeric_limits<double>::infinity();
    for (double f : r.fom) {
      best = std::max(best, f);
      lo = std::min(lo, best);
    }
  }
  double hi = 0.0;
  for (const auto& r : runs)
    for (double f : r.fom) hi = std::max(hi, f);
  if (hi - lo < 1e-12) lo = hi - 1.0;
  auto xpos = [&](double i) { return L + (W - L - R) * (max_n > 1 ? (i - 1) / static_cast<double>(max_n - 1) : 0.0); };
  auto ypos = [&](double f) { return T + (H - T - B) * (hi - f) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
        << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">Sample #</text>\n";
  out << "<text x=\"14\" y=\"" << (H - B + T) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << (H - B + T) / 2
      << ")\" text-anchor=\"middle\">best FoM</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << ypos(hi) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << short_num(hi)
      << "</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << ypos(lo) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << short_num(lo)
      << "</text>\n";
  out << "<text x=\"" << W - R << "\" y=\"" << H - B + 14 << "\" text-anchor=\"end\" font-size=\"10\">" << max_n
      << "</text>\n";
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& r = runs[k];
    out << "<polyline id=\"run-" << k << "\" data-label=\"" << xml_escape(r.label) << "\" fill=\"none\" stroke=\""
        << colors[k % 10] << "\" stroke-width=\"1.5\" points=\"";
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.fom.size(); ++i) {
      best = std::max(best, r.fom[i]);
      out << (i ? " " : "") << short_num(xpos(static_cast<double>(i + 1))) << "," << short_num(ypos(best));
    }
    out << "\"><title>" << xml_escape(r.label) << "</title></polyline>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace sizer
