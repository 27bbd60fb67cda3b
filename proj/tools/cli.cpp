#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sizer/error.hpp"
#include "sizer/evaluator.hpp"
#include "sizer/hierarchy.hpp"
#include "sizer/report.hpp"

namespace sizer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Rewrites "line N: reason" messages as "file:N: reason".
std::string with_location(const fs::path& file, const std::string& message) {
  const std::string prefix = "line ";
  if (message.rfind(prefix, 0) == 0) {
    const auto colon = message.find(':');
    if (colon != std::string::npos) return file.string() + ":" + message.substr(5, colon - 5) + message.substr(colon);
  }
  return file.string() + ": " + message;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

// Resolves the file part of "stub:<file>", "record:<file>:<inner>", "mock:<file.json>".
std::string resolve_selector(const fs::path& base, const std::string& selector) {
  if (base.empty()) return selector;
  if (selector.rfind("stub:", 0) == 0) return "stub:" + resolve(base, selector.substr(5)).string();
  if (selector.rfind("mock:", 0) == 0 && selector.size() > 10 && selector.ends_with(".json"))
    return "mock:" + resolve(base, selector.substr(5)).string();
  if (selector.rfind("record:", 0) == 0) {
    const auto rest = selector.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) return selector;
    return "record:" + resolve(base, rest.substr(0, colon)).string() + ":" +
           resolve_selector(base, rest.substr(colon + 1));
  }
  return selector;
}

Netlist load_netlist(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return parse_netlist(text);
  } catch (const SyntaxError& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.reason());
  } catch (const Error& e) {
    throw ConfigError(with_location(path, e.what()));
  }
}

Hierarchy analyze_file(const fs::path& netlist, const IoNets& io, const std::optional<fs::path>& library) {
  AnalyzeOptions opts;
  opts.io = io;
  if (library) opts.library = load_library(read_json_file(*library));
  auto parsed = load_netlist(netlist);
  try {
    return analyze(parsed, opts);
  } catch (const Error& e) {
    throw ConfigError(netlist.string() + ": " + e.what());
  }
}

Hierarchy load_hierarchy(const fs::path& path) {
  try {
    return hierarchy_from_json(read_json_file(path));
  } catch (const SchemaError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ScoreMode apply_mode(const std::string& mode, SpecSet& spec) {
  if (mode == "feas" || mode == "feasibility") return ScoreMode::Feasibility;
  if (mode == "single") {
    if (!spec.target) throw ConfigError("mode 'single' needs a target metric: use single:<metric>");
    return ScoreMode::SingleObjective;
  }
  if (mode.rfind("single:", 0) == 0) {
    spec = with_target(spec, mode.substr(7));
    return ScoreMode::SingleObjective;
  }
  throw ConfigError("unknown mode '" + mode + "' (expected feas or single:<metric>)");
}

json circuit_context(const Hierarchy& h) { return {{"hierarchy_json", hierarchy_to_json(h)}, {"circuit_text", render_text(h)}}; }

void configure_logging(const std::string& level) {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("sizer");
    spdlog::set_default_logger(l);
    return l;
  }();
  spdlog::set_level(spdlog::level::from_str(level));
}

struct UnconvergedExit {
  std::string message;
};

std::vector<RunSummary> collect_reports(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().filename() == "report.json") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw ConfigError("no such report or directory: " + in);
    }
  }
  if (files.empty()) throw ConfigError("no report.json files found");
  std::vector<RunSummary> runs;
  for (const auto& f : files) {
    const auto j = read_json_file(f);
    try {
      auto label = "seed " + std::to_string(j.at("seed").get<std::uint64_t>());
      runs.push_back(summary_from_json(j, label));
    } catch (const std::exception& e) {
      throw ConfigError(f.string() + ": not a run report: " + e.what());
    }
  }
  return runs;
}

void write_aggregate(const fs::path& out, const std::vector<RunSummary>& runs, bool plot, const std::string& title) {
  const auto agg = aggregate(runs);
  const auto table = aggregate_table(runs, agg);
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(out / "aggregate.json", aggregate_to_json(runs, agg));
    write_text(out / "summary.md", table);
    if (plot) write_text(out / "fom.svg", fom_plot_svg(runs, title));
  }
  std::cout << table;
}

// ---- commands ----

struct AnalyzeArgs {
  std::string netlist;
  std::string inputs, outputs;
  std::string library;
  std::string out = ".";
};

int cmd_analyze(const AnalyzeArgs& a) {
  IoNets io;
  for (auto& n : split_list(a.inputs)) io.inputs.insert(n);
  for (auto& n : split_list(a.outputs)) io.outputs.insert(n);
  auto h = analyze_file(a.netlist, io, a.library.empty() ? std::nullopt : std::optional<fs::path>(a.library));
  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / "hierarchy.json", hierarchy_to_json(h));
  write_text(out / "hierarchy.txt", render_text(h));
  for (const auto& d : h.diagnostics) spdlog::warn("{}", d);
  std::cout << (h.title.empty() ? a.netlist : h.title) << ": " << h.components.size() << " devices, "
            << h.modules().size() << " modules, " << h.stages.size() << " stages -> " << (out / "hierarchy.json").string()
            << "\n";
  return kExitOk;
}

struct UnderstandArgs {
  std::string hierarchy;
  std::string advisor;
  std::string out = ".";
  bool best_effort = false;
  int max_rounds = LoopConfig{}.max_rounds;
  double threshold = LoopConfig{}.confidence_threshold;
};

struct Understood {
  UnderstandResult result;
  TyingPlan plan;
};

Understood understand_and_tie(Hierarchy& h, AdvisorSession& session, const LoopConfig& loop,
                              const std::vector<std::string>& variables) {
  Understood u;
  u.result = understand(h, session, loop);
  h.annotations = annotation_to_json(u.result.annotation);
  u.plan = assign_parameters(h, u.result.annotation, session, variables);
  return u;
}

json checklist_summary(const UnderstandResult& r) {
  auto j = checklist_to_json(r.report);
  j["converged"] = r.converged;
  j["rounds"] = r.rounds;
  return j;
}

int cmd_understand(const UnderstandArgs& a) {
  auto h = load_hierarchy(a.hierarchy);
  auto stack = make_advisor(a.advisor);
  if (!stack.get()) throw AdvisorUnavailable("understanding needs an advisor (--advisor stub:<fixture.json> or openai)");
  AdvisorSession session(stack.get());
  LoopConfig loop;
  loop.max_rounds = a.max_rounds;
  loop.confidence_threshold = a.threshold;
  auto u = understand_and_tie(h, session, loop, design_symbols(h));

  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / "hierarchy.json", hierarchy_to_json(h));
  write_json(out / "annotations.json", annotation_to_json(u.result.annotation));
  write_json(out / "checklist.json", checklist_summary(u.result));
  write_json(out / "tying.json", tying_to_json(u.plan));
  write_json(out / "transcript.json", session.transcript_json());
  stack.flush();

  std::cout << "understanding " << (u.result.converged ? "converged" : "did not converge") << " after "
            << u.result.rounds << " round(s); " << session.calls() << " advisor call(s); dimension "
            << u.plan.variable_count << " -> " << u.plan.reduced_dimension << "\n";
  if (!u.result.converged) {
    for (const auto& item : u.result.report.offending_items()) std::cerr << "  unresolved: " << item << "\n";
    if (!a.best_effort) {
      std::cerr << "understanding did not converge; rerun with --best-effort to accept the partial result\n";
      return kExitUnconverged;
    }
  }
  return kExitOk;
}

struct OptimizeArgs {
  std::string config;
  std::string netlist, hierarchy, tying, spec, evaluator, advisor, seed, out, mode;
  std::string inputs, outputs;
  std::optional<std::size_t> n_iter;
  std::optional<double> alpha;
  bool plot = false;
  bool best_effort = false;
};

RunConfig merge_flags(const OptimizeArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (!a.netlist.empty()) c.netlist = a.netlist;
  if (!a.hierarchy.empty()) c.hierarchy = a.hierarchy;
  if (!a.tying.empty()) c.tying = a.tying;
  if (!a.spec.empty()) c.spec = a.spec;
  if (!a.evaluator.empty()) c.evaluator = a.evaluator;
  if (!a.advisor.empty()) c.advisor = a.advisor;
  if (!a.seed.empty()) c.seeds = parse_seeds(a.seed);
  if (!a.out.empty()) c.out = a.out;
  if (!a.mode.empty()) c.mode = a.mode;
  if (!a.inputs.empty()) {
    c.io.inputs.clear();
    for (auto& n : split_list(a.inputs)) c.io.inputs.insert(n);
  }
  if (!a.outputs.empty()) {
    c.io.outputs.clear();
    for (auto& n : split_list(a.outputs)) c.io.outputs.insert(n);
  }
  if (a.n_iter) c.optimizer.n_iter = *a.n_iter;
  if (a.alpha) c.optimizer.alpha = *a.alpha;
  c.plot = c.plot || a.plot;
  c.best_effort = c.best_effort || a.best_effort;
  return c;
}

int cmd_optimize(const OptimizeArgs& a) {
  RunConfig c = merge_flags(a);
  c.validate();

  SpecSet spec = load_spec(c.spec.string());
  OptimizerConfig ocfg = c.optimizer;
  ocfg.mode = apply_mode(c.mode, spec);
  ocfg.validate();

  std::vector<std::string> metric_names;
  for (const auto& m : spec.metrics) metric_names.push_back(m.name);
  auto evaluator = make_evaluator(c.evaluator, metric_names);
  std::vector<Variable> variables;
  if (c.variables) {
    variables = variables_from_json(*c.variables);
  } else if (auto* mock = dynamic_cast<MockModel*>(evaluator.get())) {
    variables = mock->variables();
  } else {
    throw ConfigError("the run config must list 'variables' for evaluator '" + c.evaluator + "'");
  }
  const auto reported = evaluator->metrics();
  for (const auto& m : metric_names)
    if (std::find(reported.begin(), reported.end(), m) == reported.end())
      throw ConfigError("evaluator '" + evaluator->id() + "' does not report metric '" + m + "'");
  std::vector<std::string> variable_names;
  for (const auto& v : variables) variable_names.push_back(v.name);

  auto stack = make_advisor(c.advisor);
  AdvisorSession setup(stack.get());
  const std::string circuit = c.circuit.empty() ? spec.circuit : c.circuit;
  fs::create_directories(c.out);

  std::optional<Hierarchy> h;
  if (!c.hierarchy.empty())
    h = load_hierarchy(c.hierarchy);
  else if (!c.netlist.empty())
    h = analyze_file(c.netlist, c.io, std::nullopt);

  TyingPlan plan;
  if (!c.tying.empty()) {
    plan = tying_from_json(read_json_file(c.tying));
  } else if (h) {
    if (setup.available() && !h->annotations) {
      auto u = understand_and_tie(*h, setup, c.loop, variable_names);
      write_json(c.out / "checklist.json", checklist_summary(u.result));
      plan = u.plan;
      if (!u.result.converged) {
        if (!c.best_effort) throw UnconvergedExit{"understanding did not converge; rerun with --best-effort"};
        spdlog::warn("understanding did not converge; continuing with the partial annotation");
      }
    } else if (setup.available()) {
      plan = assign_parameters(*h, annotation_from_json(*h->annotations), setup, variable_names);
    } else {
      plan = structural_tying(*h, variable_names);
    }
  }
  if (h) write_json(c.out / "hierarchy.json", hierarchy_to_json(*h));
  DesignSpace space(variables, plan);
  write_json(c.out / "tying.json", tying_to_json(space.tying()));

  const json context = h ? circuit_context(*h) : json::object();
  if (setup.available() && ocfg.alpha > 0) {
    try {
      auto region = request_pruning(space, spec, context, setup, circuit);
      if (!region.empty()) space.set_pruned(region);
      write_json(c.out / "pruned.json", pruned_to_json(region));
    } catch (const Error& e) {
      spdlog::warn("no pruned region: {}", e.what());
    }
  }
  if (setup.available()) write_json(c.out / "transcript.json", setup.transcript_json());

  json effective = run_config_to_json(c);
  effective["optimizer"] = optimizer_config_to_json(ocfg);
  write_json(c.out / "config.json", effective);

  std::vector<RunSummary> runs;
  for (const auto seed : c.seeds) {
    AdvisorSession session(stack.get());
    auto report = optimize(space, spec, *evaluator, session.available() ? &session : nullptr, ocfg, seed, context,
                           circuit);
    const fs::path dir = c.out / ("seed-" + std::to_string(seed));
    fs::create_directories(dir);
    write_json(dir / "report.json", report_to_json(report));
    write_json(dir / "meta.json", run_metadata(report));
    write_text(dir / "history.csv", history_csv(report));
    if (session.available()) write_json(dir / "transcript.json", session.transcript_json());
    std::cout << "seed " << seed << ": " << report.status;
    if (report.samples_to_feasible) std::cout << " after " << *report.samples_to_feasible << " samples";
    std::cout << ", best FoM " << report.best_fom << ", " << report.evaluations << " evaluations\n";
    runs.push_back(summarize(report, "seed " + std::to_string(seed)));
  }
  stack.flush();
  write_aggregate(c.out, runs, c.plot, circuit);
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  bool plot = false;
  std::string title;
};

int cmd_report(const ReportArgs& a) {
  const auto runs = collect_reports(a.inputs);
  write_aggregate(a.out, runs, a.plot, a.title);
  return kExitOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  try {
    for (const auto& item : split_list(text)) {
      const auto dots = item.find("..");
      if (dots == std::string::npos) {
        seeds.push_back(std::stoull(item));
        continue;
      }
      const auto lo = std::stoull(item.substr(0, dots));
      const auto hi = std::stoull(item.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad seed list '" + text + "'");
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

json read_json_file(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
}

void RunConfig::validate() const {
  auto need = [](const fs::path& p, const char* what) {
    if (!p.empty() && !fs::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  if (spec.empty()) throw ConfigError("a spec file is required");
  if (evaluator.empty()) throw ConfigError("an evaluator is required (mock:<name> or extern:<command>)");
  need(spec, "spec");
  need(netlist, "netlist");
  need(hierarchy, "hierarchy");
  need(tying, "tying plan");
  if (advisor.rfind("stub:", 0) == 0) need(advisor.substr(5), "advisor fixture");
  if (seeds.empty()) throw ConfigError("no seeds given");
  if (out.empty()) throw ConfigError("an output directory is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  const auto probe = out / ".write-probe";
  {
    std::ofstream f(probe);
    if (ec || !f) throw ConfigError("output directory is not writable: " + out.string());
  }
  fs::remove(probe, ec);
}

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    if (j.contains("schema") && j.at("schema") != kRunSchema)
      throw ConfigError("unsupported run config schema " + j.at("schema").dump());
    auto path = [&](const char* key) { return j.contains(key) ? resolve(base, j.at(key).get<std::string>()) : fs::path{}; };
    c.netlist = path("netlist");
    c.hierarchy = path("hierarchy");
    c.tying = path("tying");
    c.spec = path("spec");
    if (j.contains("io")) {
      c.io.inputs = j.at("io").value("inputs", std::set<std::string>{});
      c.io.outputs = j.at("io").value("outputs", std::set<std::string>{});
    }
    c.evaluator = resolve_selector(base, j.value("evaluator", std::string{}));
    c.advisor = resolve_selector(base, j.value("advisor", std::string{"none"}));
    if (j.contains("variables")) c.variables = j.at("variables");
    if (j.contains("optimizer")) c.optimizer = optimizer_config_from_json(j.at("optimizer"));
    if (j.contains("understanding")) {
      const auto& u = j.at("understanding");
      c.loop.confidence_threshold = u.value("confidence_threshold", c.loop.confidence_threshold);
      c.loop.max_rounds = u.value("max_rounds", c.loop.max_rounds);
      c.loop.retries = u.value("retries", c.loop.retries);
    }
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      c.seeds = s.is_string() ? parse_seeds(s.get<std::string>()) : s.get<std::vector<std::uint64_t>>();
    }
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    c.mode = j.value("mode", c.mode);
    c.plot = j.value("plot", c.plot);
    c.best_effort = j.value("best_effort", c.best_effort);
    c.circuit = j.value("circuit", c.circuit);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config is malformed: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(read_json_file(path), path.parent_path());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

json run_config_to_json(const RunConfig& c) {
  json j = {{"schema", kRunSchema},
            {"spec", c.spec.string()},
            {"evaluator", c.evaluator},
            {"advisor", c.advisor},
            {"io", {{"inputs", c.io.inputs}, {"outputs", c.io.outputs}}},
            {"optimizer", optimizer_config_to_json(c.optimizer)},
            {"understanding",
             {{"confidence_threshold", c.loop.confidence_threshold},
              {"max_rounds", c.loop.max_rounds},
              {"retries", c.loop.retries}}},
            {"seeds", c.seeds},
            {"out", c.out.string()},
            {"mode", c.mode},
            {"plot", c.plot},
            {"best_effort", c.best_effort}};
  if (!c.netlist.empty()) j["netlist"] = c.netlist.string();
  if (!c.hierarchy.empty()) j["hierarchy"] = c.hierarchy.string();
  if (!c.tying.empty()) j["tying"] = c.tying.string();
  if (c.variables) j["variables"] = *c.variables;
  if (!c.circuit.empty()) j["circuit"] = c.circuit;
  return j;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Netlist analysis and advisor-guided sizing optimization"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "Build the device/module/stage hierarchy of a netlist");
  analyze_cmd->add_option("--netlist", aa.netlist, "SPICE-subset netlist")->required();
  analyze_cmd->add_option("--inputs", aa.inputs, "Comma-separated primary input nets");
  analyze_cmd->add_option("--outputs", aa.outputs, "Comma-separated primary output nets");
  analyze_cmd->add_option("--library", aa.library, "Template library JSON (default: built-in)");
  analyze_cmd->add_option("--out", aa.out, "Output directory")->capture_default_str();

  UnderstandArgs ua;
  auto* understand_cmd = app.add_subcommand("understand", "Annotate a hierarchy with advisor help and plan parameter tying");
  understand_cmd->add_option("--hierarchy", ua.hierarchy, "hierarchy.json from analyze")->required();
  understand_cmd->add_option("--advisor", ua.advisor, "stub:<fixture.json>, openai[:<model>[@<url>]] or record:<out>:<advisor>")
      ->required();
  understand_cmd->add_option("--out", ua.out, "Output directory")->capture_default_str();
  understand_cmd->add_flag("--best-effort", ua.best_effort, "Exit 0 even when the loop does not converge");
  understand_cmd->add_option("--max-rounds", ua.max_rounds)->capture_default_str();
  understand_cmd->add_option("--threshold", ua.threshold, "Confidence threshold")->capture_default_str();

  OptimizeArgs oa;
  auto* optimize_cmd = app.add_subcommand("optimize", "Run trust-region Bayesian sizing for one or more seeds");
  optimize_cmd->add_option("--config", oa.config, "Run config JSON");
  optimize_cmd->add_option("--netlist", oa.netlist, "Netlist; analyzed and understood before optimizing");
  optimize_cmd->add_option("--hierarchy", oa.hierarchy, "Annotated hierarchy.json from understand");
  optimize_cmd->add_option("--tying", oa.tying, "tying.json from understand");
  optimize_cmd->add_option("--spec", oa.spec, "Specification JSON");
  optimize_cmd->add_option("--evaluator", oa.evaluator, "mock:<name>, mock:<model.json> or extern:<command>");
  optimize_cmd->add_option("--advisor", oa.advisor, "none, stub:<fixture.json>, openai[:<model>] or record:...");
  optimize_cmd->add_option("--seed", oa.seed, "Seeds: 3, 0,2,5 or 0..9");
  optimize_cmd->add_option("--out", oa.out, "Output directory");
  optimize_cmd->add_option("--mode", oa.mode, "feas or single:<metric>");
  optimize_cmd->add_option("--inputs", oa.inputs, "Comma-separated primary input nets");
  optimize_cmd->add_option("--outputs", oa.outputs, "Comma-separated primary output nets");
  optimize_cmd->add_option("--n-iter", oa.n_iter, "Trust-region iterations");
  optimize_cmd->add_option("--alpha", oa.alpha, "Share of initial samples drawn from the pruned region");
  optimize_cmd->add_flag("--plot", oa.plot, "Write fom.svg");
  optimize_cmd->add_flag("--best-effort", oa.best_effort, "Continue when understanding does not converge");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "Aggregate saved run reports");
  report_cmd->add_option("inputs", ra.inputs, "report.json files or directories")->required();
  report_cmd->add_option("--out", ra.out, "Write aggregate.json, summary.md and fom.svg here");
  report_cmd->add_flag("--plot", ra.plot, "Write fom.svg");
  report_cmd->add_option("--title", ra.title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    configure_logging(log_level);
    if (*analyze_cmd) return cmd_analyze(aa);
    if (*understand_cmd) return cmd_understand(ua);
    if (*optimize_cmd) return cmd_optimize(oa);
    if (*report_cmd) return cmd_report(ra);
  } catch (const UnconvergedExit& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitUnconverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace sizer::cli
