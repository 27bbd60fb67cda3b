#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "sizer/optimizer.hpp"
#include "sizer/understanding.hpp"

namespace {

std::string netlist(const std::string& circuit) {
  std::ifstream in(std::string(SIZER_DATA_DIR) + "/netlists/" + circuit + ".sp");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* circuit_name(int i) {
  static const char* names[] = {"ota", "fcota", "sacmp", "ldo"};
  return names[i];
}

void BM_ParseAndBuildGraph(benchmark::State& state) {
  const auto text = netlist(circuit_name(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(sizer::build_graph(sizer::parse_netlist(text)));
  state.SetLabel(circuit_name(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_ParseAndBuildGraph)->DenseRange(0, 3);

void BM_CollapseToFixpoint(benchmark::State& state) {
  const auto g = sizer::build_graph(sizer::parse_netlist(netlist(circuit_name(static_cast<int>(state.range(0))))));
  for (auto _ : state) benchmark::DoNotOptimize(sizer::collapse_to_fixpoint(g));
  state.SetLabel(circuit_name(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CollapseToFixpoint)->DenseRange(0, 3);

void BM_Analyze(benchmark::State& state) {
  const auto n = sizer::parse_netlist(netlist(circuit_name(static_cast<int>(state.range(0)))));
  for (auto _ : state) benchmark::DoNotOptimize(sizer::analyze(n));
  state.SetLabel(circuit_name(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Analyze)->DenseRange(0, 3);

std::pair<std::vector<sizer::UnitPoint>, std::vector<double>> sample(std::size_t n, std::size_t d) {
  sizer::Rng rng(7);
  auto x = sizer::latin_hypercube(n, d, rng);
  std::vector<double> y;
  for (const auto& p : x) {
    double s = 0;
    for (double c : p) s += std::sin(3 * c);
    y.push_back(s);
  }
  return {x, y};
}

void BM_FitSurrogate(benchmark::State& state) {
  const auto [x, y] = sample(static_cast<std::size_t>(state.range(0)), 10);
  for (auto _ : state) {
    sizer::Rng rng(1);
    benchmark::DoNotOptimize(sizer::fit_surrogate(x, y, sizer::GpConfig{}, rng));
  }
}
BENCHMARK(BM_FitSurrogate)->Arg(20)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_ProposeBatch(benchmark::State& state) {
  const auto [x, y] = sample(60, 10);
  sizer::Rng rng(1);
  const auto gp = sizer::fit_surrogate(x, y, sizer::GpConfig{}, rng);
  sizer::OptimizerConfig cfg;
  const auto tr = sizer::make_trust_region(x[0], cfg);
  for (auto _ : state)
    benchmark::DoNotOptimize(sizer::propose_batch(gp, tr, static_cast<std::size_t>(state.range(0)), y[0], x, cfg, rng));
}
BENCHMARK(BM_ProposeBatch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MockEvaluation(benchmark::State& state) {
  auto model = sizer::MockModel::builtin(circuit_name(static_cast<int>(state.range(0))));
  const auto point = model->nominal();
  for (auto _ : state) benchmark::DoNotOptimize(model->run(point));
  state.SetLabel(circuit_name(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_MockEvaluation)->DenseRange(0, 3);

void BM_OptimizeOta(benchmark::State& state) {
  auto model = sizer::MockModel::builtin("ota");
  const auto spec = sizer::load_spec(std::string(SIZER_DATA_DIR) + "/specs/ota.json");
  const sizer::DesignSpace space(model->variables());
  sizer::OptimizerConfig cfg;
  cfg.n_iter = 60;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sizer::optimize(space, spec, *model, nullptr, cfg, seed++));
}
BENCHMARK(BM_OptimizeOta)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
