#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vard/datakit.hpp"
#include "vard/modelselect.hpp"
#include "vard/simbench.hpp"
#include "vard/solver.hpp"

namespace {

using namespace vard;

struct Block {
  double alpha = 1.0;
  std::vector<double> eta, v;
};

Block random_block(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> decade(-3.0, 3.0);
  Block b;
  b.alpha = std::pow(10.0, decade(rng));
  for (int k = 0; k < d; ++k) {
    b.eta.push_back(std::pow(10.0, decade(rng)));
    b.v.push_back(std::pow(10.0, decade(rng)));
  }
  return b;
}

datakit::Design experiment_design(int experiment, std::uint64_t seed) {
  const auto spec = simbench::catalog(experiment, 1, seed);
  return datakit::build_design(simbench::to_dataset(simbench::generate(spec), spec.knot_count));
}

void BM_MinimizeG(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::vector<Block> blocks;
  for (int i = 0; i < 64; ++i) blocks.push_back(random_block(rng, static_cast<int>(state.range(0))));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& b = blocks[i++ % blocks.size()];
    benchmark::DoNotOptimize(solver::minimize_G(b.alpha, b.eta, b.v, 1000));
  }
}
BENCHMARK(BM_MinimizeG)->Arg(1)->Arg(4)->Arg(8)->Arg(23);

void BM_Sweep(benchmark::State& state) {
  const auto design = experiment_design(static_cast<int>(state.range(0)), 1);
  solver::FitConfig config;
  config.alpha = 0.01 * solver::alpha_max(design.problem.terms, design.problem.y);
  for (auto _ : state) {
    auto fit_state = solver::initial_state(design.problem);
    solver::sweep(fit_state, design.problem, config);
    benchmark::DoNotOptimize(fit_state.residual.data());
  }
}
BENCHMARK(BM_Sweep)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_Path(benchmark::State& state) {
  const auto design = experiment_design(static_cast<int>(state.range(0)), 1);
  const auto grid = modelselect::make_alpha_grid(design.problem);
  for (auto _ : state) {
    benchmark::DoNotOptimize(modelselect::path_fit(design.problem, grid, solver::FitConfig{}));
  }
}
BENCHMARK(BM_Path)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
