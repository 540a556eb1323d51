#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <vector>

#include "psched/pmf.hpp"

namespace {

using psched::Pmf;
using psched::Time;

Pmf random_pmf(std::mt19937_64& rng, int n, Time span) {
  std::uniform_int_distribution<Time> times(0, span);
  std::uniform_real_distribution<double> probs(0.05, 1.0);
  std::map<Time, double> picked;
  while (static_cast<int>(picked.size()) < n) picked[times(rng)] = probs(rng);
  double w = 0.0;
  for (const auto& [t, p] : picked) w += p;
  std::vector<std::pair<Time, double>> pairs;
  for (const auto& [t, p] : picked) pairs.emplace_back(t, p / w);
  return Pmf::from_pairs(pairs);
}

void BM_ConvolveNoDrop(benchmark::State& state) {
  std::mt19937_64 rng(42);
  const int n = static_cast<int>(state.range(0));
  const Pmf a = random_pmf(rng, n, 4 * n);
  const Pmf b = random_pmf(rng, n, 4 * n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(convolve_no_drop(a, b));
  }
}
BENCHMARK(BM_ConvolveNoDrop)->Arg(32)->Arg(128)->Arg(512);

void BM_ConvolveEvictDrop(benchmark::State& state) {
  std::mt19937_64 rng(43);
  const int n = static_cast<int>(state.range(0));
  const Pmf a = random_pmf(rng, n, 4 * n);
  const Pmf b = random_pmf(rng, n, 4 * n);
  const Time deadline = 3 * n;
  for (auto _ : state) {
    benchmark::DoNotOptimize(convolve_evict_drop(a, b, deadline));
  }
}
BENCHMARK(BM_ConvolveEvictDrop)->Arg(32)->Arg(128)->Arg(512);

void BM_SuccessChanceNaive(benchmark::State& state) {
  std::mt19937_64 rng(44);
  const int n = static_cast<int>(state.range(0));
  const Pmf pet = random_pmf(rng, n, 4 * n);
  const Pmf tail = random_pmf(rng, n, 8 * n);
  const Time deadline = 6 * n;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        success_chance(convolve_no_drop(tail, pet), deadline));
  }
}
BENCHMARK(BM_SuccessChanceNaive)->Arg(32)->Arg(128)->Arg(512);

void BM_SuccessChanceStreaming(benchmark::State& state) {
  std::mt19937_64 rng(44);
  const int n = static_cast<int>(state.range(0));
  const Pmf pet = random_pmf(rng, n, 4 * n);
  const Pmf tail = random_pmf(rng, n, 8 * n);
  const Time deadline = 6 * n;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fast_success_chance(pet, tail, deadline));
  }
}
BENCHMARK(BM_SuccessChanceStreaming)->Arg(32)->Arg(128)->Arg(512);

void BM_Compact(benchmark::State& state) {
  std::mt19937_64 rng(45);
  const Pmf p = random_pmf(rng, 2000, 20000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compact(p, 160, 0, 20000));
  }
}
BENCHMARK(BM_Compact);

}  // namespace

BENCHMARK_MAIN();
