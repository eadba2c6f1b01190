#include <benchmark/benchmark.h>

#include <random>

#include "gpufair/placer.hpp"
#include "gpufair/policies.hpp"

using namespace gpufair;

namespace {

SpeedupMatrix random_speedups(std::uint64_t seed, int n, int k) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.2);
  Mat rows(n, Vec(k));
  for (auto& row : rows) {
    row[0] = 1;
    for (int j = 1; j < k; ++j) row[j] = row[j - 1] + u(rng);
  }
  return SpeedupMatrix::from_rows(rows);
}

std::vector<double> capacities(int k) { return std::vector<double>(k, 8.0); }

}  // namespace

static void NonCooperativeSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto w = random_speedups(42, n, 10);
  const auto m = capacities(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(allocate_noncooperative(w, m));
  }
  state.SetComplexityN(n);
}
BENCHMARK(NonCooperativeSolve)->Arg(25)->Arg(50)->Arg(100)->Arg(200)->Complexity();

static void CooperativeSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto w = random_speedups(43, n, 10);
  const auto m = capacities(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(allocate_cooperative(w, m));
  }
  state.SetComplexityN(n);
}
BENCHMARK(CooperativeSolve)->Arg(25)->Arg(50)->Arg(100)->Complexity();

static void GavelSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto w = random_speedups(44, n, 10);
  const auto m = capacities(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(allocate_gavel(w, m));
  }
}
BENCHMARK(GavelSolve)->Arg(25)->Arg(100);

static void ShareRounding(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat ideal(n, Vec(3));
  Vec m = {8, 8, 8};
  for (int j = 0; j < 3; ++j) {
    double col = 0;
    for (auto& row : ideal) col += (row[j] = u(rng));
    for (auto& row : ideal) row[j] *= m[j] / col;
  }
  std::vector<std::string> ids;
  for (int l = 0; l < n; ++l) ids.push_back("t" + std::to_string(l));
  const Vec demands(n, 1.0);
  DeviationLedger ledger;
  for (auto _ : state) {
    benchmark::DoNotOptimize(round_shares(ideal, ids, demands, m, ledger));
  }
}
BENCHMARK(ShareRounding)->Arg(8)->Arg(64);

BENCHMARK_MAIN();
