// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>

#include "cfmdd/ad/ops.hpp"
#include "cfmdd/baselines.hpp"
#include "cfmdd/dataset.hpp"
#include "cfmdd/mc_oracle.hpp"
#include "cfmdd/runner.hpp"

namespace {

using namespace cfmdd;

ad::Tensor random_matrix(std::size_t r, std::size_t c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  ad::Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

NetworkConfig small_config() {
  NetworkConfig c;
  c.L = 6;
  c.D = 2;
  c.N = 4;
  c.M = 4;
  c.Mbar = 2;
  return c;
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(instance_seed(99, i));
  return s;
}

void BM_Gemm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
  for (auto _ : st) benchmark::DoNotOptimize(ad::kernels::gemm(a, b));
}
void BM_GemmSerial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
  for (auto _ : st) benchmark::DoNotOptimize(ad::kernels::gemm_serial(a, b));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(512);
BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(512);

void BM_Oracle(benchmark::State& st, bool parallel) {
  NetworkConfig c;
  c.L = 2;
  c.D = 2;
  c.N = 2;
  c.M = 2;
  c.Mbar = 1;
  c.U = 3;
  const auto inst = make_instance(c, 5);
  const auto bf = zf_beamformers(inst.channels, c);
  const auto pa = greedy_unfair(inst.gains, c);
  for (auto _ : st) {
    benchmark::DoNotOptimize(parallel ? mc_interference_oracle(inst.channels, bf, pa, c, 8192, 1)
                                      : mc_interference_oracle_serial(inst.channels, bf, pa, c,
                                                                      8192, 1));
  }
}
BENCHMARK_CAPTURE(BM_Oracle, parallel, true);
BENCHMARK_CAPTURE(BM_Oracle, serial, false);

void BM_Generate(benchmark::State& st, bool parallel) {
  const auto c = small_config();
  const auto s = seeds(32);
  for (auto _ : st) {
    benchmark::DoNotOptimize(parallel ? generate_instances(c, s) : generate_instances_serial(c, s));
  }
}
BENCHMARK_CAPTURE(BM_Generate, parallel, true);
BENCHMARK_CAPTURE(BM_Generate, serial, false);

void BM_SolveQtSca(benchmark::State& st, bool parallel) {
  const auto c = small_config();
  const auto inst = generate_instances(c, seeds(8));
  const RunOptions opt;
  for (auto _ : st) {
    benchmark::DoNotOptimize(parallel ? solve_all(inst, c, Method::kQtSca, opt)
                                      : solve_all_serial(inst, c, Method::kQtSca, opt));
  }
}
BENCHMARK_CAPTURE(BM_SolveQtSca, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SolveQtSca, serial, false)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
