// Serial reference against OpenMP kernels. Run with OMP_NUM_THREADS set to
// compare; argument 0 of each benchmark selects serial (0) or parallel (1).

#include <benchmark/benchmark.h>

#include <map>

#include "strang/dg.hpp"
#include "strang/fv.hpp"
#include "strang/vem.hpp"

using namespace strang;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

const DiscreteScheme& poisson_system(std::size_t n) {
  static std::map<std::size_t, DiscreteScheme> cache;
  static std::map<std::size_t, ManufacturedCase> cases;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const ManufacturedCase& c = cases.emplace(n, case_smooth_sine()).first->second;
  auto mesh = std::make_shared<const Mesh>(build_cartesian(n, n));
  return cache.emplace(n, assemble_vem(mesh, 1, c)).first->second;
}

void BM_spmv(benchmark::State& state) {
  const DiscreteScheme& s = poisson_system(std::size_t(state.range(1)));
  const VectorXd x = VectorXd::Ones(static_cast<Eigen::Index>(s.ndof()));
  VectorXd y(x.size());
  for (auto _ : state) {
    kernels::spmv(s.A, x, y, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(s.A.nnz()));
}

void BM_dot(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(1));
  const VectorXd a = VectorXd::LinSpaced(n, 0.0, 1.0), b = VectorXd::Ones(n);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dot(a, b, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_pcg(benchmark::State& state) {
  const DiscreteScheme& s = poisson_system(std::size_t(state.range(1)));
  CgOptions opts;
  opts.rel_tol = 1e-10;
  opts.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve_spd(s.A, s.b, opts));
}

void BM_hmm_fluxes(benchmark::State& state) {
  const Mesh mesh = perturb(build_cartesian(std::size_t(state.range(1)), std::size_t(state.range(1))), 0.2, 1);
  const DiffusionField field(make_tensor(2.0, 0.3, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(hmm_fluxes(mesh, field, 1.0, exec_of(state)));
}

void BM_mpfa_fluxes(benchmark::State& state) {
  const Mesh mesh = perturb(build_cartesian(std::size_t(state.range(1)), std::size_t(state.range(1))), 0.2, 1);
  const DiffusionField field(make_tensor(2.0, 0.3, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(mpfa_fluxes(mesh, field, MpfaStrategy::l_proxy, exec_of(state)));
}

void BM_vem2_assembly(benchmark::State& state) {
  auto mesh = std::make_shared<const Mesh>(perturb(build_cartesian(std::size_t(state.range(1)), std::size_t(state.range(1))), 0.2, 1));
  const ManufacturedCase c = case_smooth_sine();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_vem(mesh, 2, c, exec_of(state)));
}

void BM_dg2_assembly(benchmark::State& state) {
  auto mesh = std::make_shared<const Mesh>(build_cartesian(std::size_t(state.range(1)), std::size_t(state.range(1))));
  const ManufacturedCase c = case_smooth_sine();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_swip(mesh, 2, kDefaultPenalty, c, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_spmv)->ArgsProduct({{0, 1}, {64, 256}});
BENCHMARK(BM_dot)->ArgsProduct({{0, 1}, {1 << 16, 1 << 20}});
BENCHMARK(BM_pcg)->ArgsProduct({{0, 1}, {64}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_hmm_fluxes)->ArgsProduct({{0, 1}, {64}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mpfa_fluxes)->ArgsProduct({{0, 1}, {64}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_vem2_assembly)->ArgsProduct({{0, 1}, {32}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dg2_assembly)->ArgsProduct({{0, 1}, {32}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
