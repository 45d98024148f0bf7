#include <benchmark/benchmark.h>

#include <random>

#include "ubrs/cli.hpp"
#include "ubrs/relax.hpp"
#include "ubrs/sim.hpp"

namespace {

std::string models_dir() { return UBRS_MODELS_DIR; }

void BM_PolynomialMul(benchmark::State& state) {
  auto vs = ubrs::make_varspace({"x", "y", "z"});
  std::mt19937_64 rng(1);
  ubrs::Polynomial p(vs), q(vs);
  std::vector<int> vars{0, 1, 2};
  for (const ubrs::Monomial& m : ubrs::monomial_basis(vars, state.range(0))) {
    p.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
    q.add_term(m, (rng() % 2000) / 1000.0 - 1.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ubrs::mul(p, q));
}
BENCHMARK(BM_PolynomialMul)->Arg(4)->Arg(8);

void BM_MonomialBasis(benchmark::State& state) {
  std::vector<int> vars{0, 1, 2, 3};
  for (auto _ : state) benchmark::DoNotOptimize(ubrs::monomial_basis(vars, state.range(0)));
}
BENCHMARK(BM_MonomialBasis)->Arg(6)->Arg(10);

void BM_BuildOuterEx1(benchmark::State& state) {
  ubrs::HybridModel m = ubrs::load_model_file(models_dir() + "/ex1_linear.json");
  ubrs::RelaxOptions opts;
  opts.degree = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ubrs::build_outer(m, opts));
}
BENCHMARK(BM_BuildOuterEx1)->Arg(4)->Arg(8);

void BM_SolveEx1(benchmark::State& state) {
  ubrs::HybridModel m = ubrs::load_model_file(models_dir() + "/ex1_linear.json");
  ubrs::RelaxOptions opts;
  opts.degree = static_cast<int>(state.range(0));
  ubrs::BuildResult b = ubrs::build_outer(m, opts);
  ubrs::SdpConversion conv = ubrs::to_standard_form(b.problem);
  for (auto _ : state) benchmark::DoNotOptimize(ubrs::solve(conv.form));
}
BENCHMARK(BM_SolveEx1)->Arg(4)->Arg(6);

void BM_ExecuteRimless(benchmark::State& state) {
  ubrs::HybridModel m = ubrs::load_model_file(models_dir() + "/rimless_wheel.json");
  std::vector<double> x0{0.0, 0.52};
  uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ubrs::execute(m, 1, x0, seed++));
  }
}
BENCHMARK(BM_ExecuteRimless);

}  // namespace

BENCHMARK_MAIN();
