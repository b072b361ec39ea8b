// Microbenchmarks for the hot paths: scalar threshold evaluation, operator
// applications, single iteration steps, and the small-scale exact tools.
// Sizes mirror the bundled CLI defaults so the numbers map onto real runs.

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "freedisc/operators.hpp"
#include "freedisc/oracle.hpp"
#include "freedisc/solver.hpp"
#include "freedisc/threshold.hpp"

using namespace freedisc;

namespace {

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

Problem dense_instance(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix T(n, n);
  for (Eigen::Index i = 0; i < T.size(); ++i) T(i) = dist(rng);
  Eigen::JacobiSVD<Matrix> svd(T);
  T *= 0.85 / svd.singularValues()[0];
  Vector g = random_vector(n, seed + 1);
  return make_problem(ForwardModel(T, g), ThresholdSpec{2.0, 1.0, 1.0});
}

void threshold_map(benchmark::State& state, double p) {
  const ThresholdMap map(ThresholdSpec{p, 1.0, 1.0});
  const Vector lam = random_vector(256, 11);
  for (auto _ : state) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) acc += map(lam[i]);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * lam.size());
}

void bench_threshold_p1(benchmark::State& s) { threshold_map(s, 1.0); }
void bench_threshold_p15(benchmark::State& s) { threshold_map(s, 1.5); }
void bench_threshold_p2(benchmark::State& s) { threshold_map(s, 2.0); }
void bench_threshold_generic(benchmark::State& s) { threshold_map(s, 2.3); }

// tabulated lookup for a p whose inverse needs Newton steps
void bench_threshold_curve(benchmark::State& state) {
  const ThresholdCurve curve(ThresholdSpec{2.3, 1.0, 1.0});
  const Vector lam = random_vector(256, 11);
  for (auto _ : state) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) acc += curve(lam[i]);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * lam.size());
}

void bench_pinv_1d(benchmark::State& state) {
  const auto op = build_gradient_1d(static_cast<int>(state.range(0)));
  const Vector z = random_vector(op.n - 1, 3);
  for (auto _ : state) {
    Vector u = op.pinv * z;
    benchmark::DoNotOptimize(u.data());
  }
}

void bench_project_2d(benchmark::State& state) {
  const auto op = build_gradient_2d(static_cast<int>(state.range(0)));
  const Vector z = random_vector(op->deriv_size(), 5);
  for (auto _ : state) {
    Vector pz = op->project(z);
    benchmark::DoNotOptimize(pz.data());
  }
}

void bench_iterate_step(benchmark::State& state) {
  const auto prob = dense_instance(static_cast<int>(state.range(0)), 17);
  const Vector u0 = random_vector(prob.model.cols(), 19);
  IterationConfig cfg;
  cfg.max_iters = 1;
  cfg.step_tol = 0.0;
  cfg.record_objective = false;
  for (auto _ : state) {
    const auto tr = iterate_unconstrained(prob, u0, cfg);
    benchmark::DoNotOptimize(tr.final_iterate.data());
  }
}

void bench_projected_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto op = build_gradient_2d(n);
  const Vector samples = random_vector(op->image_size(), 23);
  auto prob = make_problem(ForwardModel::reduced_2d(op, samples),
                           ThresholdSpec{2.0, 5.0, 0.005}, op);
  const Vector z0 = op->forward(samples);
  IterationConfig cfg;
  cfg.max_iters = 1;
  cfg.step_tol = 0.0;
  cfg.record_objective = false;
  for (auto _ : state) {
    const auto tr = iterate_projected(prob, z0, cfg);
    benchmark::DoNotOptimize(tr.final_iterate.data());
  }
}

void bench_oracle(benchmark::State& state) {
  const auto prob = dense_instance(static_cast<int>(state.range(0)), 29);
  for (auto _ : state) {
    const auto res = global_min_enumerate(prob);
    benchmark::DoNotOptimize(res.value);
  }
}

void bench_basin(benchmark::State& state) {
  const auto prob = dense_instance(2, 31);
  IterationConfig cfg;
  cfg.max_iters = 20000;
  cfg.step_tol = 1e-9;
  cfg.record_objective = false;
  for (auto _ : state) {
    const auto map =
        basin_map(prob, {-6.0, 6.0, -6.0, 6.0}, 41, cfg, 1);
    benchmark::DoNotOptimize(map.equilibria.size());
  }
}

BENCHMARK(bench_threshold_p1);
BENCHMARK(bench_threshold_p15);
BENCHMARK(bench_threshold_p2);
BENCHMARK(bench_threshold_generic);
BENCHMARK(bench_threshold_curve);
BENCHMARK(bench_pinv_1d)->Arg(256)->Arg(1024);
BENCHMARK(bench_project_2d)->Arg(40)->Arg(80);
BENCHMARK(bench_iterate_step)->Arg(64)->Arg(256);
BENCHMARK(bench_projected_step)->Arg(40)->Arg(80);
BENCHMARK(bench_oracle)->Arg(8)->Arg(12);
BENCHMARK(bench_basin);

}  // namespace

BENCHMARK_MAIN();
