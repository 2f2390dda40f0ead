// Microbenchmarks for the hot paths: structured operator application,
// prox evaluations, and full solver steps.

#include <benchmark/benchmark.h>

#include "pdsplit/bench.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/solvers.hpp"

using namespace pdsplit;

namespace {

Vector random_vector(RngStream& rs, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rs.normal();
  return v;
}

void bm_first_difference_apply(benchmark::State& state) {
  const Index p = state.range(0);
  LinOp op = LinOp::first_difference(p);
  RngStream rs(1, 0);
  Vector x = random_vector(rs, p);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
  state.SetItemsProcessed(state.iterations() * p);
}
BENCHMARK(bm_first_difference_apply)->Arg(256)->Arg(2048);

void bm_first_difference_vs_dense(benchmark::State& state) {
  const Index p = state.range(0);
  LinOp op = LinOp::dense(LinOp::first_difference(p).to_dense());
  RngStream rs(1, 0);
  Vector x = random_vector(rs, p);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
  state.SetItemsProcessed(state.iterations() * p);
}
BENCHMARK(bm_first_difference_vs_dense)->Arg(256)->Arg(2048);

void bm_group_selector_adjoint(benchmark::State& state) {
  const Index g = 24;  // 576 pixels, one neighborhood group each
  bench::GroupLassoLogisticParams prm;
  prm.n = 4;
  prm.grid = g;
  bench::BenchProblem prob = bench::generate_group_lasso_logistic(prm);
  RngStream rs(2, 0);
  Vector y = random_vector(rs, prob.spec.dual_dim());
  for (auto _ : state) benchmark::DoNotOptimize(prob.spec.L.adjoint(y));
}
BENCHMARK(bm_group_selector_adjoint);

void bm_prox_l1(benchmark::State& state) {
  const Index p = state.range(0);
  ProxFn g = ProxFn::l1(0.3);
  RngStream rs(3, 0);
  Vector v = random_vector(rs, p);
  for (auto _ : state) benchmark::DoNotOptimize(g.prox(v, 0.7));
  state.SetItemsProcessed(state.iterations() * p);
}
BENCHMARK(bm_prox_l1)->Arg(256)->Arg(4096);

void bm_prox_group_l2(benchmark::State& state) {
  const Index blocks = state.range(0);
  ProxFn g = ProxFn::l2_norm_sum(std::vector<Index>(blocks, 8), 0.4);
  RngStream rs(4, 0);
  Vector v = random_vector(rs, blocks * 8);
  for (auto _ : state) benchmark::DoNotOptimize(g.prox(v, 0.7));
}
BENCHMARK(bm_prox_group_l2)->Arg(64)->Arg(512);

void bm_pd3o_step_fused_lasso(benchmark::State& state) {
  bench::FusedLassoParams prm;
  prm.p = state.range(0);
  prm.n = 2 * prm.p;
  bench::BenchProblem prob = bench::generate_fused_lasso(prm);
  auto [gamma, tau] = default_stepsizes(prob.spec, {});
  Estimator est = Estimator::full();
  est.init(prob.spec.F, Vector::Zero(prob.spec.primal_dim()));
  Pd3oState st = make_pd3o_state(prob.spec,
                                 Vector::Zero(prob.spec.primal_dim()),
                                 Vector::Zero(prob.spec.dual_dim()), gamma,
                                 tau);
  for (auto _ : state) {
    pd3o_step(prob.spec, est, st);
    benchmark::DoNotOptimize(st.p.data());
  }
}
BENCHMARK(bm_pd3o_step_fused_lasso)->Arg(64)->Arg(256);

void bm_pddy_step_saga(benchmark::State& state) {
  bench::FusedLassoParams prm;
  prm.p = 128;
  prm.n = 256;
  bench::BenchProblem prob = bench::generate_fused_lasso(prm);
  auto [gamma, tau] = default_stepsizes(prob.spec, {});
  Estimator est = Estimator::saga(1);
  est.init(prob.spec.F, Vector::Zero(prob.spec.primal_dim()));
  PddyState st = make_pddy_state(prob.spec,
                                 Vector::Zero(prob.spec.primal_dim()),
                                 Vector::Zero(prob.spec.dual_dim()), gamma,
                                 tau);
  for (auto _ : state) {
    pddy_step(prob.spec, est, st);
    benchmark::DoNotOptimize(st.p.data());
  }
}
BENCHMARK(bm_pddy_step_saga);

void bm_destroy_round(benchmark::State& state) {
  bench::DecentralizedQuadraticParams prm;
  prm.nodes = state.range(0);
  prm.dim = 8;
  bench::BenchProblem prob = bench::generate_decentralized_quadratic(prm);
  std::vector<Estimator> ests;
  std::vector<Vector> x0, a0;
  for (Index i = 0; i < prm.nodes; ++i) {
    ests.push_back(Estimator::full());
    x0.push_back(Vector::Zero(prm.dim));
    a0.push_back(Vector::Zero(prm.dim));
  }
  double nu = 0.0;
  for (const auto& f : prob.local_fns) nu = std::max(nu, f.nu());
  const double gamma = 0.5 / nu;
  const double tau = 0.9 / (gamma * prob.spec.spectral.op_norm_sq);
  DestroyState st = make_destroy_state(prob.what, x0, a0, gamma, tau);
  for (auto _ : state) {
    destroy_step(prob.local_fns, ests, st);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(bm_destroy_round)->Arg(10)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
