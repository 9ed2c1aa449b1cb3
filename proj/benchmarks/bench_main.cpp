#include <benchmark/benchmark.h>

#include "mlsgfem/adapt.hpp"
#include "mlsgfem/chaos.hpp"
#include "mlsgfem/estimator.hpp"
#include "mlsgfem/fem.hpp"
#include "mlsgfem/system.hpp"

namespace {

using mlsg::IndexSet;
using mlsg::MultiIndex;
using mlsg::MultilevelSpace;

MultiIndex mi(std::initializer_list<unsigned> d) { return MultiIndex::from_dense(d); }

// A space shaped like a mid-run TP3 iterate: the mean on the finest level,
// first-order modes one or two levels below.
MultilevelSpace sample_space(int top) {
  return MultilevelSpace(IndexSet({MultiIndex{}, mi({1}), mi({0, 1}), mi({2}), mi({1, 1}), mi({0, 0, 1})}),
                         {top, top - 1, top - 1, top - 2, top - 2, top - 2});
}

struct Setup {
  mlsg::ProblemData problem = mlsg::make_problem(mlsg::TestProblem::TP3);
  mlsg::SpaceHierarchy spaces{problem.domain};
  mlsg::StiffnessCache cache{problem.coefficient, spaces};
  mlsg::FactorCache factors{cache};
};

}  // namespace

static void Assembly(benchmark::State& state) {
  const auto p = mlsg::make_problem(mlsg::TestProblem::TP3);
  const auto fine = mlsg::make_space(static_cast<int>(state.range(0)), mlsg::SpaceKind::Q1, p.domain);
  const auto coarse = mlsg::make_space(static_cast<int>(state.range(0)) - 1, mlsg::SpaceKind::Q1, p.domain);
  const auto& a1 = p.coefficient->field(1);
  for (auto _ : state) {
    auto k = mlsg::assemble_stiffness(fine, coarse, a1);
    benchmark::DoNotOptimize(k.valuePtr());
  }
  state.SetComplexityN(fine.dof_count());
}
BENCHMARK(Assembly)->DenseRange(5, 8)->Unit(benchmark::kMillisecond)->Complexity();

static void CouplingMatrix(benchmark::State& state) {
  std::vector<MultiIndex> all;
  for (unsigned a = 0; a <= 4; ++a)
    for (unsigned b = 0; a + b <= 4; ++b)
      for (unsigned c = 0; a + b + c <= 4; ++c) all.push_back(mi({a, b, c}));
  const IndexSet s = IndexSet::sorted(all);
  for (auto _ : state) {
    auto g = mlsg::build_coupling(2, s, s);
    benchmark::DoNotOptimize(g.entries.data());
  }
}
BENCHMARK(CouplingMatrix);

static void Matvec(benchmark::State& state) {
  Setup s;
  const auto space = sample_space(static_cast<int>(state.range(0)));
  const mlsg::BlockOperator op(space, s.cache);
  const mlsg::Vector x = mlsg::Vector::Ones(op.rows());
  mlsg::Vector y;
  op.apply(x, y);  // assemble outside the timed loop
  for (auto _ : state) {
    op.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(op.rows());
}
BENCHMARK(Matvec)->DenseRange(5, 8)->Unit(benchmark::kMillisecond)->Complexity();

static void Preconditioner(benchmark::State& state) {
  Setup s;
  const auto space = sample_space(static_cast<int>(state.range(0)));
  const mlsg::MeanPreconditioner pre(space, s.factors);
  const mlsg::Vector r = mlsg::Vector::Ones(space.dof_count());
  mlsg::Vector z;
  pre.apply(r, z);
  for (auto _ : state) {
    pre.apply(r, z);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetComplexityN(space.dof_count());
}
BENCHMARK(Preconditioner)->DenseRange(5, 8)->Unit(benchmark::kMillisecond)->Complexity();

static void Estimator(benchmark::State& state) {
  Setup s;
  const auto space = sample_space(static_cast<int>(state.range(0)));
  const mlsg::BlockOperator op(space, s.cache);
  const mlsg::MeanPreconditioner pre(space, s.factors);
  const auto u = mlsg::pcg_solve(op, mlsg::assemble_rhs(space, s.spaces, s.problem.load), pre, 1e-10, 200).x;
  mlsg::EstimatorContext ctx{s.cache, s.factors, s.problem.load};
  mlsg::estimate_components(u, space, 5, ctx);
  for (auto _ : state) {
    auto c = mlsg::estimate_components(u, space, 5, ctx);
    benchmark::DoNotOptimize(c.spatial.data());
  }
}
BENCHMARK(Estimator)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);

static void AdaptiveRun(benchmark::State& state) {
  const auto p = mlsg::make_problem(mlsg::TestProblem::TP3);
  mlsg::AdaptiveConfig cfg;
  cfg.tolerance = 4.5e-3;
  cfg.version = static_cast<int>(state.range(0));
  cfg.record_timings = false;
  for (auto _ : state) {
    auto r = mlsg::adaptive_solve(p, cfg);
    benchmark::DoNotOptimize(r.steps.data());
  }
}
BENCHMARK(AdaptiveRun)->Arg(1)->Arg(2)->Unit(benchmark::kSecond)->Iterations(1);

BENCHMARK_MAIN();
