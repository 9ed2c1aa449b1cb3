#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "mlsgfem/adapt.hpp"
#include "mlsgfem/system.hpp"
#include "oracles.hpp"

using mlsg::BlockVector;
using mlsg::IndexSet;
using mlsg::MultiIndex;
using mlsg::MultilevelSpace;
using mlsg::SpaceKind;

namespace {

MultiIndex mi(std::initializer_list<unsigned> d) { return MultiIndex::from_dense(d); }

struct Fixture {
  mlsg::ProblemData problem;
  mlsg::SpaceHierarchy spaces;
  mlsg::StiffnessCache cache;
  mlsg::FactorCache factors;

  explicit Fixture(mlsg::ProblemData p)
      : problem(std::move(p)), spaces(problem.domain), cache(problem.coefficient, spaces), factors(cache) {}
};

Eigen::MatrixXd operator_matrix(const mlsg::BlockOperator& op) {
  const auto n = op.rows();
  Eigen::MatrixXd a(n, n);
  mlsg::Vector e = mlsg::Vector::Zero(n), y;
  for (Eigen::Index j = 0; j < n; ++j) {
    e.setZero();
    e(j) = 1.0;
    op.apply(e, y);
    a.col(j) = y;
  }
  return a;
}

std::vector<MultilevelSpace> tiny_spaces() {
  return {
      MultilevelSpace(IndexSet({MultiIndex{}, mi({1})}), {2, 2}),
      MultilevelSpace(IndexSet({MultiIndex{}, mi({1}), mi({0, 1}), mi({2})}), {3, 2, 1, 2}),
      MultilevelSpace(IndexSet({MultiIndex{}, mi({1}), mi({0, 1}), mi({1, 1}), mi({2}), mi({0, 2})}),
                      {3, 3, 2, 1, 2, 1}),
  };
}

}  // namespace

TEST_CASE("multilevel space bookkeeping") {
  const MultilevelSpace s(IndexSet({MultiIndex{}, mi({1}), mi({0, 0, 1})}), {4, 3, 2});
  CHECK(s.dof_count() == 225 + 49 + 9);
  CHECK(s.block_offset(2) == 274);
  CHECK(s.active_dimension() == 3);
  CHECK(s.level_of(mi({1})) == 3);
  CHECK(s.level_of(mi({2})) == -1);
  CHECK_THROWS(MultilevelSpace(IndexSet({MultiIndex{}}), {1, 2}));
}

TEST_CASE("single mode operator is the mean stiffness matrix") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
  const MultilevelSpace s(IndexSet({MultiIndex{}}), {3});
  const mlsg::BlockOperator op(s, f.cache);
  const Eigen::MatrixXd a = operator_matrix(op);
  const auto q1 = mlsg::make_space(3, SpaceKind::Q1, f.problem.domain);
  const Eigen::MatrixXd k0(mlsg::assemble_stiffness(q1, q1, f.problem.coefficient->a0()));
  CHECK((a - k0).norm() <= 1e-14 * k0.norm());
  CHECK(op.required_keys().size() == 1);
}

TEST_CASE("block operator equals dense assembly on tiny spaces") {
  for (auto tp : {mlsg::TestProblem::TP1, mlsg::TestProblem::TP2, mlsg::TestProblem::TP3, mlsg::TestProblem::TP4}) {
    Fixture f(mlsg::make_problem(tp));
    for (const auto& s : tiny_spaces()) {
      const mlsg::BlockOperator op(s, f.cache);
      const Eigen::MatrixXd a = operator_matrix(op);
      const Eigen::MatrixXd ref = oracle::block_operator(s, *f.problem.coefficient, f.problem.domain);
      CAPTURE(f.problem.name);
      CHECK((a - ref).norm() <= 1e-12 * ref.norm());
      CHECK((a - a.transpose()).norm() <= 1e-13 * a.norm());
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff() > 0.0);
      // the distinct block count never exceeds the naive bound
      CHECK(op.distinct_blocks().size() <= op.naive_bound());
      CHECK(op.required_keys().size() <= op.distinct_blocks().size());
      for (const auto& k : op.required_keys()) CHECK(k.is_canonical());
    }
  }
}

TEST_CASE("matvec basics") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
  const auto s = tiny_spaces()[1];
  const mlsg::BlockOperator op(s, f.cache);
  BlockVector x(s);
  CHECK(op.apply(x).values().isZero(0.0));
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  BlockVector v(s), w(s);
  for (auto& c : v.values()) c = nd(rng);
  for (auto& c : w.values()) c = nd(rng);
  const double vaw = mlsg::dot(v, op.apply(w));
  const double wav = mlsg::dot(w, op.apply(v));
  CHECK(std::abs(vaw - wav) <= 1e-12 * std::abs(vaw));
  CHECK(mlsg::dot(v, op.apply(v)) > 0.0);
}

TEST_CASE("right-hand side") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP2));
  const MultilevelSpace s(IndexSet({MultiIndex{}, mi({1})}), {3, 2});
  const BlockVector b = mlsg::assemble_rhs(s, f.spaces, f.problem.load);
  const auto q1 = mlsg::make_space(3, SpaceKind::Q1, f.problem.domain);
  CHECK((b.block(0) - mlsg::assemble_load(q1, f.problem.load)).norm() == 0.0);
  CHECK(b.block(1).isZero(0.0));
  CHECK(mlsg::assemble_rhs(s, f.spaces, mlsg::ScalarField()).values().isZero(0.0));
}

TEST_CASE("PCG") {
  SUBCASE("zero rhs") {
    Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
    const auto s = tiny_spaces()[0];
    const mlsg::BlockOperator op(s, f.cache);
    const mlsg::MeanPreconditioner pre(s, f.factors);
    const auto r = mlsg::pcg_solve(op, BlockVector(s), pre, 1e-10, 100);
    CHECK(r.iterations == 0);
    CHECK(r.x.values().isZero(0.0));
  }
  SUBCASE("no parametric terms: one iteration") {
    Fixture f(mlsg::make_custom_problem(1.0, {}, 1.0));
    const auto s = tiny_spaces()[1];
    const mlsg::BlockOperator op(s, f.cache);
    const mlsg::MeanPreconditioner pre(s, f.factors);
    const auto b = mlsg::assemble_rhs(s, f.spaces, f.problem.load);
    const auto r = mlsg::pcg_solve(op, b, pre, 1e-12, 100);
    CHECK(r.iterations <= 1);
  }
  SUBCASE("single-mode Poisson against a dense solve") {
    Fixture f(mlsg::make_custom_problem(1.0, {}, 1.0));
    const MultilevelSpace s(IndexSet({MultiIndex{}}), {2});
    const mlsg::BlockOperator op(s, f.cache);
    const mlsg::MeanPreconditioner pre(s, f.factors);
    const auto b = mlsg::assemble_rhs(s, f.spaces, f.problem.load);
    const auto r = mlsg::pcg_solve(op, b, pre, 1e-12, 100);
    const auto q1 = mlsg::make_space(2, SpaceKind::Q1, f.problem.domain);
    const Eigen::MatrixXd k = oracle::stiffness(q1, q1, mlsg::ScalarField::constant(1.0));
    const Eigen::VectorXd x = k.ldlt().solve(oracle::load(q1, mlsg::ScalarField::constant(1.0)));
    CHECK((r.x.values() - x).norm() <= 1e-10 * x.norm());
  }
  SUBCASE("energy grows with the iteration count and u.b = u.Au") {
    Fixture f(mlsg::make_problem(mlsg::TestProblem::TP2));
    const auto s = tiny_spaces()[2];
    const mlsg::BlockOperator op(s, f.cache);
    const mlsg::MeanPreconditioner pre(s, f.factors);
    const auto b = mlsg::assemble_rhs(s, f.spaces, f.problem.load);
    double prev = 0.0;
    int prev_it = -1;
    for (double tol : {0.5, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10}) {
      const auto r = mlsg::pcg_solve(op, b, pre, tol, 100);
      const double e = mlsg::energy_norm_sq(r.x, b);
      if (r.iterations > prev_it) CHECK(e >= prev - 1e-15);
      prev = e;
      prev_it = r.iterations;
      if (tol == 1e-10) {
        const double uau = mlsg::dot(r.x, op.apply(r.x));
        CHECK(std::abs(uau - e) <= 2e-10 * r.x.values().norm() * b.values().norm());
      }
    }
  }
  SUBCASE("iteration limit") {
    Fixture f(mlsg::make_problem(mlsg::TestProblem::TP2));
    const auto s = tiny_spaces()[2];
    const mlsg::BlockOperator op(s, f.cache);
    const mlsg::MeanPreconditioner pre(s, f.factors);
    const auto b = mlsg::assemble_rhs(s, f.spaces, f.problem.load);
    CHECK_THROWS_AS(mlsg::pcg_solve(op, b, pre, 1e-12, 1), mlsg::SolverError);
  }
}

TEST_CASE("mean preconditioner is linear and equals K0 inverse per block") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
  const MultilevelSpace s(IndexSet({MultiIndex{}, mi({1})}), {3, 3});
  const mlsg::MeanPreconditioner pre(s, f.factors);
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  mlsg::Vector r1(s.dof_count()), r2(s.dof_count()), z1, z2, z12;
  for (auto& c : r1) c = nd(rng);
  for (auto& c : r2) c = nd(rng);
  pre.apply(r1, z1);
  pre.apply(r2, z2);
  pre.apply(r1 + r2, z12);
  CHECK((z12 - z1 - z2).norm() <= 1e-12 * z12.norm());
  const auto q1 = mlsg::make_space(3, SpaceKind::Q1, f.problem.domain);
  const Eigen::MatrixXd k0 = oracle::stiffness(q1, q1, f.problem.coefficient->a0());
  CHECK((k0 * z1.segment(0, 49) - r1.segment(0, 49)).norm() <= 1e-12 * r1.norm());
  CHECK((k0 * z1.segment(49, 49) - r1.segment(49, 49)).norm() <= 1e-12 * r1.norm());
}

TEST_CASE("iterative level solver matches the direct one") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP2));
  mlsg::FactorCache iterative(f.cache, 10);
  const auto& d = f.factors.get(SpaceKind::BrokenQ2, 4);
  const auto& it = iterative.get(SpaceKind::BrokenQ2, 4);
  CHECK(d.direct());
  CHECK_FALSE(it.direct());
  mlsg::Vector b = mlsg::Vector::LinSpaced(mlsg::make_space(4, SpaceKind::BrokenQ2, f.problem.domain).dof_count(), -1, 1);
  mlsg::Vector x1(b.size()), x2(b.size());
  d.solve(b, x1);
  it.solve(b, x2);
  CHECK((x1 - x2).norm() <= 1e-9 * x1.norm());
}

TEST_CASE("stiffness cache: transposes, eviction, counters") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
  const mlsg::BlockKey k{1, SpaceKind::Q1, 3, SpaceKind::Q1, 2};
  const mlsg::BlockKey kt{1, SpaceKind::Q1, 2, SpaceKind::Q1, 3};
  CHECK(kt.canonical() == k);
  const auto m = f.cache.matrix(k);
  mlsg::Vector x = mlsg::Vector::LinSpaced(49, 0, 1), y = mlsg::Vector::Zero(9);
  f.cache.multiply_add(kt, 2.0, x, y);
  CHECK((y - 2.0 * (m->transpose() * x)).norm() <= 1e-14 * y.norm());
  CHECK(f.cache.assembled() == 1);
  CHECK(f.cache.distinct().size() == 1);

  mlsg::StiffnessCache tiny(f.problem.coefficient, f.spaces, 4, 1);  // 1 byte budget
  tiny.matrix(k);
  tiny.matrix({0, SpaceKind::Q1, 3, SpaceKind::Q1, 3});
  CHECK(tiny.resident() == 1);
  tiny.matrix(k);
  CHECK(tiny.assembled() == 3);
  CHECK(tiny.distinct().size() == 2);
}

TEST_CASE("transfer between nested spaces") {
  Fixture f(mlsg::make_problem(mlsg::TestProblem::TP3));
  const MultilevelSpace from(IndexSet({MultiIndex{}, mi({1})}), {2, 2});
  const MultilevelSpace to(IndexSet({MultiIndex{}, mi({1}), mi({0, 1})}), {3, 2, 2});
  BlockVector u(from);
  u.values().setLinSpaced(0.5, 1.5);
  const BlockVector v = mlsg::transfer(u, from, to, f.spaces);
  const auto c = mlsg::make_space(2, SpaceKind::Q1, f.problem.domain);
  const auto fi = mlsg::make_space(3, SpaceKind::Q1, f.problem.domain);
  CHECK((v.block(0) - mlsg::prolongation(c, fi) * u.block(0)).norm() == 0.0);
  CHECK((v.block(1) - u.block(1)).norm() == 0.0);
  CHECK(v.block(2).isZero(0.0));
  CHECK_THROWS(mlsg::transfer(v, to, from, f.spaces));
}
