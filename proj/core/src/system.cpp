#include "mlsgfem/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/CholmodSupport>
#include <Eigen/IterativeLinearSolvers>

namespace mlsg {

SpaceHierarchy::SpaceHierarchy(Square domain, int max_level) : domain_(domain), max_level_(max_level) {}

const FeSpace& SpaceHierarchy::get(int level, SpaceKind kind) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(level, static_cast<int>(kind));
  auto it = spaces_.find(key);
  if (it == spaces_.end())
    it = spaces_.emplace(key, make_space(level, kind, domain_, Boundary::Eliminate, max_level_)).first;
  return it->second;
}

MultilevelSpace::MultilevelSpace(IndexSet indices, std::vector<int> levels)
    : indices_(std::move(indices)), levels_(std::move(levels)) {
  if (indices_.size() != levels_.size()) throw std::invalid_argument("one level per multi-index required");
  offsets_.assign(1, 0);
  offsets_.reserve(levels_.size() + 1);
  for (int l : levels_) {
    if (l < 1) throw std::invalid_argument("mesh levels must be >= 1");
    offsets_.push_back(offsets_.back() + q1_dofs(l));
  }
  active_dim_ = mlsg::active_dimension(indices_);
}

int MultilevelSpace::level_of(const MultiIndex& mu) const {
  const auto i = indices_.find(mu);
  return i < 0 ? -1 : levels_[static_cast<std::size_t>(i)];
}

BlockVector::BlockVector(const MultilevelSpace& space)
    : values_(Vector::Zero(space.dof_count())), offsets_(space.size() + 1) {
  for (std::size_t i = 0; i < space.size(); ++i) offsets_[i] = space.block_offset(i);
  offsets_.back() = space.dof_count();
}

bool BlockVector::conforms(const MultilevelSpace& space) const {
  if (blocks() != space.size() || values_.size() != space.dof_count()) return false;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (offsets_[i] != space.block_offset(i)) return false;
  return true;
}

double dot(const BlockVector& a, const BlockVector& b) { return a.values().dot(b.values()); }

BlockKey BlockKey::canonical() const {
  if (is_canonical()) return *this;
  return {m, trial_kind, trial_level, test_kind, test_level};
}

StiffnessCache::StiffnessCache(std::shared_ptr<const AffineCoefficient> coefficient, SpaceHierarchy& spaces,
                               int quad_order, std::size_t byte_budget)
    : coefficient_(std::move(coefficient)), spaces_(spaces), quad_order_(quad_order), byte_budget_(byte_budget) {}

std::shared_ptr<const SparseMatrix> StiffnessCache::matrix(const BlockKey& key) {
  const BlockKey k = key.canonical();
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(k);
    if (it != entries_.end()) {
      it->second.stamp = ++clock_;
      return it->second.matrix;
    }
  }
  const FeSpace& test = spaces_.get(k.test_level, k.test_kind);
  const FeSpace& trial = spaces_.get(k.trial_level, k.trial_kind);
  auto mat = std::make_shared<const SparseMatrix>(
      assemble_stiffness(test, trial, coefficient_->field(k.m), quad_order_));
  const std::size_t bytes = static_cast<std::size_t>(mat->nonZeros()) * (sizeof(double) + sizeof(int)) +
                            static_cast<std::size_t>(mat->outerSize() + 1) * sizeof(int);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.try_emplace(k, Entry{mat, bytes, ++clock_});
  if (inserted) {
    bytes_ += bytes;
    ++assembled_;
    distinct_.insert(k);
    evict(k);
  }
  return it->second.matrix;
}

void StiffnessCache::evict(const BlockKey& keep) {
  while (bytes_ > byte_budget_ && entries_.size() > 1) {
    auto victim = entries_.end();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->first == keep) continue;
      if (victim == entries_.end() || it->second.stamp < victim->second.stamp) victim = it;
    }
    if (victim == entries_.end()) return;
    bytes_ -= victim->second.bytes;
    entries_.erase(victim);
  }
}

void StiffnessCache::multiply_add(const BlockKey& key, double alpha, const Eigen::Ref<const Vector>& x,
                                  Eigen::Ref<Vector> y) {
  const auto k = matrix(key);
  if (key.is_canonical())
    y.noalias() += alpha * (*k) * x;
  else
    y.noalias() += alpha * k->transpose() * x;
}

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

class CholeskySolver final : public LevelSolver {
 public:
  explicit CholeskySolver(const SparseMatrix& a) {
    ColMatrix lower = ColMatrix(a).triangularView<Eigen::Lower>();
    llt_.compute(lower);
    if (llt_.info() != Eigen::Success) throw SolverError("sparse Cholesky factorization failed");
  }
  void solve(const Eigen::Ref<const Vector>& b, Eigen::Ref<Vector> x) const override {
    x = llt_.solve(Vector(b));
  }
  bool direct() const override { return true; }

 private:
  Eigen::CholmodSimplicialLLT<ColMatrix, Eigen::Lower> llt_;
};

class JacobiCgSolver final : public LevelSolver {
 public:
  JacobiCgSolver(std::shared_ptr<const SparseMatrix> a, double tol) : a_(std::move(a)) {
    cg_.setTolerance(tol);
    cg_.setMaxIterations(10 * static_cast<int>(std::sqrt(static_cast<double>(a_->rows()))) + 1000);
    cg_.compute(*a_);
  }
  void solve(const Eigen::Ref<const Vector>& b, Eigen::Ref<Vector> x) const override {
    x = cg_.solve(Vector(b));
    if (cg_.info() != Eigen::Success) throw SolverError("diagonally preconditioned CG did not converge");
  }
  bool direct() const override { return false; }

 private:
  std::shared_ptr<const SparseMatrix> a_;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

}  // namespace

FactorCache::FactorCache(StiffnessCache& stiffness, std::ptrdiff_t direct_limit, double iterative_tol)
    : stiffness_(stiffness), direct_limit_(direct_limit), iterative_tol_(iterative_tol) {}

const LevelSolver& FactorCache::get(SpaceKind kind, int level) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(level, static_cast<int>(kind));
  auto it = solvers_.find(key);
  if (it != solvers_.end()) return *it->second;
  auto a = stiffness_.matrix({0, kind, level, kind, level});
  std::unique_ptr<LevelSolver> s;
  if (a->rows() <= direct_limit_)
    s = std::make_unique<CholeskySolver>(*a);
  else
    s = std::make_unique<JacobiCgSolver>(a, iterative_tol_);
  return *solvers_.emplace(key, std::move(s)).first->second;
}

BlockOperator::BlockOperator(const MultilevelSpace& space, StiffnessCache& cache)
    : space_(space), cache_(cache), terms_(space.active_dimension()) {
  const IndexSet& jp = space_.indices();
  for (std::uint32_t m = 0; m <= terms_; ++m) {
    const CouplingMatrix g = build_coupling(m, jp, jp);
    for (const auto& e : g.entries) couplings_.push_back({e.row, e.col, m, e.value});
  }
  std::stable_sort(couplings_.begin(), couplings_.end(), [](const Coupling& a, const Coupling& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.m < b.m;
  });
}

void BlockOperator::apply(const Vector& x, Vector& y) const {
  if (x.size() != rows()) throw std::invalid_argument("BlockOperator::apply: shape mismatch");
  y.setZero(rows());
  for (const auto& c : couplings_) {
    const BlockKey key{c.m, SpaceKind::Q1, space_.level(c.row), SpaceKind::Q1, space_.level(c.col)};
    cache_.multiply_add(key, c.g, x.segment(space_.block_offset(c.col), space_.block_size(c.col)),
                        y.segment(space_.block_offset(c.row), space_.block_size(c.row)));
  }
}

BlockVector BlockOperator::apply(const BlockVector& x) const {
  if (!x.conforms(space_)) throw std::invalid_argument("BlockOperator::apply: vector does not conform");
  BlockVector y(space_);
  apply(x.values(), y.values());
  return y;
}

std::set<BlockKey> BlockOperator::required_keys() const {
  std::set<BlockKey> keys;
  for (const auto& c : couplings_)
    keys.insert(BlockKey{c.m, SpaceKind::Q1, space_.level(c.row), SpaceKind::Q1, space_.level(c.col)}.canonical());
  return keys;
}

std::set<BlockKey> BlockOperator::distinct_blocks() const {
  std::set<BlockKey> keys;
  for (const auto& c : couplings_)
    keys.insert(BlockKey{c.m, SpaceKind::Q1, space_.level(c.row), SpaceKind::Q1, space_.level(c.col)});
  return keys;
}

MeanPreconditioner::MeanPreconditioner(const MultilevelSpace& space, FactorCache& factors) : space_(space) {
  blocks_.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) blocks_.push_back(&factors.get(SpaceKind::Q1, space.level(i)));
}

void MeanPreconditioner::apply(const Vector& r, Vector& z) const {
  z.resize(r.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto off = space_.block_offset(i);
    const auto n = space_.block_size(i);
    blocks_[i]->solve(r.segment(off, n), z.segment(off, n));
  }
}

PcgResult pcg_solve(const BlockOperator& op, const BlockVector& rhs, const MeanPreconditioner& precond,
                    double rel_tol, int max_iter, const BlockVector* x0) {
  const MultilevelSpace& space = op.space();
  if (!rhs.conforms(space)) throw std::invalid_argument("pcg_solve: rhs does not conform");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("pcg_solve: rel_tol must lie in (0, 1)");

  PcgResult res{x0 ? *x0 : BlockVector(space), 0, 0.0};
  if (!res.x.conforms(space)) throw std::invalid_argument("pcg_solve: start vector does not conform");
  const Vector& b = rhs.values();
  Vector& x = res.x.values();

  Vector z;
  precond.apply(b, z);
  const double bnorm = std::sqrt(std::max(0.0, b.dot(z)));
  if (bnorm == 0.0) {
    x.setZero();
    return res;
  }

  Vector r = b;
  Vector ap;
  if (x.squaredNorm() > 0.0) {
    op.apply(x, ap);
    r -= ap;
  }
  precond.apply(r, z);
  double rz = r.dot(z);
  Vector p = z;
  for (;;) {
    res.relative_residual = std::sqrt(std::max(0.0, rz)) / bnorm;
    if (res.relative_residual <= rel_tol) return res;
    if (res.iterations >= max_iter) throw SolverError("PCG did not converge within the iteration limit");
    op.apply(p, ap);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw SolverError("PCG breakdown: operator is not positive definite");
    const double alpha = rz / pap;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    precond.apply(r, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    ++res.iterations;
  }
}

BlockVector assemble_rhs(const MultilevelSpace& space, SpaceHierarchy& spaces, const ScalarField& f,
                         int quad_order) {
  BlockVector b(space);
  const auto zero = space.indices().find(MultiIndex{});
  if (zero < 0) throw std::invalid_argument("J_P must contain the zero multi-index");
  const auto i = static_cast<std::size_t>(zero);
  b.block(i) = assemble_load(spaces.get(space.level(i), SpaceKind::Q1), f, quad_order);
  return b;
}

double energy_norm_sq(const BlockVector& u, const BlockVector& rhs) { return dot(u, rhs); }

BlockVector transfer(const BlockVector& u, const MultilevelSpace& from, const MultilevelSpace& to,
                     SpaceHierarchy& spaces) {
  BlockVector out(to);
  for (std::size_t j = 0; j < to.size(); ++j) {
    const auto i = from.indices().find(to.indices()[j]);
    if (i < 0) continue;
    const int lf = from.level(static_cast<std::size_t>(i));
    const int lt = to.level(j);
    if (lf == lt) {
      out.block(j) = u.block(static_cast<std::size_t>(i));
    } else if (lf < lt) {
      const SparseMatrix p = prolongation(spaces.get(lf, SpaceKind::Q1), spaces.get(lt, SpaceKind::Q1));
      out.block(j) = p * u.block(static_cast<std::size_t>(i));
    } else {
      throw std::invalid_argument("transfer: target space is not nested");
    }
  }
  return out;
}

}  // namespace mlsg
