#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <vector>

#include "mlsgfem/chaos.hpp"
#include "mlsgfem/coeffs.hpp"
#include "mlsgfem/fem.hpp"

namespace mlsg {

/// Lazily built finite element spaces of one domain, shared by reference.
class SpaceHierarchy {
 public:
  explicit SpaceHierarchy(Square domain, int max_level = kDefaultMaxLevel);

  const Square& domain() const { return domain_; }
  int max_level() const { return max_level_; }
  /// Throws LevelCapExceeded above max_level().
  const FeSpace& get(int level, SpaceKind kind);

 private:
  Square domain_;
  int max_level_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, FeSpace> spaces_;
};

/// Number of interior Q1 nodes on level `level`.
inline std::ptrdiff_t q1_dofs(int level) {
  const std::ptrdiff_t n = (std::ptrdiff_t{1} << level) - 1;
  return n * n;
}

/// Multi-indices J_P with one Q1 mesh level per index.
class MultilevelSpace {
 public:
  MultilevelSpace() = default;
  MultilevelSpace(IndexSet indices, std::vector<int> levels);

  const IndexSet& indices() const { return indices_; }
  const std::vector<int>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  int level(std::size_t i) const { return levels_[i]; }
  /// Level of mu, or -1 if mu is not in the set.
  int level_of(const MultiIndex& mu) const;
  std::uint32_t active_dimension() const { return active_dim_; }

  std::ptrdiff_t block_offset(std::size_t i) const { return offsets_[i]; }
  std::ptrdiff_t block_size(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::ptrdiff_t dof_count() const { return offsets_.back(); }

 private:
  IndexSet indices_;
  std::vector<int> levels_;
  std::vector<std::ptrdiff_t> offsets_{0};
  std::uint32_t active_dim_ = 0;
};

/// Coefficient vector of a multilevel space: one contiguous array split
/// into per-mode blocks in IndexSet order.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(const MultilevelSpace& space);

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  std::size_t blocks() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  auto block(std::size_t i) { return values_.segment(offsets_[i], offsets_[i + 1] - offsets_[i]); }
  auto block(std::size_t i) const { return values_.segment(offsets_[i], offsets_[i + 1] - offsets_[i]); }
  bool conforms(const MultilevelSpace& space) const;

 private:
  Vector values_;
  std::vector<std::ptrdiff_t> offsets_;
};

double dot(const BlockVector& a, const BlockVector& b);

/// Identifies K^m between a test and a trial space.
struct BlockKey {
  std::uint32_t m = 0;
  SpaceKind test_kind = SpaceKind::Q1;
  int test_level = 0;
  SpaceKind trial_kind = SpaceKind::Q1;
  int trial_level = 0;

  /// Same matrix with the finer (or equal) level as the test space.
  BlockKey canonical() const;
  bool is_canonical() const { return test_level >= trial_level; }
  friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

/// Stiffness matrices K^m keyed by (m, spaces), assembled on demand and
/// kept across adaptive steps. Blocks with the test level below the trial
/// level are served as transposes. When the resident size exceeds the byte
/// budget the least recently used blocks are dropped and reassembled if
/// needed again.
class StiffnessCache {
 public:
  StiffnessCache(std::shared_ptr<const AffineCoefficient> coefficient, SpaceHierarchy& spaces,
                 int quad_order = kDefaultQuadratureOrder, std::size_t byte_budget = kDefaultByteBudget);

  static constexpr std::size_t kDefaultByteBudget = std::size_t{2} << 30;

  /// y += alpha * K x, where K is the block for `key` in any orientation.
  void multiply_add(const BlockKey& key, double alpha, const Eigen::Ref<const Vector>& x,
                    Eigen::Ref<Vector> y);

  /// The canonical matrix for key.canonical().
  std::shared_ptr<const SparseMatrix> matrix(const BlockKey& key);

  const AffineCoefficient& coefficient() const { return *coefficient_; }
  SpaceHierarchy& spaces() { return spaces_; }
  int quad_order() const { return quad_order_; }

  /// Number of assembly calls so far (including reassembly after eviction).
  std::size_t assembled() const { return assembled_; }
  /// Distinct canonical keys ever assembled.
  const std::set<BlockKey>& distinct() const { return distinct_; }
  std::size_t resident() const { return entries_.size(); }
  std::size_t resident_bytes() const { return bytes_; }

 private:
  struct Entry {
    std::shared_ptr<const SparseMatrix> matrix;
    std::size_t bytes = 0;
    std::uint64_t stamp = 0;
  };

  void evict(const BlockKey& keep);

  std::shared_ptr<const AffineCoefficient> coefficient_;
  SpaceHierarchy& spaces_;
  int quad_order_;
  std::size_t byte_budget_;
  std::mutex mutex_;
  std::map<BlockKey, Entry> entries_;
  std::set<BlockKey> distinct_;
  std::size_t bytes_ = 0;
  std::size_t assembled_ = 0;
  std::uint64_t clock_ = 0;
};

/// SPD solve with the a0-weighted stiffness matrix of one space.
class LevelSolver {
 public:
  virtual ~LevelSolver() = default;
  virtual void solve(const Eigen::Ref<const Vector>& b, Eigen::Ref<Vector> x) const = 0;
  virtual bool direct() const = 0;
};

/// Factorizations of K^0 per (kind, level). Spaces up to `direct_limit`
/// unknowns use sparse Cholesky; larger ones use diagonally preconditioned
/// CG to relative residual `iterative_tol`.
class FactorCache {
 public:
  explicit FactorCache(StiffnessCache& stiffness, std::ptrdiff_t direct_limit = kDefaultDirectLimit,
                       double iterative_tol = 1e-12);

  static constexpr std::ptrdiff_t kDefaultDirectLimit = 1'200'000;

  const LevelSolver& get(SpaceKind kind, int level);
  std::size_t size() const { return solvers_.size(); }

 private:
  StiffnessCache& stiffness_;
  std::ptrdiff_t direct_limit_;
  double iterative_tol_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::unique_ptr<LevelSolver>> solvers_;
};

/// The SGFEM matrix A with blocks A_{nu mu} = sum_m [G_m]_{nu mu} K^m_{nu mu}.
class BlockOperator {
 public:
  BlockOperator(const MultilevelSpace& space, StiffnessCache& cache);

  const MultilevelSpace& space() const { return space_; }
  std::uint32_t terms() const { return terms_; }
  std::ptrdiff_t rows() const { return space_.dof_count(); }

  /// y = A x.
  void apply(const Vector& x, Vector& y) const;
  BlockVector apply(const BlockVector& x) const;

  /// Canonical (m, level, level) triples with a nonzero coupling entry:
  /// the stiffness matrices this operator assembles (transposes reused).
  std::set<BlockKey> required_keys() const;
  /// Ordered triples (m, level of nu, level of mu) over nonzero [G_m]_{nu mu},
  /// i.e. the distinct blocks K^m_{nu mu} without exploiting symmetry.
  std::set<BlockKey> distinct_blocks() const;
  /// Naive bound (1 + 2M) card(J_P) on the number of distinct blocks.
  std::size_t naive_bound() const { return (1 + 2 * static_cast<std::size_t>(terms_)) * space_.size(); }

 private:
  struct Coupling {
    std::size_t row;
    std::size_t col;
    std::uint32_t m;
    double g;
  };
  const MultilevelSpace& space_;
  StiffnessCache& cache_;
  std::uint32_t terms_;
  std::vector<Coupling> couplings_;  // sorted by row block
};

/// Block-diagonal mean-based preconditioner: per mode, K^0 on its level.
class MeanPreconditioner {
 public:
  MeanPreconditioner(const MultilevelSpace& space, FactorCache& factors);
  void apply(const Vector& r, Vector& z) const;

 private:
  const MultilevelSpace& space_;
  std::vector<const LevelSolver*> blocks_;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PcgResult {
  BlockVector x;
  int iterations = 0;
  double relative_residual = 0.0;  // preconditioned residual norm / that of the rhs
};

/// Preconditioned CG from `x0` (zero if empty). Stops when
/// sqrt(r.Pr) <= rel_tol * sqrt(b.Pb); throws SolverError after max_iter.
PcgResult pcg_solve(const BlockOperator& op, const BlockVector& rhs, const MeanPreconditioner& precond,
                    double rel_tol, int max_iter, const BlockVector* x0 = nullptr);

/// Right-hand side: only the zero-mode block is nonzero.
BlockVector assemble_rhs(const MultilevelSpace& space, SpaceHierarchy& spaces, const ScalarField& f,
                         int quad_order = kDefaultQuadratureOrder);

/// ||u||_B^2 = u . b for a Galerkin solution u.
double energy_norm_sq(const BlockVector& u, const BlockVector& rhs);

/// Moves u from `from` onto the nested space `to`: shared modes are
/// prolongated to their new level, new modes start at zero.
BlockVector transfer(const BlockVector& u, const MultilevelSpace& from, const MultilevelSpace& to,
                     SpaceHierarchy& spaces);

}  // namespace mlsg
