#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mlsgfem/field.hpp"

namespace mlsg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

inline constexpr int kDefaultMaxLevel = 10;
inline constexpr int kDefaultQuadratureOrder = 4;

/// Axis-aligned square [x0, x0 + side] x [y0, y0 + side].
struct Square {
  double x0 = 0.0;
  double y0 = 0.0;
  double side = 1.0;
  friend bool operator==(const Square&, const Square&) = default;
};

/// Thrown when a requested mesh level exceeds the configured hierarchy cap.
class LevelCapExceeded : public std::runtime_error {
 public:
  LevelCapExceeded(int level, int cap)
      : std::runtime_error("mesh level " + std::to_string(level) + " exceeds cap " +
                           std::to_string(cap)),
        level_(level) {}
  int level() const { return level_; }

 private:
  int level_;
};

/// Uniform 2^level x 2^level partition of a square.
class MeshLevel {
 public:
  MeshLevel(int level, Square domain) : level_(level), domain_(domain) {}
  int level() const { return level_; }
  const Square& domain() const { return domain_; }
  int cells_per_side() const { return 1 << level_; }
  double element_width() const { return domain_.side / cells_per_side(); }

 private:
  int level_;
  Square domain_;
};

enum class SpaceKind { Q1, BrokenQ2 };
enum class Boundary { Eliminate, Retain };

/// Nodal finite element space on a MeshLevel.
///
/// Q1 nodes live on the vertex lattice ((n+1) points per side). Broken Q2
/// nodes live on the half-step lattice ((2n+1) per side) and are the edge
/// midpoints and cell centres only. Degrees of freedom are numbered
/// row-major over the lattice. With Boundary::Eliminate the boundary nodes
/// carry no degree of freedom.
class FeSpace {
 public:
  const MeshLevel& mesh() const { return mesh_; }
  int level() const { return mesh_.level(); }
  SpaceKind kind() const { return kind_; }
  Boundary boundary() const { return boundary_; }
  int dof_count() const { return static_cast<int>(dof_to_lattice_->size()); }

  int lattice_points_per_side() const { return lattice_n_; }
  /// Degree of freedom at lattice point (p, q), or -1.
  int dof_at(int p, int q) const { return (*lattice_to_dof_)[static_cast<std::size_t>(q) * lattice_n_ + p]; }
  std::array<int, 2> dof_lattice(int dof) const { return (*dof_to_lattice_)[dof]; }
  std::array<double, 2> dof_point(int dof) const;

  friend FeSpace make_space(int, SpaceKind, const Square&, Boundary, int);

 private:
  FeSpace(MeshLevel mesh, SpaceKind kind, Boundary boundary);

  MeshLevel mesh_;
  SpaceKind kind_;
  Boundary boundary_;
  int lattice_n_ = 0;
  std::shared_ptr<const std::vector<int>> lattice_to_dof_;
  std::shared_ptr<const std::vector<std::array<int, 2>>> dof_to_lattice_;
};

FeSpace make_space(int level, SpaceKind kind, const Square& domain,
                   Boundary boundary = Boundary::Eliminate, int max_level = kDefaultMaxLevel);

/// Galerkin matrix [K]_{ji} = \int_D coeff grad(trial_i) . grad(test_j).
///
/// Requires test.level() >= trial.level() on the same domain. When the
/// levels differ, each coarse (trial) element is visited once and the fine
/// elements embedded in it are integrated against the coarse basis, so only
/// fine-element quadrature is ever needed. Tensor Gauss rule with
/// `quad_order` points per direction on every fine element.
SparseMatrix assemble_stiffness(const FeSpace& test, const FeSpace& trial, const ScalarField& coeff,
                                int quad_order = kDefaultQuadratureOrder);

/// Nodal interpolation of the coarse Q1 basis in the fine Q1 basis:
/// phi_i^coarse = sum_j P(j, i) phi_j^fine.
SparseMatrix prolongation(const FeSpace& coarse, const FeSpace& fine);

/// Load vector [b]_j = \int_D f phi_j.
Vector assemble_load(const FeSpace& space, const ScalarField& f,
                     int quad_order = kDefaultQuadratureOrder);

/// Writes a matrix in Matrix Market coordinate format.
void write_matrix_market(const SparseMatrix& a, const std::string& path);

}  // namespace mlsg
