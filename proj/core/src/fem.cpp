#include "mlsgfem/fem.hpp"

#include <cmath>

#include <unsupported/Eigen/SparseExtra>

#include "mlsgfem/quadrature.hpp"

namespace mlsg {
namespace {

// 1-D Lagrange shape functions on [0, 1]: degree 1 at {0, 1},
// degree 2 at {0, 1/2, 1}.
double shape(int degree, int a, double t) {
  if (degree == 1) return a == 0 ? 1.0 - t : t;
  switch (a) {
    case 0: return (1.0 - t) * (1.0 - 2.0 * t);
    case 1: return 4.0 * t * (1.0 - t);
    default: return t * (2.0 * t - 1.0);
  }
}

double shape_deriv(int degree, int a, double t) {
  if (degree == 1) return a == 0 ? -1.0 : 1.0;
  switch (a) {
    case 0: return 4.0 * t - 3.0;
    case 1: return 4.0 - 8.0 * t;
    default: return 4.0 * t - 1.0;
  }
}

int degree_of(SpaceKind kind) { return kind == SpaceKind::Q1 ? 1 : 2; }

// Element-local nodes as lattice offsets (a, b) from the element's corner.
std::vector<std::array<int, 2>> local_nodes(SpaceKind kind) {
  if (kind == SpaceKind::Q1) return {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  return {{1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}};
}

struct LocalDofs {
  std::vector<std::array<int, 2>> nodes;
  int degree;
  std::vector<int> dofs;  // filled per element, -1 if absent

  explicit LocalDofs(SpaceKind kind) : nodes(local_nodes(kind)), degree(degree_of(kind)), dofs(nodes.size()) {}

  void gather(const FeSpace& space, int ex, int ey) {
    const int stride = degree;  // lattice points per element edge
    for (std::size_t k = 0; k < nodes.size(); ++k)
      dofs[k] = space.dof_at(stride * ex + nodes[k][0], stride * ey + nodes[k][1]);
  }
};

void check_same_domain(const FeSpace& a, const FeSpace& b) {
  if (!(a.mesh().domain() == b.mesh().domain()))
    throw std::invalid_argument("spaces live on different domains");
}

}  // namespace

FeSpace::FeSpace(MeshLevel mesh, SpaceKind kind, Boundary boundary)
    : mesh_(mesh), kind_(kind), boundary_(boundary) {
  const int n = mesh_.cells_per_side();
  lattice_n_ = kind_ == SpaceKind::Q1 ? n + 1 : 2 * n + 1;
  auto l2d = std::make_shared<std::vector<int>>(static_cast<std::size_t>(lattice_n_) * lattice_n_, -1);
  auto d2l = std::make_shared<std::vector<std::array<int, 2>>>();
  const int last = lattice_n_ - 1;
  for (int q = 0; q <= last; ++q) {
    for (int p = 0; p <= last; ++p) {
      const bool on_boundary = p == 0 || q == 0 || p == last || q == last;
      if (on_boundary && boundary_ == Boundary::Eliminate) continue;
      if (kind_ == SpaceKind::BrokenQ2 && p % 2 == 0 && q % 2 == 0) continue;
      (*l2d)[static_cast<std::size_t>(q) * lattice_n_ + p] = static_cast<int>(d2l->size());
      d2l->push_back({p, q});
    }
  }
  lattice_to_dof_ = std::move(l2d);
  dof_to_lattice_ = std::move(d2l);
}

std::array<double, 2> FeSpace::dof_point(int dof) const {
  const auto [p, q] = dof_lattice(dof);
  const double step = mesh_.element_width() / degree_of(kind_);
  return {mesh_.domain().x0 + p * step, mesh_.domain().y0 + q * step};
}

FeSpace make_space(int level, SpaceKind kind, const Square& domain, Boundary boundary, int max_level) {
  if (level < 1) throw std::invalid_argument("mesh level must be >= 1");
  if (level > max_level) throw LevelCapExceeded(level, max_level);
  return FeSpace(MeshLevel(level, domain), kind, boundary);
}

SparseMatrix assemble_stiffness(const FeSpace& test, const FeSpace& trial, const ScalarField& coeff,
                                int quad_order) {
  check_same_domain(test, trial);
  if (trial.level() > test.level())
    throw std::invalid_argument("assemble_stiffness: trial level exceeds test level; assemble the transpose");

  const GaussRule& rule = gauss_legendre(quad_order);
  const int nq = rule.size();
  const int depth = test.level() - trial.level();
  const int ratio = 1 << depth;
  const int n_fine = test.mesh().cells_per_side();
  const int n_coarse = trial.mesh().cells_per_side();
  const double h_fine = test.mesh().element_width();
  const double h_coarse = trial.mesh().element_width();
  const Square& dom = test.mesh().domain();

  LocalDofs test_local(test.kind());
  LocalDofs trial_local(trial.kind());
  const int nt = static_cast<int>(test_local.nodes.size());
  const int ns = static_cast<int>(trial_local.nodes.size());

  // Fine basis at the fine quadrature points (same for every fine element).
  const int td = test_local.degree;
  std::vector<double> test_gx(static_cast<std::size_t>(nt) * nq * nq);
  std::vector<double> test_gy(test_gx.size());
  for (int i = 0; i < nt; ++i) {
    const auto [a, b] = test_local.nodes[i];
    for (int gy = 0; gy < nq; ++gy)
      for (int gx = 0; gx < nq; ++gx) {
        const double s = rule.nodes[gx];
        const double t = rule.nodes[gy];
        const std::size_t k = (static_cast<std::size_t>(i) * nq + gy) * nq + gx;
        test_gx[k] = shape_deriv(td, a, s) * shape(td, b, t) / h_fine;
        test_gy[k] = shape(td, a, s) * shape_deriv(td, b, t) / h_fine;
      }
  }

  // Coarse 1-D shape tables at fine quadrature points, indexed by the fine
  // element's offset inside its coarse element: [a][offset * nq + g].
  const int sd = trial_local.degree;
  const int n1 = sd + 1;
  std::vector<double> c_val(static_cast<std::size_t>(n1) * ratio * nq);
  std::vector<double> c_der(c_val.size());
  for (int a = 0; a < n1; ++a)
    for (int off = 0; off < ratio; ++off)
      for (int g = 0; g < nq; ++g) {
        const double xi = (off + rule.nodes[g]) / ratio;
        const std::size_t k = (static_cast<std::size_t>(a) * ratio + off) * nq + g;
        c_val[k] = shape(sd, a, xi);
        c_der[k] = shape_deriv(sd, a, xi) / h_coarse;
      }

  // Coefficient samples along each axis at every fine quadrature coordinate.
  std::vector<double> axis(static_cast<std::size_t>(n_fine) * nq);
  for (int e = 0; e < n_fine; ++e)
    for (int g = 0; g < nq; ++g) axis[static_cast<std::size_t>(e) * nq + g] = (e + rule.nodes[g]) * h_fine;
  std::vector<double> xs(axis.size());
  std::vector<double> ys(axis.size());
  for (std::size_t k = 0; k < axis.size(); ++k) {
    xs[k] = dom.x0 + axis[k];
    ys[k] = dom.y0 + axis[k];
  }
  const auto samples = coeff.sample_axes(xs, ys);

  std::vector<double> wq(static_cast<std::size_t>(nq) * nq);
  for (int gy = 0; gy < nq; ++gy)
    for (int gx = 0; gx < nq; ++gx) wq[static_cast<std::size_t>(gy) * nq + gx] = rule.weights[gx] * rule.weights[gy] * h_fine * h_fine;

  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(n_fine) * n_fine * nt * ns);

  std::vector<double> aw(static_cast<std::size_t>(nq) * nq);
  std::vector<double> tr_gx(static_cast<std::size_t>(ns) * nq * nq);
  std::vector<double> tr_gy(tr_gx.size());
  std::vector<double> local(static_cast<std::size_t>(nt) * ns);

  for (int cy = 0; cy < n_coarse; ++cy) {
    for (int cx = 0; cx < n_coarse; ++cx) {
      trial_local.gather(trial, cx, cy);
      bool any_trial = false;
      for (int d : trial_local.dofs) any_trial |= d >= 0;
      if (!any_trial) continue;

      for (int oy = 0; oy < ratio; ++oy) {
        for (int ox = 0; ox < ratio; ++ox) {
          const int fx = cx * ratio + ox;
          const int fy = cy * ratio + oy;
          test_local.gather(test, fx, fy);

          for (int gy = 0; gy < nq; ++gy)
            for (int gx = 0; gx < nq; ++gx) {
              const std::size_t k = static_cast<std::size_t>(gy) * nq + gx;
              aw[k] = wq[k] * samples.value(static_cast<std::size_t>(fx) * nq + gx,
                                           static_cast<std::size_t>(fy) * nq + gy);
            }
          for (int j = 0; j < ns; ++j) {
            const auto [a, b] = trial_local.nodes[j];
            for (int gy = 0; gy < nq; ++gy)
              for (int gx = 0; gx < nq; ++gx) {
                const std::size_t ka = (static_cast<std::size_t>(a) * ratio + ox) * nq + gx;
                const std::size_t kb = (static_cast<std::size_t>(b) * ratio + oy) * nq + gy;
                const std::size_t k = (static_cast<std::size_t>(j) * nq + gy) * nq + gx;
                tr_gx[k] = c_der[ka] * c_val[kb];
                tr_gy[k] = c_val[ka] * c_der[kb];
              }
          }
          const std::size_t nqq = static_cast<std::size_t>(nq) * nq;
          for (int i = 0; i < nt; ++i) {
            const double* tgx = test_gx.data() + i * nqq;
            const double* tgy = test_gy.data() + i * nqq;
            for (int j = 0; j < ns; ++j) {
              const double* sgx = tr_gx.data() + j * nqq;
              const double* sgy = tr_gy.data() + j * nqq;
              double s = 0.0;
              for (std::size_t k = 0; k < nqq; ++k) s += aw[k] * (tgx[k] * sgx[k] + tgy[k] * sgy[k]);
              local[static_cast<std::size_t>(i) * ns + j] = s;
            }
          }
          for (int i = 0; i < nt; ++i) {
            const int row = test_local.dofs[i];
            if (row < 0) continue;
            for (int j = 0; j < ns; ++j) {
              const int col = trial_local.dofs[j];
              if (col < 0) continue;
              triplets.emplace_back(row, col, local[static_cast<std::size_t>(i) * ns + j]);
            }
          }
        }
      }
    }
  }

  SparseMatrix k(test.dof_count(), trial.dof_count());
  k.setFromTriplets(triplets.begin(), triplets.end());
  k.makeCompressed();
  return k;
}

SparseMatrix prolongation(const FeSpace& coarse, const FeSpace& fine) {
  check_same_domain(coarse, fine);
  if (coarse.kind() != SpaceKind::Q1 || fine.kind() != SpaceKind::Q1)
    throw std::invalid_argument("prolongation is defined between Q1 spaces");
  if (coarse.level() > fine.level()) throw std::invalid_argument("prolongation: coarse level exceeds fine level");

  const int ratio = 1 << (fine.level() - coarse.level());
  const int n_coarse = coarse.mesh().cells_per_side();
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(fine.dof_count()) * 4);
  for (int j = 0; j < fine.dof_count(); ++j) {
    const auto [p, q] = fine.dof_lattice(j);
    const int ex = std::min(p / ratio, n_coarse - 1);
    const int ey = std::min(q / ratio, n_coarse - 1);
    const double tx = static_cast<double>(p - ex * ratio) / ratio;
    const double ty = static_cast<double>(q - ey * ratio) / ratio;
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        const double w = shape(1, a, tx) * shape(1, b, ty);
        if (w == 0.0) continue;
        const int i = coarse.dof_at(ex + a, ey + b);
        if (i >= 0) triplets.emplace_back(j, i, w);
      }
  }
  SparseMatrix p(fine.dof_count(), coarse.dof_count());
  p.setFromTriplets(triplets.begin(), triplets.end());
  p.makeCompressed();
  return p;
}

Vector assemble_load(const FeSpace& space, const ScalarField& f, int quad_order) {
  Vector b = Vector::Zero(space.dof_count());
  if (f.is_zero()) return b;
  const GaussRule& rule = gauss_legendre(quad_order);
  const int nq = rule.size();
  const int n = space.mesh().cells_per_side();
  const double h = space.mesh().element_width();
  const Square& dom = space.mesh().domain();

  LocalDofs local(space.kind());
  const int nl = static_cast<int>(local.nodes.size());
  std::vector<double> phi(static_cast<std::size_t>(nl) * nq * nq);
  for (int i = 0; i < nl; ++i) {
    const auto [a, c] = local.nodes[i];
    for (int gy = 0; gy < nq; ++gy)
      for (int gx = 0; gx < nq; ++gx)
        phi[(static_cast<std::size_t>(i) * nq + gy) * nq + gx] =
            shape(local.degree, a, rule.nodes[gx]) * shape(local.degree, c, rule.nodes[gy]);
  }
  std::vector<double> xs(static_cast<std::size_t>(n) * nq);
  std::vector<double> ys(xs.size());
  for (int e = 0; e < n; ++e)
    for (int g = 0; g < nq; ++g) {
      xs[static_cast<std::size_t>(e) * nq + g] = dom.x0 + (e + rule.nodes[g]) * h;
      ys[static_cast<std::size_t>(e) * nq + g] = dom.y0 + (e + rule.nodes[g]) * h;
    }
  const auto samples = f.sample_axes(xs, ys);

  for (int ey = 0; ey < n; ++ey)
    for (int ex = 0; ex < n; ++ex) {
      local.gather(space, ex, ey);
      for (int i = 0; i < nl; ++i) {
        if (local.dofs[i] < 0) continue;
        double s = 0.0;
        for (int gy = 0; gy < nq; ++gy)
          for (int gx = 0; gx < nq; ++gx)
            s += rule.weights[gx] * rule.weights[gy] *
                 samples.value(static_cast<std::size_t>(ex) * nq + gx, static_cast<std::size_t>(ey) * nq + gy) *
                 phi[(static_cast<std::size_t>(i) * nq + gy) * nq + gx];
        b[local.dofs[i]] += s * h * h;
      }
    }
  return b;
}

void write_matrix_market(const SparseMatrix& a, const std::string& path) {
  if (!Eigen::saveMarket(a, path)) throw std::runtime_error("cannot write " + path);
}

}  // namespace mlsg
