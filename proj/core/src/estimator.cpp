#include "mlsgfem/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mlsg {

int argavg_level(std::span<const int> levels) {
  if (levels.empty()) throw std::invalid_argument("argavg_level: empty level set");
  std::vector<int> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t need = (sorted.size() + 1) / 2;
  return sorted[need - 1];
}

namespace {

// Per-row lists of (col, m, g) over all coupling matrices m = m_lo..m_hi.
struct Neighbours {
  struct Link {
    std::size_t col;
    std::uint32_t m;
    double g;
  };
  std::vector<std::vector<Link>> rows;

  Neighbours(const IndexSet& rs, const IndexSet& cs, std::uint32_t m_lo, std::uint32_t m_hi) : rows(rs.size()) {
    for (std::uint32_t m = m_lo; m <= m_hi; ++m) {
      const CouplingMatrix g = build_coupling(m, rs, cs);
      for (const auto& e : g.entries) rows[e.row].push_back({e.col, m, e.value});
    }
  }
};

double b0_norm(const LevelSolver& solver, const Vector& rhs) {
  if (rhs.squaredNorm() == 0.0) return 0.0;
  Vector e(rhs.size());
  solver.solve(rhs, e);
  return std::sqrt(std::max(0.0, e.dot(rhs)));
}

}  // namespace

std::vector<Component> spatial_components(const BlockVector& u, const MultilevelSpace& space,
                                          EstimatorContext& ctx) {
  if (!u.conforms(space)) throw std::invalid_argument("spatial_components: u does not conform");
  const IndexSet& jp = space.indices();
  const Neighbours nb(jp, jp, 0, space.active_dimension());
  SpaceHierarchy& spaces = ctx.stiffness.spaces();
  const int q = ctx.stiffness.quad_order();

  std::vector<Component> out;
  out.reserve(jp.size());
  for (std::size_t i = 0; i < jp.size(); ++i) {
    const int l = space.level(i);
    const FeSpace& detail = spaces.get(l, SpaceKind::BrokenQ2);
    Vector rhs = Vector::Zero(detail.dof_count());
    if (jp[i].is_zero()) rhs = assemble_load(detail, ctx.load, q);
    for (const auto& link : nb.rows[i]) {
      const BlockKey key{link.m, SpaceKind::BrokenQ2, l, SpaceKind::Q1, space.level(link.col)};
      ctx.stiffness.multiply_add(key, -link.g, u.block(link.col), rhs);
    }
    const LevelSolver& solver = ctx.factors.get(SpaceKind::BrokenQ2, l);
    out.push_back({jp[i], l, b0_norm(solver, rhs), detail.dof_count()});
  }
  return out;
}

std::vector<Component> parametric_components(const BlockVector& u, const MultilevelSpace& space,
                                             const IndexSet& jq, int h_level, EstimatorContext& ctx) {
  if (!u.conforms(space)) throw std::invalid_argument("parametric_components: u does not conform");
  const IndexSet& jp = space.indices();
  for (const auto& nu : jq)
    if (jp.contains(nu)) throw std::invalid_argument("parametric_components: J_Q must be disjoint from J_P");
  const std::uint32_t m_hi = std::max(active_dimension(jq), space.active_dimension());
  const Neighbours nb(jq, jp, 1, m_hi);
  const FeSpace& h = ctx.stiffness.spaces().get(h_level, SpaceKind::Q1);
  const LevelSolver& solver = ctx.factors.get(SpaceKind::Q1, h_level);

  std::vector<Component> out;
  out.reserve(jq.size());
  for (std::size_t k = 0; k < jq.size(); ++k) {
    // F(psi_nu v) vanishes for nu != 0, so only the coupling terms remain.
    Vector rhs = Vector::Zero(h.dof_count());
    for (const auto& link : nb.rows[k]) {
      const BlockKey key{link.m, SpaceKind::Q1, h_level, SpaceKind::Q1, space.level(link.col)};
      ctx.stiffness.multiply_add(key, -link.g, u.block(link.col), rhs);
    }
    out.push_back({jq[k], h_level, b0_norm(solver, rhs), h.dof_count()});
  }
  return out;
}

ComponentEstimates estimate_components(const BlockVector& u, const MultilevelSpace& space,
                                       std::uint32_t delta_m, EstimatorContext& ctx) {
  ComponentEstimates c;
  c.bar_level = argavg_level(space.levels());
  const IndexSet jq = neighbor_set(space.indices(), delta_m);
  c.spatial = spatial_components(u, space, ctx);
  c.parametric = parametric_components(u, space, jq, c.bar_level, ctx);
  return c;
}

double total_estimate(const ComponentEstimates& c) {
  double s = 0.0;
  for (const auto& e : c.spatial) s += e.estimate * e.estimate;
  for (const auto& e : c.parametric) s += e.estimate * e.estimate;
  return std::sqrt(s);
}

double effectivity(double eta, double energy_sq, double reference_energy) {
  if (eta == 0.0) return 0.0;
  const double gap = reference_energy * reference_energy - energy_sq;
  if (!(gap > 0.0)) throw std::domain_error("reference energy does not exceed the current energy");
  return eta / std::sqrt(gap);
}

}  // namespace mlsg
