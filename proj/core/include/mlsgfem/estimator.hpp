#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlsgfem/chaos.hpp"
#include "mlsgfem/system.hpp"

namespace mlsg {

/// One error component ||e||_{B0} together with its detail-space dimension.
struct Component {
  MultiIndex index;
  int level = 0;            // mesh level of the detail space
  double estimate = 0.0;    // ||e||_{B0}
  std::ptrdiff_t dofs = 0;  // dim of the detail space
};

struct ComponentEstimates {
  std::vector<Component> spatial;     // one per mu in J_P, IndexSet order
  std::vector<Component> parametric;  // one per nu in J_Q, IndexSet order
  int bar_level = 0;                  // level of H
};

/// Smallest level L such that at least ceil(card/2) of the levels are <= L.
int argavg_level(std::span<const int> levels);

/// Shared state for the component solves: the caches of a run.
struct EstimatorContext {
  StiffnessCache& stiffness;
  FactorCache& factors;
  const ScalarField& load;
};

/// ||e_{Y1}^mu||_{B0} for every mu in J_P: broken-Q2 solves on the level of
/// mu with the residual of u tested against psi_mu times the detail basis.
std::vector<Component> spatial_components(const BlockVector& u, const MultilevelSpace& space,
                                          EstimatorContext& ctx);

/// ||e_{Y2}^nu||_{B0} for every nu in J_Q on the Q1 space of level h_level.
std::vector<Component> parametric_components(const BlockVector& u, const MultilevelSpace& space,
                                             const IndexSet& jq, int h_level, EstimatorContext& ctx);

/// Both component sets with J_Q built from `delta_m`.
ComponentEstimates estimate_components(const BlockVector& u, const MultilevelSpace& space,
                                       std::uint32_t delta_m, EstimatorContext& ctx);

/// eta = sqrt(sum of squared components).
double total_estimate(const ComponentEstimates& c);

/// eta / sqrt(reference^2 - energy_sq); throws std::domain_error when the
/// reference does not exceed the current energy (and eta > 0).
double effectivity(double eta, double energy_sq, double reference_energy);

}  // namespace mlsg
