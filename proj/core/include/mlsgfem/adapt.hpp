#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlsgfem/coeffs.hpp"
#include "mlsgfem/estimator.hpp"
#include "mlsgfem/system.hpp"

namespace mlsg {

enum class RefinementType { Spatial, Parametric };
std::string to_string(RefinementType t);

struct EnrichmentDecision {
  RefinementType type = RefinementType::Parametric;
  std::vector<MultiIndex> marked;  // the chosen side
  std::vector<MultiIndex> marked_spatial;
  std::vector<MultiIndex> marked_parametric;
  double delta_y1 = 0.0;
  double delta_y2 = 0.0;
  double zeta_w1 = 0.0;
  double zeta_w2 = 0.0;
  std::ptrdiff_t n_w1 = 0;
  std::ptrdiff_t n_w2 = 0;
  double r_w1 = 0.0;
  double r_w2 = 0.0;
};

/// Relative tolerance for treating ratios as equal to the maximum.
inline constexpr double kArgmaxTolerance = 1e-12;

/// Version 1: the dominant side marks every component whose ratio exceeds
/// the other side's maximum ratio; the other side marks its maximizers.
EnrichmentDecision enrichment_indices_v1(std::span<const Component> spatial,
                                         std::span<const Component> parametric);
/// Version 2: the dominant side marks the longest ratio-sorted prefix whose
/// aggregate ratio exceeds the other side's maximum ratio.
EnrichmentDecision enrichment_indices_v2(std::span<const Component> spatial,
                                         std::span<const Component> parametric);
EnrichmentDecision enrichment_indices(int version, std::span<const Component> spatial,
                                      std::span<const Component> parametric);

/// Indices of the longest prefix of `components` sorted by descending
/// ratio e^2/N whose aggregate ratio exceeds `threshold`.
std::vector<std::size_t> mark(std::span<const Component> components, double threshold);

/// Spatial: marked modes move one level up. Parametric: marked indices join
/// J_P on `bar_level`, and J_P is kept in graded order. Throws
/// LevelCapExceeded when a level would exceed `max_level`.
MultilevelSpace apply_refinement(const MultilevelSpace& space, const EnrichmentDecision& decision,
                                 int bar_level, int max_level = kDefaultMaxLevel);

/// The usual starting space {(0), (1)} with both modes on `level`.
MultilevelSpace default_initial_space(int level = 4);

struct StepRecord {
  int k = 0;
  std::ptrdiff_t n_dof = 0;
  double eta = 0.0;
  double energy_sq = 0.0;
  std::size_t card_jp = 0;
  std::uint32_t m_active = 0;
  int pcg_iterations = 0;
  double t_solve = 0.0;
  double t_estimate = 0.0;
  double t_total = 0.0;
  ComponentEstimates components;
  std::optional<EnrichmentDecision> decision;  // empty on the final step
};

enum class RunStatus { Converged, StepCap, DofCap, LevelCap };
std::string to_string(RunStatus s);

struct AdaptiveConfig {
  int version = 1;
  double tolerance = 1e-2;
  std::uint32_t delta_m = 5;
  MultilevelSpace initial = default_initial_space();
  int quad_order = kDefaultQuadratureOrder;
  double pcg_tolerance = 1e-10;
  int pcg_max_iterations = 1000;
  int max_steps = 200;
  std::ptrdiff_t max_dofs = 2'000'000;
  int max_level = kDefaultMaxLevel;
  std::size_t cache_bytes = StiffnessCache::kDefaultByteBudget;
  std::ptrdiff_t direct_limit = FactorCache::kDefaultDirectLimit;
  bool record_timings = true;
  std::function<void(const StepRecord&)> on_step;
};

struct StiffnessStats {
  std::size_t required = 0;     // distinct blocks K^m_{nu mu} of the final operator
  std::size_t symmetric = 0;    // the same up to transposition
  std::size_t naive_bound = 0;  // (1 + 2M) card(J_P)
  std::size_t distinct = 0;     // distinct blocks assembled during the run
  std::size_t assembled = 0;    // assembly calls, including re-assembly
};

struct AdaptiveResult {
  RunStatus status = RunStatus::Converged;
  MultilevelSpace space;
  BlockVector solution;
  std::vector<StepRecord> steps;
  StiffnessStats stiffness;
};

/// Solve, estimate, mark, refine until eta < tolerance or a cap is hit.
AdaptiveResult adaptive_solve(const ProblemData& problem, const AdaptiveConfig& config);

}  // namespace mlsg
