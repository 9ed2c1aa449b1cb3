#include "mlsgfem/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace mlsg {

std::string to_string(RefinementType t) { return t == RefinementType::Spatial ? "spatial" : "parametric"; }

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::StepCap: return "step_cap";
    case RunStatus::DofCap: return "dof_cap";
    case RunStatus::LevelCap: return "level_cap";
  }
  return "?";
}

namespace {

double ratio(const Component& c) { return c.estimate * c.estimate / static_cast<double>(c.dofs); }

double max_ratio(std::span<const Component> cs) {
  double d = 0.0;
  for (const auto& c : cs) d = std::max(d, ratio(c));
  return d;
}

std::vector<std::size_t> argmax_set(std::span<const Component> cs, double delta) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (ratio(cs[i]) >= delta * (1.0 - kArgmaxTolerance)) out.push_back(i);
  return out;
}

std::vector<std::size_t> above(std::span<const Component> cs, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (ratio(cs[i]) > threshold) out.push_back(i);
  return out;
}

void aggregate(std::span<const Component> cs, const std::vector<std::size_t>& set, double& zeta,
               std::ptrdiff_t& n) {
  zeta = 0.0;
  n = 0;
  for (auto i : set) {
    zeta += cs[i].estimate * cs[i].estimate;
    n += cs[i].dofs;
  }
}

std::vector<MultiIndex> pick(std::span<const Component> cs, const std::vector<std::size_t>& set) {
  std::vector<MultiIndex> out;
  out.reserve(set.size());
  for (auto i : set) out.push_back(cs[i].index);
  return out;
}

EnrichmentDecision decide(int version, std::span<const Component> spatial, std::span<const Component> parametric) {
  if (spatial.empty() || parametric.empty()) throw std::invalid_argument("enrichment_indices: empty component set");
  EnrichmentDecision d;
  d.delta_y1 = max_ratio(spatial);
  d.delta_y2 = max_ratio(parametric);

  std::vector<std::size_t> jp_bar;
  std::vector<std::size_t> jq_bar;
  if (d.delta_y1 > d.delta_y2) {
    jq_bar = argmax_set(parametric, d.delta_y2);
    jp_bar = version == 1 ? above(spatial, d.delta_y2) : mark(spatial, d.delta_y2);
    if (jp_bar.empty()) jp_bar = argmax_set(spatial, d.delta_y1);
  } else {
    jp_bar = argmax_set(spatial, d.delta_y1);
    jq_bar = version == 1 ? above(parametric, d.delta_y1) : mark(parametric, d.delta_y1);
    if (jq_bar.empty()) jq_bar = argmax_set(parametric, d.delta_y2);
  }

  aggregate(spatial, jp_bar, d.zeta_w1, d.n_w1);
  aggregate(parametric, jq_bar, d.zeta_w2, d.n_w2);
  d.r_w1 = d.zeta_w1 / static_cast<double>(d.n_w1);
  d.r_w2 = d.zeta_w2 / static_cast<double>(d.n_w2);
  d.marked_spatial = pick(spatial, jp_bar);
  d.marked_parametric = pick(parametric, jq_bar);
  d.type = d.r_w1 > d.r_w2 ? RefinementType::Spatial : RefinementType::Parametric;
  d.marked = d.type == RefinementType::Spatial ? d.marked_spatial : d.marked_parametric;
  return d;
}

}  // namespace

std::vector<std::size_t> mark(std::span<const Component> components, double threshold) {
  std::vector<std::size_t> order(components.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ratio(components[a]) > ratio(components[b]); });
  // Aggregate ratios of ratio-sorted prefixes are non-increasing, so the
  // longest passing prefix ends at the first failure.
  double zeta = 0.0;
  double n = 0.0;
  std::size_t len = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Component& c = components[order[k]];
    zeta += c.estimate * c.estimate;
    n += static_cast<double>(c.dofs);
    if (zeta / n > threshold) len = k + 1;
  }
  order.resize(len);
  std::sort(order.begin(), order.end());
  return order;
}

EnrichmentDecision enrichment_indices_v1(std::span<const Component> spatial, std::span<const Component> parametric) {
  return decide(1, spatial, parametric);
}

EnrichmentDecision enrichment_indices_v2(std::span<const Component> spatial, std::span<const Component> parametric) {
  return decide(2, spatial, parametric);
}

EnrichmentDecision enrichment_indices(int version, std::span<const Component> spatial,
                                      std::span<const Component> parametric) {
  if (version != 1 && version != 2) throw std::invalid_argument("algorithm version must be 1 or 2");
  return decide(version, spatial, parametric);
}

MultilevelSpace apply_refinement(const MultilevelSpace& space, const EnrichmentDecision& decision, int bar_level,
                                 int max_level) {
  if (decision.marked.empty()) throw std::invalid_argument("apply_refinement: nothing marked");
  const IndexSet& jp = space.indices();
  if (decision.type == RefinementType::Spatial) {
    std::vector<int> levels = space.levels();
    for (const auto& mu : decision.marked) {
      const auto i = jp.find(mu);
      if (i < 0) throw std::invalid_argument("apply_refinement: marked index not in J_P");
      const int l = ++levels[static_cast<std::size_t>(i)];
      if (l > max_level) throw LevelCapExceeded(l, max_level);
    }
    return MultilevelSpace(jp, std::move(levels));
  }
  if (bar_level > max_level) throw LevelCapExceeded(bar_level, max_level);
  std::vector<std::pair<MultiIndex, int>> modes;
  modes.reserve(jp.size() + decision.marked.size());
  for (std::size_t i = 0; i < jp.size(); ++i) modes.emplace_back(jp[i], space.level(i));
  for (const auto& nu : decision.marked) {
    if (jp.contains(nu)) throw std::invalid_argument("apply_refinement: index already in J_P");
    modes.emplace_back(nu, bar_level);
  }
  std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) { return graded_less(a.first, b.first); });
  std::vector<MultiIndex> idx;
  std::vector<int> levels;
  for (auto& [mu, l] : modes) {
    idx.push_back(std::move(mu));
    levels.push_back(l);
  }
  return MultilevelSpace(IndexSet(std::move(idx)), std::move(levels));
}

MultilevelSpace default_initial_space(int level) {
  return MultilevelSpace(IndexSet({MultiIndex{}, MultiIndex::from_dense({1})}), {level, level});
}

AdaptiveResult adaptive_solve(const ProblemData& problem, const AdaptiveConfig& config) {
  if (!(config.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (config.version != 1 && config.version != 2) throw std::invalid_argument("algorithm version must be 1 or 2");
  if (config.delta_m < 1) throw std::invalid_argument("delta_M must be >= 1");

  using clock = std::chrono::steady_clock;
  auto seconds = [&](clock::time_point a, clock::time_point b) {
    return config.record_timings ? std::chrono::duration<double>(b - a).count() : 0.0;
  };

  SpaceHierarchy spaces(problem.domain, config.max_level);
  StiffnessCache stiffness(problem.coefficient, spaces, config.quad_order, config.cache_bytes);
  FactorCache factors(stiffness, config.direct_limit);
  EstimatorContext ectx{stiffness, factors, problem.load};

  AdaptiveResult result;
  result.space = config.initial;
  for (int l : result.space.levels())
    if (l > config.max_level) throw LevelCapExceeded(l, config.max_level);

  std::optional<BlockVector> previous;
  MultilevelSpace previous_space;
  for (int k = 0;; ++k) {
    const MultilevelSpace& space = result.space;
    StepRecord rec;
    rec.k = k;
    rec.n_dof = space.dof_count();
    rec.card_jp = space.size();
    rec.m_active = space.active_dimension();

    const auto t0 = clock::now();
    const BlockOperator op(space, stiffness);
    const MeanPreconditioner pre(space, factors);
    const BlockVector rhs = assemble_rhs(space, spaces, problem.load, config.quad_order);
    std::optional<BlockVector> start;
    if (previous) start = transfer(*previous, previous_space, space, spaces);
    PcgResult sol = pcg_solve(op, rhs, pre, config.pcg_tolerance, config.pcg_max_iterations,
                              start ? &*start : nullptr);
    rec.pcg_iterations = sol.iterations;
    rec.energy_sq = energy_norm_sq(sol.x, rhs);
    const auto t1 = clock::now();

    rec.components = estimate_components(sol.x, space, config.delta_m, ectx);
    rec.eta = total_estimate(rec.components);
    const auto t2 = clock::now();
    rec.t_solve = seconds(t0, t1);
    rec.t_estimate = seconds(t1, t2);

    result.solution = std::move(sol.x);
    const bool done = rec.eta < config.tolerance;
    std::optional<MultilevelSpace> next;
    if (!done) {
      rec.decision = enrichment_indices(config.version, rec.components.spatial, rec.components.parametric);
      if (k + 1 >= config.max_steps) {
        result.status = RunStatus::StepCap;
      } else {
        try {
          next = apply_refinement(space, *rec.decision, rec.components.bar_level, config.max_level);
          if (next->dof_count() > config.max_dofs) {
            result.status = RunStatus::DofCap;
            next.reset();
          }
        } catch (const LevelCapExceeded&) {
          result.status = RunStatus::LevelCap;
        }
      }
    } else {
      result.status = RunStatus::Converged;
    }
    rec.t_total = seconds(t0, clock::now());
    if (config.on_step) config.on_step(rec);
    result.steps.push_back(std::move(rec));

    if (!next) {
      result.stiffness.required = op.distinct_blocks().size();
      result.stiffness.symmetric = op.required_keys().size();
      result.stiffness.naive_bound = op.naive_bound();
      break;
    }
    previous = result.solution;
    previous_space = space;
    result.space = std::move(*next);
  }
  result.stiffness.distinct = stiffness.distinct().size();
  result.stiffness.assembled = stiffness.assembled();
  return result;
}

}  // namespace mlsg
