#include "mlsgfem/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace mlsg {

void RunConfig::validate() const {
  if (!(adaptive.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (adaptive.version != 1 && adaptive.version != 2) throw ConfigError("version must be 1 or 2");
  if (adaptive.delta_m < 1) throw ConfigError("delta-m must be >= 1");
  if (!(adaptive.pcg_tolerance > 0.0)) throw ConfigError("PCG tolerance must be positive");
  if (adaptive.max_steps < 1) throw ConfigError("max-steps must be >= 1");
  if (adaptive.max_dofs < 1) throw ConfigError("max-dof must be >= 1");
  if (adaptive.initial.size() == 0 || !adaptive.initial.indices()[0].is_zero())
    throw ConfigError("the initial index set must start with the zero index");
  for (int l : adaptive.initial.levels())
    if (l < 1 || l > adaptive.max_level) throw ConfigError("initial level out of range");
  if (reference_energy && !(*reference_energy > 0.0)) throw ConfigError("reference energy must be positive");
  if (problem == "custom") {
    if (!(custom_a0 > 0.0)) throw ConfigError("a0 must be positive");
    double s = 0.0;
    for (const auto& t : custom_terms) s += std::abs(t.amplitude);
    if (s >= custom_a0) throw ConfigError("sum of term amplitudes must stay below a0");
  } else if (!parse_test_problem(problem)) {
    throw ConfigError("unknown problem '" + problem + "'");
  }
}

ProblemData make_run_problem(const RunConfig& config) {
  if (config.problem == "custom") return make_custom_problem(config.custom_a0, config.custom_terms, config.custom_load);
  const auto tp = parse_test_problem(config.problem);
  if (!tp) throw ConfigError("unknown problem '" + config.problem + "'");
  return make_problem(*tp);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int exit_code(RunStatus status) { return status == RunStatus::Converged ? 0 : 2; }

void write_steps_csv(std::ostream& os, std::span<const StepRecord> steps) {
  os << "k,N_dof,eta,energy_sq,refinement_type,card_JP,M,n_marked,pcg_iters,t_solve_s,t_estimate_s\n";
  for (const auto& s : steps) {
    os << s.k << ',' << s.n_dof << ',' << format_double(s.eta) << ',' << format_double(s.energy_sq) << ','
       << (s.decision ? to_string(s.decision->type) : "none") << ',' << s.card_jp << ',' << s.m_active << ','
       << (s.decision ? s.decision->marked.size() : 0) << ',' << s.pcg_iterations << ','
       << format_double(s.t_solve) << ',' << format_double(s.t_estimate) << '\n';
  }
}

namespace {

std::string sparse_pairs(const MultiIndex& mu) {
  if (mu.is_zero()) return "0";
  std::string out;
  for (const auto& [p, d] : mu.entries()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(p) + ':' + std::to_string(d);
  }
  return out;
}

double element_width(const Square& domain, int level) { return std::ldexp(domain.side, -level); }

}  // namespace

void write_modes_csv(std::ostream& os, const MultilevelSpace& space, const Square& domain) {
  os << "index,mu,level,h\n";
  for (std::size_t i = 0; i < space.size(); ++i)
    os << i << ',' << sparse_pairs(space.indices()[i]) << ',' << space.level(i) << ','
       << format_double(element_width(domain, space.level(i))) << '\n';
}

nlohmann::json summary_json(const RunConfig& config, const AdaptiveResult& result) {
  using nlohmann::json;
  const StepRecord& last = result.steps.back();
  json j;
  j["problem"] = config.problem;
  j["version"] = config.adaptive.version;
  j["tolerance"] = config.adaptive.tolerance;
  j["delta_m"] = config.adaptive.delta_m;
  j["status"] = to_string(result.status);
  j["steps"] = last.k;  // K, the index of the final step
  j["eta"] = last.eta;
  j["energy_sq"] = last.energy_sq;
  j["energy"] = std::sqrt(last.energy_sq);
  j["n_dof"] = last.n_dof;
  j["card_jp"] = result.space.size();
  j["m_active"] = result.space.active_dimension();

  std::map<int, int> per_level;
  for (int l : result.space.levels()) ++per_level[l];
  json levels = json::array();
  for (const auto& [l, n] : per_level) levels.push_back({{"level", l}, {"modes", n}});
  j["modes_per_level"] = std::move(levels);

  j["stiffness"] = {{"required", result.stiffness.required},
                    {"symmetric", result.stiffness.symmetric},
                    {"naive_bound", result.stiffness.naive_bound},
                    {"distinct_assembled", result.stiffness.distinct},
                    {"assembly_calls", result.stiffness.assembled}};

  double t_solve = 0.0, t_estimate = 0.0, t_total = 0.0;
  for (const auto& s : result.steps) {
    t_solve += s.t_solve;
    t_estimate += s.t_estimate;
    t_total += s.t_total;
  }
  j["timings"] = {{"solve_s", t_solve}, {"estimate_s", t_estimate}, {"total_s", t_total}};

  if (config.reference_energy) {
    j["reference_energy"] = *config.reference_energy;
    try {
      j["effectivity"] = effectivities(result.steps, *config.reference_energy);
    } catch (const std::domain_error& e) {
      j["effectivity_error"] = e.what();
    }
  }
  return j;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace

RunOutcome run(const RunConfig& config) {
  config.validate();
  const ProblemData problem = make_run_problem(config);
  std::filesystem::create_directories(config.out_dir);

  std::vector<StepRecord> partial;
  AdaptiveConfig ac = config.adaptive;
  auto user_hook = ac.on_step;
  ac.on_step = [&](const StepRecord& rec) {
    partial.push_back(rec);
    std::ostringstream os;
    write_steps_csv(os, partial);
    write_file(config.out_dir / "steps.csv", os.str());
    if (user_hook) user_hook(rec);
  };

  RunOutcome out;
  out.result = adaptive_solve(problem, ac);
  out.exit_code = exit_code(out.result.status);

  std::ostringstream steps, modes;
  write_steps_csv(steps, out.result.steps);
  write_modes_csv(modes, out.result.space, problem.domain);
  write_file(config.out_dir / "steps.csv", steps.str());
  write_file(config.out_dir / "modes.csv", modes.str());
  write_file(config.out_dir / "summary.json", summary_json(config, out.result).dump(2) + "\n");
  return out;
}

StepsTable read_steps_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error(path.string() + ": missing column " + name);
  };
  const std::size_t c_n = column("N_dof"), c_eta = column("eta"), c_e = column("energy_sq");
  StepsTable t;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::runtime_error(path.string() + ": ragged row");
    t.n_dof.push_back(std::stod(cells[c_n]));
    t.eta.push_back(std::stod(cells[c_eta]));
    t.energy_sq.push_back(std::stod(cells[c_e]));
  }
  return t;
}

double fit_slope(std::span<const double> n_dof, std::span<const double> eta, double tail_fraction) {
  if (n_dof.size() != eta.size()) throw std::invalid_argument("fit_slope: size mismatch");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw std::invalid_argument("fit_slope: bad tail fraction");
  const auto n = n_dof.size();
  const auto tail = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n) - 1e-9));
  if (tail < 4) throw std::invalid_argument("fit_slope: fewer than 4 points in the tail");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = n - tail; i < n; ++i) {
    const double x = std::log(n_dof[i]), y = std::log(eta[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(tail);
  const double den = k * sxx - sx * sx;
  if (!(den > 0.0)) throw std::invalid_argument("fit_slope: N_dof is constant over the tail");
  return (k * sxy - sx * sy) / den;
}

double fit_slope(const StepsTable& table, double tail_fraction) {
  return fit_slope(table.n_dof, table.eta, tail_fraction);
}

double fit_slope(std::span<const StepRecord> steps, double tail_fraction) {
  std::vector<double> n, e;
  for (const auto& s : steps) {
    n.push_back(static_cast<double>(s.n_dof));
    e.push_back(s.eta);
  }
  return fit_slope(n, e, tail_fraction);
}

double reference_run(const ProblemData& problem, double tight_tolerance, AdaptiveConfig base) {
  base.tolerance = tight_tolerance;
  const AdaptiveResult r = adaptive_solve(problem, base);
  if (r.status != RunStatus::Converged)
    throw std::runtime_error("reference run stopped early: " + to_string(r.status));
  return std::sqrt(r.steps.back().energy_sq);
}

std::vector<double> effectivities(std::span<const StepRecord> steps, double reference_energy) {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(effectivity(s.eta, s.energy_sq, reference_energy));
  return out;
}

}  // namespace mlsg
