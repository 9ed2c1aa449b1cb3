#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlsgfem/adapt.hpp"
#include "mlsgfem/coeffs.hpp"

namespace mlsg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything needed to reproduce one adaptive run.
struct RunConfig {
  std::string problem = "tp3";  // tp1..tp4 or "custom"
  // custom problem: constant a0 and load, cosine terms on the unit square
  double custom_a0 = 1.0;
  double custom_load = 1.0;
  std::vector<CosineTerm> custom_terms;

  AdaptiveConfig adaptive;
  std::filesystem::path out_dir = "out";
  std::optional<double> reference_energy;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

ProblemData make_run_problem(const RunConfig& config);

/// "%.17g", so every double round-trips.
std::string format_double(double v);

/// Exit code for a finished run: 0 converged, 2 for any cap.
int exit_code(RunStatus status);

void write_steps_csv(std::ostream& os, std::span<const StepRecord> steps);
/// One row per mode: sparse (position:degree) pairs, level, element width.
void write_modes_csv(std::ostream& os, const MultilevelSpace& space, const Square& domain);
nlohmann::json summary_json(const RunConfig& config, const AdaptiveResult& result);

struct RunOutcome {
  AdaptiveResult result;
  int exit_code = 0;
};

/// Runs the adaptive loop and writes steps.csv, summary.json and modes.csv
/// into config.out_dir. steps.csv is rewritten after every step.
RunOutcome run(const RunConfig& config);

struct StepsTable {
  std::vector<double> n_dof;
  std::vector<double> eta;
  std::vector<double> energy_sq;
};

StepsTable read_steps_csv(const std::filesystem::path& path);

/// Least-squares slope of log(eta) against log(n_dof) over the last
/// ceil(tail_fraction * n) points. Throws std::invalid_argument with fewer
/// than 4 tail points.
double fit_slope(std::span<const double> n_dof, std::span<const double> eta, double tail_fraction = 0.6);
double fit_slope(const StepsTable& table, double tail_fraction = 0.6);
double fit_slope(std::span<const StepRecord> steps, double tail_fraction = 0.6);

/// sqrt(u . b) of a run to `tight_tolerance`; throws std::runtime_error if
/// the run stops on a cap.
double reference_run(const ProblemData& problem, double tight_tolerance, AdaptiveConfig base = {});

/// Effectivity index per step against a reference energy.
std::vector<double> effectivities(std::span<const StepRecord> steps, double reference_energy);

}  // namespace mlsg
