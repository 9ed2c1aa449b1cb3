// Command-line driver: adaptive runs, reference energies, slope fits.

#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlsgfem/report.hpp"

namespace {

mlsg::CosineTerm parse_term(const std::string& text) {
  mlsg::CosineTerm t;
  std::istringstream ss(text);
  char c1 = 0, c2 = 0;
  if (!(ss >> t.amplitude >> c1 >> t.k1 >> c2 >> t.k2) || c1 != ',' || c2 != ',' || !ss.eof())
    throw mlsg::ConfigError("--term expects amplitude,k1,k2 but got '" + text + "'");
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multilevel stochastic Galerkin FEM solver"};
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");
  app.require_subcommand(1);

  mlsg::RunConfig cfg;
  int initial_level = 4;
  double reference_energy = 0.0;
  bool no_timings = false;
  bool quiet = false;
  std::vector<std::string> terms;

  app.add_option("--problem", cfg.problem, "tp1, tp2, tp3, tp4 or custom")->capture_default_str();
  app.add_option("--version", cfg.adaptive.version, "Enrichment strategy version (1 or 2)")->capture_default_str();
  app.add_option("--tol", cfg.adaptive.tolerance, "Energy error tolerance")->capture_default_str();
  app.add_option("--delta-m", cfg.adaptive.delta_m, "New parameters considered per step")->capture_default_str();
  app.add_option("--max-dof", cfg.adaptive.max_dofs, "Stop before a step would exceed this many unknowns")
      ->capture_default_str();
  app.add_option("--max-steps", cfg.adaptive.max_steps, "Maximum number of adaptive steps")->capture_default_str();
  app.add_option("--max-level", cfg.adaptive.max_level, "Finest admissible mesh level")->capture_default_str();
  app.add_option("--initial-level", initial_level, "Mesh level of the two initial modes")->capture_default_str();
  app.add_option("--quad-order", cfg.adaptive.quad_order, "Gauss points per direction")->capture_default_str();
  app.add_option("--pcg-tol", cfg.adaptive.pcg_tolerance, "Relative PCG tolerance")->capture_default_str();
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--reference-energy", reference_energy, "Reference energy for effectivity indices");
  app.add_option("--a0", cfg.custom_a0, "custom: constant mean coefficient")->capture_default_str();
  app.add_option("--load", cfg.custom_load, "custom: constant load")->capture_default_str();
  app.add_option("--term", terms, "custom: cosine term amplitude,k1,k2 (repeatable)");
  app.add_flag("--no-timings", no_timings, "Write zero timings so reruns are byte-identical");
  app.add_flag("-q,--quiet", quiet, "No per-step progress on stderr");

  auto* run_cmd = app.add_subcommand("run", "Adaptive solve; writes steps.csv, summary.json, modes.csv")->fallthrough();
  auto* ref_cmd = app.add_subcommand("reference", "Adaptive solve to --tol and print the energy")->fallthrough();
  auto* slope_cmd = app.add_subcommand("slope", "Fit the log-log slope of eta against N_dof");
  std::string steps_path;
  double tail = 0.6;
  slope_cmd->add_option("steps", steps_path, "steps.csv of a run")->required();
  slope_cmd->add_option("--tail", tail, "Fraction of final steps used")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*slope_cmd) {
      const double s = mlsg::fit_slope(mlsg::read_steps_csv(steps_path), tail);
      std::cout << mlsg::format_double(s) << '\n';
      return 0;
    }

    for (const auto& t : terms) cfg.custom_terms.push_back(parse_term(t));
    if (app.count("--reference-energy") > 0) cfg.reference_energy = reference_energy;
    cfg.adaptive.initial = mlsg::default_initial_space(initial_level);
    cfg.adaptive.record_timings = !no_timings;
    if (!quiet) {
      cfg.adaptive.on_step = [](const mlsg::StepRecord& r) {
        std::fprintf(stderr, "k=%d N_dof=%td eta=%.6e energy=%.9f card=%zu M=%u %s\n", r.k, r.n_dof, r.eta,
                     std::sqrt(r.energy_sq), r.card_jp, r.m_active,
                     r.decision ? mlsg::to_string(r.decision->type).c_str() : "done");
      };
    }
    cfg.validate();

    const mlsg::RunOutcome out = mlsg::run(cfg);
    const auto& last = out.result.steps.back();
    if (*ref_cmd) {
      std::cout << mlsg::format_double(std::sqrt(last.energy_sq)) << '\n';
    } else {
      std::cout << "status " << mlsg::to_string(out.result.status) << ", K=" << last.k << ", eta=" << last.eta
                << ", N_dof=" << last.n_dof << ", card(J_P)=" << out.result.space.size()
                << ", M=" << out.result.space.active_dimension() << '\n';
    }
    if (out.exit_code != 0) std::cerr << "stopped on " << mlsg::to_string(out.result.status) << '\n';
    return out.exit_code;
  } catch (const mlsg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
