#pragma once

// Scenario runner: each scenario builds its data, runs the solvers and
// evaluates a fixed list of pass/fail predicates.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blowup/physical_solver.hpp"
#include "blowup/reduced_dynamics.hpp"
#include "blowup/rescaled_solver.hpp"

namespace blowup {

struct ScenarioConfig {
  std::string scenario;
  std::size_t n = 1;
  double p = 3.0;
  unsigned seed = 1;
  std::string output_dir;  // empty: no files

  // rescaled runs
  double extent = 20.0;
  double spacing = 0.05;
  double dtau = 1e-3;
  double tau0 = 10.0;
  double tau_span = 25.0;
  double tau_out = 0.1;
  std::size_t quadrature_points = 64;
  double noise = 1e-3;

  // dichotomy
  double epsilon = 1e-3;
  double threshold_epsilon = 1e-14;
  double horizon = 40.0;
  double control_horizon = 25.0;

  // physical runs
  double amplitude = 3.0;
  double box = 10.0;
  double physical_spacing = 0.01;
  double m_stop = 1e6;
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  double noise_sign = 1.0;
  double shift = 0.3;
  double odd_amplitude = 0.05;
  double drift_span = 10.0;

  /// Defaults, with the coarser 2-d grid when n = 2.
  static ScenarioConfig defaults(const std::string& scenario, std::size_t n = 1);
  /// INI file: [scenario], [rescaled], [dichotomy], [physical] sections;
  /// unknown keys are rejected.
  static ScenarioConfig load(const std::string& path);
  static ScenarioConfig parse(const std::string& text);

  std::string canonical_text() const;
  std::string hash() const;  // FNV-1a of canonical_text, hex
};

struct Predicate {
  std::string name;
  int criterion = 0;
  bool pass = false;
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  nlohmann::json cases = nlohmann::json::object();
  std::vector<Predicate> predicates;
  std::string config_hash;
  std::string code_version;
  /// CSV tables by file stem (trajectories, sup histories, sweeps).
  std::vector<std::pair<std::string, std::string>> tables;

  bool all_pass() const;
  void add(const std::string& name, int criterion, bool pass, const std::string& detail);
  nlohmann::json to_json() const;
  void add_trajectory(const std::string& stem, const Trajectory& t);
  /// <dir>/<scenario>.json plus <dir>/<stem>.csv per table.
  void write(const std::string& dir) const;
};

const char* code_version();

// data builders

/// Smooth Gaussian-windowed Fourier noise with sup 1, made orthogonal in
/// L2_rho to every tracked eigenfunction with localized corrections H e^{-|z|^2/16}.
Field orthogonal_noise(const Grid& grid, const FrameParams& fp, const QuadratureRule& q, unsigned seed);

/// beta with <g_beta - kappa, H2(1,1)>_rho = -1/(c_p tau0), where
/// g_beta = kappa (1 + beta (|z|^2 - 2n))^{-1/(p-1)}.
double matched_profile_beta(double tau0, const FrameParams& fp, const QuadratureRule& q);

/// g_beta with matched beta plus noise * orthogonal_noise.
Field canonical_datum(const ScenarioConfig& cfg, const FrameParams& fp, const Grid& grid, const QuadratureRule& q);

/// Bounded Fourier noise over a physical box, cosine modes, sup 1.
Field box_noise(const Grid& grid, unsigned seed);

/// A exp(-|x - shift e1|^2) on the box.
Field bump_datum(const Grid& grid, double A, double shift);

Grid rescaled_grid(const ScenarioConfig& cfg);
Grid physical_grid(const ScenarioConfig& cfg);

/// The shot, drifted canonical run and its residual history.
struct CanonicalRun {
  Field w0;  // datum including the shooting offset
  ShootResult shot;
  std::vector<double> residual_tau;
  std::vector<double> residual;
};
CanonicalRun canonical_profile_run(const ScenarioConfig& cfg);

// scenarios
ScenarioReport scenario_profile_convergence(const ScenarioConfig& cfg);
ScenarioReport scenario_dichotomy(const ScenarioConfig& cfg);
ScenarioReport scenario_stability_sweep(const ScenarioConfig& cfg);
ScenarioReport scenario_blowup_time_continuity(const ScenarioConfig& cfg);
ScenarioReport scenario_recenter_drift(const ScenarioConfig& cfg);

ScenarioReport run_scenario(const ScenarioConfig& cfg);

}  // namespace blowup
