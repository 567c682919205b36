// Command-line front end: one subcommand per experiment, configured by an
// INI file. Exit status 0 iff every predicate passes, 1 otherwise, 2 on error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blowup/error.hpp"
#include "blowup/experiments.hpp"
#include "blowup/recenter.hpp"

using namespace blowup;

namespace {

struct Common {
  std::string config;
  std::string out;
};

ScenarioConfig load_config(const Common& c, const std::string& scenario) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig::defaults(scenario) : ScenarioConfig::load(c.config);
  cfg.scenario = scenario;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (cfg.output_dir.empty()) cfg.output_dir = ".";
  return cfg;
}

void write_text(const ScenarioConfig& cfg, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream os(std::filesystem::path(cfg.output_dir) / name);
  os << text;
  if (!os) throw Error(Errc::io_failure, "cannot write " + name);
}

std::string csv_of(const Trajectory& t) {
  std::ostringstream os;
  t.write_csv(os);
  return os.str();
}

int report(const ScenarioReport& r) {
  for (const auto& p : r.predicates)
    std::cout << (p.pass ? "PASS " : "FAIL ") << "[" << p.criterion << "] " << p.name << ": " << p.detail << '\n';
  return r.all_pass() ? 0 : 1;
}

int basis_check(const ScenarioConfig& cfg) {
  const auto fp = FrameParams::make(cfg.p, cfg.n);
  const auto q = build_quadrature(cfg.n, cfg.quadrature_points);
  const auto basis = tracked_basis(cfg.n);
  double gram = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const double g = inner_product_rho(node_values(basis[a], fp, q), node_values(basis[b], fp, q), q);
      gram = std::max(gram, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  const auto grid = Grid::symmetric(cfg.n, cfg.n == 1 ? 10.0 : 6.0, cfg.spacing);
  double eig = 0.0;
  for (const auto& e : basis) {
    const Field f = sample_eigenfunction(e, grid, fp);
    const Field az = apply_Az(f);
    for (std::size_t i = 0; i < grid.size(); ++i) eig = std::max(eig, std::abs(az.values[i] + e.eigenvalue() * f.values[i]));
  }
  const nlohmann::json j{{"gram_max_deviation", gram}, {"eigen_relation_max_error", eig}, {"spacing", cfg.spacing}};
  write_text(cfg, "basis_check.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return gram < 1e-10 && eig < 1e-6 ? 0 : 1;
}

int simulate_rescaled(const ScenarioConfig& cfg) {
  const auto run = canonical_profile_run(cfg);
  write_text(cfg, "rescaled_trajectory.csv", csv_of(run.shot.trajectory));
  const nlohmann::json j{{"offset", run.shot.offset},
                         {"trials", run.shot.trials},
                         {"survived", run.shot.survived},
                         {"exit", to_string(run.shot.trajectory.exit)},
                         {"exit_tau", run.shot.trajectory.exit_tau},
                         {"residual_tau", run.residual_tau},
                         {"residual", run.residual},
                         {"config_hash", cfg.hash()}};
  write_text(cfg, "rescaled_run.json", j.dump(2) + "\n");
  std::cout << "exit " << to_string(run.shot.trajectory.exit) << " at tau " << run.shot.trajectory.exit_tau << '\n';
  return run.shot.survived ? 0 : 1;
}

int simulate_physical(const ScenarioConfig& cfg, bool snapshots) {
  const auto fp = FrameParams::make(cfg.p, cfg.n);
  PhysicalConfig pc;
  pc.p = cfg.p;
  pc.M_stop = cfg.m_stop;
  if (snapshots)
    for (int k = 2; k <= 10; ++k) pc.snapshot_levels.push_back(fp.kappa * std::pow(10.0, k / 2.0));
  const auto rep = run_to_blowup(bump_datum(physical_grid(cfg), cfg.amplitude, cfg.shift), pc);
  nlohmann::json j = rep;
  j["snapshots"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.snapshots.size(); ++i) {
    const std::string name = "snapshot_" + std::to_string(i) + ".bin";
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream os(std::filesystem::path(cfg.output_dir) / name, std::ios::binary);
    write_snapshot(os, rep.snapshots[i].u, rep.snapshots[i].t, cfg.p);
    j["snapshots"].push_back({{"file", name}, {"t", rep.snapshots[i].t}, {"level", rep.snapshots[i].level}});
  }
  j["config_hash"] = cfg.hash();
  write_text(cfg, "physical_report.json", j.dump(2) + "\n");
  std::ostringstream csv;
  csv << "t,sup,argmax_1\n" << std::setprecision(12);
  for (const auto& h : rep.history) csv << h.t << ',' << h.sup << ',' << h.argmax[0] << '\n';
  write_text(cfg, "physical_history.csv", csv.str());
  std::cout << "blew_up " << rep.blew_up << " T " << std::setprecision(10) << rep.T_est << " point "
            << rep.point_est[0] << '\n';
  return rep.blew_up ? 0 : 1;
}

int recenter(const ScenarioConfig& cfg, const std::string& path, double T, double a) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::io_failure, "cannot read snapshot " + path);
  const auto snap = read_snapshot(is);
  const auto fp = FrameParams::make(snap.p, snap.u.grid.dimension());
  const auto q = build_quadrature(fp.n, cfg.quadrature_points);
  Point center(fp.n);
  center[0] = a;
  const auto [w, tau] = rescale_to_similarity(snap.u, snap.t, T, center, fp, rescaled_grid(cfg));
  const auto cs = solve_center(w, fp, q);
  std::vector<double> xi(cs.xi.c.begin(), cs.xi.c.begin() + cs.xi.size());
  const nlohmann::json j{{"tau", tau},
                         {"xi", xi},
                         {"residual", cs.residual},
                         {"iterations", cs.iterations},
                         {"converged", cs.converged},
                         {"c1_ratio", cs.c1_ratio},
                         {"profile_residual", profile_residual(shifted(w, cs.xi), tau, fp, q)}};
  write_text(cfg, "recenter.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return cs.converged ? 0 : 1;
}

int modes(const ScenarioConfig& cfg, double b2, bool pin) {
  const auto fp = FrameParams::make(cfg.p, cfg.n);
  ModeODEState s{cfg.tau0, profile_modes(cfg.tau0, fp)};
  if (std::isfinite(b2))
    for (double& v : s.modes.b2_diag) v = b2;
  ModeODEOptions o;
  o.pin_unstable = pin;
  o.tau_out = cfg.tau_out;
  const auto t = integrate_modes(s, cfg.tau0 + cfg.tau_span, fp, o);
  write_text(cfg, "modes.csv", csv_of(t));
  std::cout << "exit " << to_string(t.exit) << " at tau " << t.exit_tau << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blowup laboratory for u_t = Lap u + |u|^{p-1} u"};
  app.require_subcommand(1);
  Common common;
  auto with_common = [&](CLI::App* sub) {
    sub->add_option("config", common.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", common.out, "output directory (overrides scenario.output_dir)");
    return sub;
  };

  auto* basis = with_common(app.add_subcommand("basis-check", "Gram matrix and eigen-relations of the tracked basis"));
  auto* resc = with_common(app.add_subcommand("simulate-rescaled", "canonical rescaled profile run"));
  bool snapshots = false;
  auto* phys = with_common(app.add_subcommand("simulate-physical", "physical run of the bump datum to blowup"));
  phys->add_flag("--snapshots", snapshots, "store binary snapshots at decades of sup|u|");
  std::string snap_path;
  double T = 0.0, a = 0.0;
  auto* rec = with_common(app.add_subcommand("recenter", "rescale a snapshot and solve for the center"));
  rec->add_option("--snapshot", snap_path, "binary snapshot")->required();
  rec->add_option("--T", T, "blowup time")->required();
  rec->add_option("--point", a, "rescaling center along the first axis");
  double b2 = NAN;
  bool pin = true;
  auto* mod = with_common(app.add_subcommand("modes", "integrate the reduced mode ODE"));
  mod->add_option("--b2", b2, "initial diagonal b2 (default: profile value at tau0)");
  mod->add_flag("!--free", pin, "let b0 and b1 evolve");

  const std::vector<std::pair<std::string, std::string>> scenarios{
      {"profile-convergence", "canonical profile convergence"},
      {"dichotomy", "H0 dichotomy branches"},
      {"stability-sweep", "noise sweep on the bump datum"},
      {"time-continuity", "blowup time against perturbation size"},
      {"recenter-drift", "blowup point from the integrated drift"}};
  std::vector<CLI::App*> scenario_apps;
  for (const auto& [name, help] : scenarios) scenario_apps.push_back(with_common(app.add_subcommand(name, help)));

  CLI11_PARSE(app, argc, argv);
  try {
    if (basis->parsed()) return basis_check(load_config(common, "basis-check"));
    if (resc->parsed()) return simulate_rescaled(load_config(common, "simulate-rescaled"));
    if (phys->parsed()) return simulate_physical(load_config(common, "simulate-physical"), snapshots);
    if (rec->parsed()) return recenter(load_config(common, "recenter"), snap_path, T, a);
    if (mod->parsed()) return modes(load_config(common, "modes"), b2, pin);
    for (std::size_t i = 0; i < scenarios.size(); ++i)
      if (scenario_apps[i]->parsed()) return report(run_scenario(load_config(common, scenarios[i].first)));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
