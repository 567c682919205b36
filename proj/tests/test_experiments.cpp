#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "blowup/experiments.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace blowup;

namespace {

std::set<std::string> names(const ScenarioReport& r) {
  std::set<std::string> s;
  for (const auto& p : r.predicates) s.insert(p.name);
  return s;
}

const Predicate& find(const ScenarioReport& r, const std::string& name) {
  for (const auto& p : r.predicates)
    if (p.name == name) return p;
  throw std::runtime_error("missing predicate " + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  const auto d = ScenarioConfig::parse("[scenario]\nname = dichotomy\n");
  CHECK(d.scenario == "dichotomy");
  CHECK(d.n == 1);
  CHECK(d.p == 3.0);
  CHECK(d.extent == 20.0);
  CHECK(d.spacing == 0.05);
  CHECK(d.tau0 == 10.0);
  CHECK(d.epsilon == 1e-3);
  CHECK(d.deltas == std::vector<double>{1e-1, 1e-2, 1e-3});

  const auto c = ScenarioConfig::parse(
      "[scenario]\nname=stability-sweep\nn=2\nseed=9\n[physical]\ndeltas = 0.5, 0.05\nnoise_sign=-1\n"
      "[rescaled]\ntau0=12.5\n");
  CHECK(c.n == 2);
  CHECK(c.spacing == 0.2);  // two-dimensional default
  CHECK(c.seed == 9);
  CHECK(c.deltas == std::vector<double>{0.5, 0.05});
  CHECK(c.noise_sign == -1.0);
  CHECK(c.tau0 == 12.5);

  using testing::error_code;
  CHECK(error_code([] { ScenarioConfig::parse("[scenario]\nnmae=x\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[rescaled]\ndtau=fast\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[rescaled]\ndtau=0.5\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[physical]\ndeltas=0.1,,0.2\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[physical]\ndeltas=0.1,-0.2\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[physical]\namplitude=inf\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::parse("[scenario]\nn=4\n"); }) == Errc::unsupported_dimension);
  CHECK(error_code([] { ScenarioConfig::parse("[scenario]\nn=1.5\n"); }) == Errc::invalid_argument);
  CHECK(error_code([] { ScenarioConfig::load("/nonexistent/cfg.ini"); }) == Errc::io_failure);
}

TEST_CASE("canonical text round trips and drives the hash") {
  auto c = ScenarioConfig::defaults("time-continuity");
  c.deltas = {0.3, 0.03};
  c.physical_spacing = 0.02;
  const auto back = ScenarioConfig::parse(c.canonical_text());
  CHECK(back.canonical_text() == c.canonical_text());
  CHECK(back.hash() == c.hash());
  CHECK(c.hash().size() == 16);
  auto d = c;
  d.seed += 1;
  CHECK(d.hash() != c.hash());
  d = c;
  d.output_dir = "/tmp/elsewhere";  // where results go is not part of the experiment
  CHECK(d.hash() == c.hash());
}

TEST_CASE("report bookkeeping") {
  ScenarioReport r;
  r.scenario = "demo";
  r.add("a", 4, true, "ok");
  r.add("b", 5, false, "no");
  CHECK(!r.all_pass());
  CHECK(testing::error_code([&] { r.add("a", 4, true, ""); }) == Errc::invalid_argument);
  r.config_hash = "0123";
  r.code_version = code_version();
  Trajectory t;
  t.n = 1;
  t.samples.push_back({10.0, ModeVector(1), 0.0, 0.0, 0.7, std::nullopt});
  r.add_trajectory("demo_traj", t);
  const auto j = r.to_json();
  CHECK(j.at("scenario") == "demo");
  CHECK(j.at("pass") == false);
  CHECK(j.at("predicates").size() == 2);
  CHECK(j.at("predicates")[1].at("criterion") == 5);
  CHECK(j.at("provenance").at("config_hash") == "0123");
  CHECK(j.at("tables")[0] == "demo_traj.csv");

  const auto dir = std::filesystem::temp_directory_path() / "blowup_report_test";
  std::filesystem::remove_all(dir);
  r.write(dir.string());
  CHECK(std::filesystem::exists(dir / "demo.json"));
  CHECK(slurp(dir / "demo_traj.csv").rfind("tau,b0,b1_1,b2_diag_1,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("matched profile parameter") {
  for (std::size_t n : {1u, 2u}) {
    const auto fp = FrameParams::make(3.0, n);
    const auto q = build_quadrature(n, n == 1 ? 64 : 32);
    double prev = INFINITY;
    for (double tau0 : {10.0, 20.0, 40.0}) {
      const double beta = matched_profile_beta(tau0, fp, q);
      const double b2 = inner_product_rho(
          [&](const Point& z) {
            double r2 = 0.0;
            for (std::size_t J = 0; J < n; ++J) r2 += z[J] * z[J];
            return fp.kappa * std::pow(1.0 + beta * (r2 - 2.0 * n), -0.5) - fp.kappa;
          },
          [&](const Point& z) { return eval_eigenfunction(EigenIndex::h2(0, 0), z, fp); }, q);
      CHECK(std::abs(b2 * fp.c_p * tau0 + 1.0) < 1e-12);
      // tends to the first-order value (p-1)/(4 p tau0)
      const double rel = std::abs(beta / ((fp.p - 1.0) / (4.0 * fp.p * tau0)) - 1.0);
      CHECK(rel < 0.1);
      CHECK(rel < prev);
      prev = rel;
    }
  }
}

TEST_CASE("canonical noise is localized, bounded and orthogonal to the tracked modes") {
  for (std::size_t n : {1u, 2u}) {
    const auto fp = FrameParams::make(3.0, n);
    const auto q = build_quadrature(n, n == 1 ? 64 : 32);
    const auto grid = n == 1 ? Grid::symmetric(1, 20.0, 0.05) : Grid::symmetric(2, 12.0, 0.1);
    const Field eta = orthogonal_noise(grid, fp, q, 1);
    CHECK(eta.max_abs() == doctest::Approx(1.0).epsilon(1e-15));
    const ModalProjector proj(fp, q, grid);
    const auto m = proj.coefficients(proj.at_nodes(eta.values));
    for (double v : m.flat()) CHECK(std::abs(v) < 1e-14);
    // sizable remainder: the noise is not itself a tracked combination
    CHECK(norm_rho(eta, q) > 0.1);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid.coords(i).norm() > 14.0) CHECK(std::abs(eta.values[i]) < 1e-2);
    const Field again = orthogonal_noise(grid, fp, q, 1);
    CHECK(again.values == eta.values);
    CHECK(orthogonal_noise(grid, fp, q, 2).values != eta.values);
  }
}

TEST_CASE("physical data builders") {
  const auto g = Grid::box(1, -10.0, 10.0, 0.01);
  const Field eta = box_noise(g, 3);
  CHECK(eta.max_abs() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(box_noise(g, 3).values == eta.values);
  const Field b = bump_datum(g, 3.0, 0.3);
  CHECK(b.max() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(g.coords(b.argmax())[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(b.frame == Frame::physical);
}

TEST_CASE("stability sweep") {
  const auto cfg = ScenarioConfig::defaults("stability-sweep");
  const auto r = scenario_stability_sweep(cfg);
  CHECK(names(r) == std::set<std::string>{"perturbed_runs_blow_up", "time_deviation_nonincreasing",
                                          "recentered_residual_decreasing", "zero_delta_bit_identical",
                                          "flipped_noise_same_predicates"});
  CHECK(r.predicates.size() == 5);
  for (const auto& p : r.predicates) {
    CHECK(p.criterion == 8);
    INFO(p.name << ": " << p.detail);
    CHECK(p.pass);
  }
  // deterministic under a fixed seed: identical tables on a second invocation
  const auto again = scenario_stability_sweep(cfg);
  REQUIRE(again.tables.size() == r.tables.size());
  for (std::size_t i = 0; i < r.tables.size(); ++i) CHECK(again.tables[i].second == r.tables[i].second);
  CHECK(again.to_json().dump() == r.to_json().dump());
}

TEST_CASE("blowup time continuity") {
  const auto r = scenario_blowup_time_continuity(ScenarioConfig::defaults("time-continuity"));
  CHECK(names(r) == std::set<std::string>{"deviation_nonincreasing", "deviation_linear_bound",
                                          "zero_delta_zero_deviation", "negative_amplitude_same_predicates"});
  CHECK(find(r, "deviation_nonincreasing").pass);
  CHECK(find(r, "zero_delta_zero_deviation").pass);
  CHECK(find(r, "negative_amplitude_same_predicates").pass);
  // deviations shrink roughly linearly: one decade in delta, one decade in |dT|
  const auto& c = r.cases;
  const double d1 = c.at("delta_0.1").at("T_deviation");
  const double d2 = c.at("delta_0.01").at("T_deviation");
  const double d3 = c.at("delta_0.001").at("T_deviation");
  CHECK(d1 / d2 == doctest::Approx(10.0).epsilon(0.05));
  CHECK(d2 / d3 == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("recenter drift") {
  const auto cfg = ScenarioConfig::defaults("recenter-drift");
  const auto r = scenario_recenter_drift(cfg);
  CHECK(names(r) ==
        std::set<std::string>{"xi_inf_matches_shift", "even_data_stays_centered", "odd_drift_c_tau_bounded"});
  for (const auto& p : r.predicates) {
    INFO(p.name << ": " << p.detail);
    CHECK(p.pass);
  }
  // the odd case moves the blowup point; the drift integral follows it
  const double xi = r.cases.at("odd").at("xi_inf");
  const double point = r.cases.at("odd").at("point_est");
  CHECK(std::abs(xi) > 1e-3);
  CHECK(std::abs(xi - point) <= 2.0 * cfg.physical_spacing);
  CHECK(testing::error_code([&] {
          auto c2 = cfg;
          c2.n = 2;
          scenario_recenter_drift(c2);
        }) == Errc::unsupported_dimension);
}

TEST_CASE("short profile run reports every predicate once") {
  auto cfg = ScenarioConfig::defaults("profile-convergence");
  cfg.spacing = 0.1;
  cfg.dtau = 4e-3;
  cfg.tau_span = 6.0;
  cfg.tau_out = 0.2;
  const auto r = scenario_profile_convergence(cfg);
  CHECK(names(r) == std::set<std::string>{"b2_diag_tracks_profile", "wperp_tau2_bounded", "residual_end_below_early",
                                          "residual_smoothed_nonincreasing", "profile_exact_stays_near",
                                          "pde_ode_b2_agreement"});
  CHECK(r.predicates.size() == 6);
  // the late window and the 15-unit comparison do not fit in a 6-unit run
  CHECK(!find(r, "b2_diag_tracks_profile").pass);
  CHECK(!find(r, "pde_ode_b2_agreement").pass);
  CHECK(find(r, "pde_ode_b2_agreement").criterion == 7);
  const auto& canon = r.cases.at("canonical");
  CHECK(canon.at("survived") == true);
  CHECK(canon.at("residual").size() == canon.at("residual_tau").size());
  CHECK(find(r, "residual_end_below_early").pass);
}

TEST_CASE("run_scenario dispatch and output") {
  auto cfg = ScenarioConfig::defaults("recenter_drift");
  const auto dir = std::filesystem::temp_directory_path() / "blowup_scenario_test";
  std::filesystem::remove_all(dir);
  cfg.output_dir = dir.string();
  const auto r = run_scenario(cfg);
  CHECK(r.config_hash == cfg.hash());
  CHECK(r.code_version == std::string(code_version()));
  CHECK(std::filesystem::exists(dir / "recenter_drift.json"));
  CHECK(std::filesystem::exists(dir / "recenter_drift_shifted.csv"));
  const auto j = nlohmann::json::parse(slurp(dir / "recenter_drift.json"));
  CHECK(j.at("provenance").at("config_hash") == cfg.hash());
  std::filesystem::remove_all(dir);

  auto bad = ScenarioConfig::defaults("nonsense");
  CHECK(testing::error_code([&] { run_scenario(bad); }) == Errc::invalid_argument);
}
