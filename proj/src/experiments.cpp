#include "blowup/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <Eigen/Dense>

#include "blowup/error.hpp"
#include "blowup/recenter.hpp"

#ifndef BLOWUP_VERSION
#define BLOWUP_VERSION "0.0.0"
#endif

namespace blowup {

const char* code_version() { return BLOWUP_VERSION; }

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size() || text.empty()) throw Error(Errc::invalid_argument, "key " + key + ": not a number: " + text);
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) throw Error(Errc::invalid_argument, "key " + key + ": empty list entry");
    out.push_back(parse_number(key, item.substr(a, b - a + 1)));
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (!(v >= 0.0) || v != std::floor(v)) throw Error(Errc::invalid_argument, "key " + key + ": not a count: " + text);
  return static_cast<std::size_t>(v);
}

void validate(const ScenarioConfig& c) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (c.n < 1 || c.n > 3) throw Error(Errc::unsupported_dimension, "n must be 1, 2 or 3");
  if (!(c.p > 1.0) || !finite(c.p)) throw Error(Errc::invalid_argument, "p must exceed 1");
  for (double v : {c.extent, c.spacing, c.dtau, c.tau0, c.tau_span, c.tau_out, c.box, c.physical_spacing, c.m_stop,
                   c.horizon, c.control_horizon, c.drift_span})
    if (!(v > 0.0) || !finite(v)) throw Error(Errc::invalid_argument, "grid and solver settings must be positive");
  for (double v : {c.noise, c.epsilon, c.threshold_epsilon, c.amplitude, c.noise_sign, c.shift, c.odd_amplitude})
    if (!finite(v)) throw Error(Errc::invalid_argument, "amplitudes must be finite");
  if (c.deltas.empty()) throw Error(Errc::invalid_argument, "deltas must not be empty");
  for (double d : c.deltas)
    if (!(d > 0.0) || !finite(d)) throw Error(Errc::invalid_argument, "deltas must be positive and finite");
  if (c.dtau > kMaxRescaledStep) throw Error(Errc::invalid_argument, "dtau exceeds the largest accepted step");
}

void ensure_writable(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = std::filesystem::path(dir) / ".write_probe";
  std::ofstream os(probe);
  if (!os) throw Error(Errc::io_failure, "output directory not writable: " + dir);
  os.close();
  std::filesystem::remove(probe, ec);
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults(const std::string& scenario, std::size_t n) {
  ScenarioConfig c;
  c.scenario = scenario;
  c.n = n;
  if (n >= 2) {
    c.extent = 12.0;
    c.spacing = 0.2;
    c.dtau = 1e-2;
    c.quadrature_points = 24;
    c.box = 6.0;
    c.physical_spacing = 0.05;
  }
  return c;
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  const auto name = tree.get<std::string>("scenario.name", "");
  const auto n_text = tree.get_optional<std::string>("scenario.n");
  ScenarioConfig c = defaults(name, n_text ? parse_count("scenario.n", *n_text) : 1);

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& f) -> Setter { return [&f](const std::string& k, const std::string& v) { f = parse_number(k, v); }; };
  auto cnt = [](std::size_t& f) -> Setter {
    return [&f](const std::string& k, const std::string& v) { f = parse_count(k, v); };
  };
  const std::map<std::string, Setter> setters{
      {"scenario.name", [&](const std::string&, const std::string& v) { c.scenario = v; }},
      {"scenario.n", cnt(c.n)},
      {"scenario.p", num(c.p)},
      {"scenario.seed", [&](const std::string& k, const std::string& v) { c.seed = static_cast<unsigned>(parse_count(k, v)); }},
      {"scenario.output_dir", [&](const std::string&, const std::string& v) { c.output_dir = v; }},
      {"rescaled.extent", num(c.extent)},
      {"rescaled.spacing", num(c.spacing)},
      {"rescaled.dtau", num(c.dtau)},
      {"rescaled.tau0", num(c.tau0)},
      {"rescaled.tau_span", num(c.tau_span)},
      {"rescaled.tau_out", num(c.tau_out)},
      {"rescaled.quadrature_points", cnt(c.quadrature_points)},
      {"rescaled.noise", num(c.noise)},
      {"dichotomy.epsilon", num(c.epsilon)},
      {"dichotomy.threshold_epsilon", num(c.threshold_epsilon)},
      {"dichotomy.horizon", num(c.horizon)},
      {"dichotomy.control_horizon", num(c.control_horizon)},
      {"physical.amplitude", num(c.amplitude)},
      {"physical.box", num(c.box)},
      {"physical.spacing", num(c.physical_spacing)},
      {"physical.m_stop", num(c.m_stop)},
      {"physical.deltas", [&](const std::string& k, const std::string& v) { c.deltas = parse_list(k, v); }},
      {"physical.noise_sign", num(c.noise_sign)},
      {"physical.shift", num(c.shift)},
      {"physical.odd_amplitude", num(c.odd_amplitude)},
      {"physical.drift_span", num(c.drift_span)},
  };
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(Errc::invalid_argument, "config: key outside a section: " + section);
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters.find(full);
      if (it == setters.end()) throw Error(Errc::invalid_argument, "config: unknown key " + full);
      it->second(full, value.data());
    }
  }
  validate(c);
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io_failure, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ScenarioConfig::canonical_text() const {
  std::ostringstream os;
  os << "[scenario]\nname=" << scenario << "\nn=" << n << "\np=" << exact(p) << "\nseed=" << seed
     << "\n[rescaled]\nextent=" << exact(extent) << "\nspacing=" << exact(spacing) << "\ndtau=" << exact(dtau)
     << "\ntau0=" << exact(tau0) << "\ntau_span=" << exact(tau_span) << "\ntau_out=" << exact(tau_out)
     << "\nquadrature_points=" << quadrature_points << "\nnoise=" << exact(noise)
     << "\n[dichotomy]\nepsilon=" << exact(epsilon) << "\nthreshold_epsilon=" << exact(threshold_epsilon)
     << "\nhorizon=" << exact(horizon) << "\ncontrol_horizon=" << exact(control_horizon)
     << "\n[physical]\namplitude=" << exact(amplitude) << "\nbox=" << exact(box)
     << "\nspacing=" << exact(physical_spacing) << "\nm_stop=" << exact(m_stop) << "\ndeltas=";
  for (std::size_t i = 0; i < deltas.size(); ++i) os << (i ? "," : "") << exact(deltas[i]);
  os << "\nnoise_sign=" << exact(noise_sign) << "\nshift=" << exact(shift) << "\nodd_amplitude=" << exact(odd_amplitude)
     << "\ndrift_span=" << exact(drift_span) << '\n';
  return os.str();
}

std::string ScenarioConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool ScenarioReport::all_pass() const {
  return std::all_of(predicates.begin(), predicates.end(), [](const Predicate& p) { return p.pass; });
}

void ScenarioReport::add(const std::string& name, int criterion, bool pass, const std::string& detail) {
  for (const auto& p : predicates)
    if (p.name == name) throw Error(Errc::invalid_argument, "duplicate predicate " + name);
  predicates.push_back({name, criterion, pass, detail});
}

void ScenarioReport::add_trajectory(const std::string& stem, const Trajectory& t) {
  std::ostringstream os;
  t.write_csv(os);
  tables.emplace_back(stem, os.str());
}

nlohmann::json ScenarioReport::to_json() const {
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : predicates)
    preds.push_back({{"name", p.name}, {"criterion", p.criterion}, {"pass", p.pass}, {"detail", p.detail}});
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : tables) files.push_back(t.first + ".csv");
  return {{"scenario", scenario},
          {"pass", all_pass()},
          {"cases", cases},
          {"predicates", preds},
          {"tables", files},
          {"provenance", {{"config_hash", config_hash}, {"code_version", code_version}}}};
}

void ScenarioReport::write(const std::string& dir) const {
  ensure_writable(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream os(base / (scenario + ".json"));
    os << to_json().dump(2) << '\n';
    if (!os) throw Error(Errc::io_failure, "cannot write report to " + dir);
  }
  for (const auto& [stem, csv] : tables) {
    std::ofstream os(base / (stem + ".csv"));
    os << csv;
    if (!os) throw Error(Errc::io_failure, "cannot write " + stem + ".csv");
  }
}

// data builders

Field orthogonal_noise(const Grid& grid, const FrameParams& fp, const QuadratureRule& q, unsigned seed) {
  const std::size_t n = fp.n;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> dir(0.0, 1.0);
  struct Term {
    double a, phi;
    Point f;
  };
  std::vector<Term> terms;
  for (int k = 1; k <= 4; ++k) {
    Point d(n);
    double len = 0.0;
    while (len < 1e-8) {
      for (std::size_t J = 0; J < n; ++J) d[J] = n == 1 ? 1.0 : dir(rng);
      len = d.norm();
    }
    const double a = amp(rng);
    const double phi = phase(rng);
    terms.push_back({a, phi, (0.5 * k / len) * d});
  }
  auto window = [](const Point& z) {
    double r2 = 0.0;
    for (std::size_t J = 0; J < z.size(); ++J) r2 += z[J] * z[J];
    return std::exp(-r2 / 16.0);
  };
  auto raw = [&](const Point& z) {
    double s = 0.0;
    for (const auto& t : terms) {
      double arg = t.phi;
      for (std::size_t J = 0; J < z.size(); ++J) arg += t.f[J] * z[J];
      s += t.a * std::cos(arg);
    }
    return window(z) * s;
  };

  // remove the tracked components, as seen by the grid projector, with
  // localized corrections H e^{-|z|^2/16}
  const ModalProjector proj(fp, q, grid);
  const auto basis = tracked_basis(n);
  const std::size_t K = basis.size();
  Field eta = sample(grid, Frame::similarity, raw);
  std::vector<Field> phi;
  for (const auto& idx : basis)
    phi.push_back(sample(grid, Frame::similarity, [&](const Point& z) { return eval_eigenfunction(idx, z, fp) * window(z); }));
  Eigen::MatrixXd G(K, K);
  Eigen::VectorXd r(K);
  const ModeVector c_raw = proj.coefficients(proj.at_nodes(eta.values));
  for (std::size_t b = 0; b < K; ++b) {
    const ModeVector c_phi = proj.coefficients(proj.at_nodes(phi[b].values));
    for (std::size_t a = 0; a < K; ++a) G(a, b) = c_phi[a];
  }
  for (std::size_t a = 0; a < K; ++a) r(a) = c_raw[a];
  const Eigen::VectorXd x = G.partialPivLu().solve(r);
  for (std::size_t b = 0; b < K; ++b)
    for (std::size_t i = 0; i < eta.values.size(); ++i) eta.values[i] -= x(b) * phi[b].values[i];
  const double sup = eta.max_abs();
  if (!(sup > 0.0)) throw Error(Errc::invalid_argument, "noise vanished");
  for (double& v : eta.values) v /= sup;
  return eta;
}

namespace {

double g_beta(const Point& z, double beta, const FrameParams& fp) {
  double r2 = 0.0;
  for (std::size_t J = 0; J < z.size(); ++J) r2 += z[J] * z[J];
  const double base = 1.0 + beta * (r2 - 2.0 * static_cast<double>(fp.n));
  if (!(base > 0.0)) throw Error(Errc::outside_profile_domain, "profile base is not positive");
  return fp.kappa * std::pow(base, -1.0 / (fp.p - 1.0));
}

}  // namespace

double matched_profile_beta(double tau0, const FrameParams& fp, const QuadratureRule& q) {
  const double target = -1.0 / (fp.c_p * tau0);
  const auto h2 = node_values(EigenIndex::h2(0, 0), fp, q);
  auto f = [&](double beta) {
    const auto g = node_values([&](const Point& z) { return g_beta(z, beta, fp) - fp.kappa; }, q);
    return inner_product_rho(g, h2, q) - target;
  };
  const double first = (fp.p - 1.0) / (4.0 * fp.p * tau0);
  const double hi = std::min(2.0 * first, 0.99 / (2.0 * static_cast<double>(fp.n)));
  double lo = 0.5 * first;
  if (!(f(lo) * f(hi) < 0.0)) throw Error(Errc::invalid_argument, "no matched profile parameter for this tau0");
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b);
}

Field canonical_datum(const ScenarioConfig& cfg, const FrameParams& fp, const Grid& grid, const QuadratureRule& q) {
  const double beta = matched_profile_beta(cfg.tau0, fp, q);
  Field w = sample(grid, Frame::similarity, [&](const Point& z) { return g_beta(z, beta, fp); });
  if (cfg.noise != 0.0) {
    const Field eta = orthogonal_noise(grid, fp, q, cfg.seed);
    for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] += cfg.noise * eta.values[i];
  }
  return w;
}

Field box_noise(const Grid& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const std::size_t n = grid.dimension();
  struct Term {
    double a;
    std::vector<int> k;
    std::vector<double> phi;
  };
  std::vector<Term> terms;
  for (int t = 0; t < 6; ++t) {
    Term term{amp(rng), {}, {}};
    for (std::size_t J = 0; J < n; ++J) {
      term.k.push_back(1 + static_cast<int>(rng() % 6));
      term.phi.push_back(phase(rng));
    }
    terms.push_back(std::move(term));
  }
  Field eta = sample(grid, Frame::physical, [&](const Point& x) {
    double s = 0.0;
    for (const auto& t : terms) {
      double v = t.a;
      for (std::size_t J = 0; J < n; ++J) {
        const auto& ax = grid.axis(J);
        v *= std::cos(t.k[J] * std::numbers::pi * (x[J] - ax.lo) / (ax.hi - ax.lo) + t.phi[J]);
      }
      s += v;
    }
    return s;
  });
  const double sup = eta.max_abs();
  for (double& v : eta.values) v /= sup;
  return eta;
}

Field bump_datum(const Grid& grid, double A, double shift) {
  return sample(grid, Frame::physical, [&](const Point& x) {
    double r2 = 0.0;
    for (std::size_t J = 0; J < x.size(); ++J) {
      const double d = x[J] - (J == 0 ? shift : 0.0);
      r2 += d * d;
    }
    return A * std::exp(-r2);
  });
}

Grid rescaled_grid(const ScenarioConfig& cfg) { return Grid::symmetric(cfg.n, cfg.extent, cfg.spacing); }
Grid physical_grid(const ScenarioConfig& cfg) { return Grid::box(cfg.n, -cfg.box, cfg.box, cfg.physical_spacing); }

namespace {

struct Setup {
  FrameParams fp;
  QuadratureRule q;
  Grid grid;
};

Setup rescaled_setup(const ScenarioConfig& cfg) {
  return {FrameParams::make(cfg.p, cfg.n), build_quadrature(cfg.n, cfg.quadrature_points), rescaled_grid(cfg)};
}

RescaledRunOptions drifted(const ScenarioConfig& cfg) {
  RescaledRunOptions o;
  o.dtau = cfg.dtau;
  o.tau_out = cfg.tau_out;
  o.drift = DriftMode::orthogonality;
  return o;
}

// Shoots w0 over [tau0, tau_end] and reruns the survivor recording residuals.
CanonicalRun shoot_and_record(const Field& w0, double tau0, double tau_end, const Setup& s, const ScenarioConfig& cfg) {
  CanonicalRun out;
  auto opts = drifted(cfg);
  out.shot = shoot_h0(w0, tau0, tau_end, s.fp, s.q, opts);
  out.w0 = w0;
  for (double& v : out.w0.values) v += out.shot.offset;
  opts.observer = [&](const RescaledState& st) {
    out.residual_tau.push_back(st.tau);
    out.residual.push_back(profile_residual(st.w, st.tau, s.fp, s.q));
  };
  out.shot.trajectory = run_rescaled(out.w0, tau0, tau_end, s.fp, s.q, opts);
  return out;
}

nlohmann::json exit_json(const Trajectory& t) { return {{"exit", to_string(t.exit)}, {"exit_tau", t.exit_tau}}; }

}  // namespace

CanonicalRun canonical_profile_run(const ScenarioConfig& cfg) {
  const auto s = rescaled_setup(cfg);
  return shoot_and_record(canonical_datum(cfg, s.fp, s.grid, s.q), cfg.tau0, cfg.tau0 + cfg.tau_span, s, cfg);
}

ScenarioReport scenario_profile_convergence(const ScenarioConfig& cfg) {
  const auto s = rescaled_setup(cfg);
  ScenarioReport rep;
  rep.scenario = "profile_convergence";
  const double tau0 = cfg.tau0;
  const double tau_end = tau0 + cfg.tau_span;
  const auto run = canonical_profile_run(cfg);
  const auto& samples = run.shot.trajectory.samples;
  const bool survived = run.shot.survived && run.shot.trajectory.exit == RunExit::completed;
  rep.cases["canonical"] = {{"beta", matched_profile_beta(tau0, s.fp, s.q)},
                            {"offset", run.shot.offset},
                            {"trials", run.shot.trials},
                            {"survived", survived},
                            {"run", exit_json(run.shot.trajectory)},
                            {"residual_tau", run.residual_tau},
                            {"residual", run.residual}};
  rep.add_trajectory("profile_convergence_canonical", run.shot.trajectory);

  // |b2(1,1) c_p tau + 1| on the late window
  double k1 = survived ? 0.0 : INFINITY;
  std::size_t in_window = 0;
  for (const auto& smp : samples)
    if (smp.tau >= tau0 + 10.0 - 1e-9 && smp.tau <= tau0 + 25.0 + 1e-9) {
      ++in_window;
      for (double b : smp.modes.b2_diag) k1 = std::max(k1, std::abs(b * s.fp.c_p * smp.tau + 1.0));
    }
  rep.add("b2_diag_tracks_profile", 4, in_window > 0 && k1 < 0.1,
          "max |b2 c_p tau + 1| on [tau0+10, tau0+25] = " + fmt(k1) + " over " + std::to_string(in_window) +
              " samples");

  // ||w_perp|| tau^2: constant fitted on the first half, second half within twice it
  const double mid = tau0 + 0.5 * cfg.tau_span;
  double first = 0.0, second = 0.0;
  for (const auto& smp : samples) {
    const double v = smp.wperp_l2 * smp.tau * smp.tau;
    (smp.tau <= mid ? first : second) = std::max(smp.tau <= mid ? first : second, v);
  }
  rep.cases["canonical"]["wperp_tau2_fit"] = first;
  rep.add("wperp_tau2_bounded", 4, survived && second <= 2.0 * first,
          "max ||w_perp|| tau^2: first half " + fmt(first) + ", second half " + fmt(second));

  // residual trend
  auto residual_at = [&](double tau) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < run.residual_tau.size(); ++i)
      if (std::abs(run.residual_tau[i] - tau) < std::abs(run.residual_tau[best] - tau)) best = i;
    return run.residual[best];
  };
  const double r5 = residual_at(tau0 + 5.0);
  const double rend = residual_at(tau_end);
  rep.add("residual_end_below_early", 4, survived && rend < r5,
          "residual(tau0+5) = " + fmt(r5) + ", residual(tau_end) = " + fmt(rend));

  std::vector<double> unit_tau, unit_res;
  for (std::size_t i = 0; i < run.residual_tau.size(); ++i) {
    const double k = run.residual_tau[i] - tau0;
    if (std::abs(k - std::round(k)) < 1e-6) {
      unit_tau.push_back(run.residual_tau[i]);
      unit_res.push_back(run.residual[i]);
    }
  }
  bool monotone = survived && unit_res.size() >= 5;
  std::vector<double> smooth;
  for (std::size_t i = 4; i < unit_res.size(); ++i) {
    double a = 0.0;
    for (std::size_t k = i - 4; k <= i; ++k) a += unit_res[k];
    smooth.push_back(a / 5.0);
    if (unit_tau[i] >= mid && smooth.size() >= 2 && unit_tau[i - 1] >= mid &&
        smooth.back() > smooth[smooth.size() - 2])
      monotone = false;
  }
  rep.cases["canonical"]["residual_smoothed"] = smooth;
  rep.add("residual_smoothed_nonincreasing", 4, monotone,
          "5-sample moving average of the unit-spaced residual over the final half");

  // profile-exact datum
  {
    ScenarioConfig exact_cfg = cfg;
    exact_cfg.noise = 0.0;
    const auto ex = shoot_and_record(canonical_datum(exact_cfg, s.fp, s.grid, s.q), tau0, tau0 + 10.0, s, exact_cfg);
    const bool ok = ex.shot.survived && !ex.residual.empty();
    const double r0 = ok ? ex.residual.front() : INFINITY;
    const double rmax = ok ? *std::max_element(ex.residual.begin(), ex.residual.end()) : INFINITY;
    rep.cases["profile_exact"] = {{"offset", ex.shot.offset}, {"run", exit_json(ex.shot.trajectory)},
                                  {"residual_initial", r0}, {"residual_max", rmax}};
    rep.add_trajectory("profile_convergence_exact", ex.shot.trajectory);
    rep.add("profile_exact_stays_near", 4, ok && rmax < 2.0 * r0,
            "residual initial " + fmt(r0) + ", max through tau0+10 " + fmt(rmax));
  }

  // b2(1,1) against the pinned mode ODE from the same initial coefficient
  {
    const double span = std::min(15.0, cfg.tau_span);
    ModeODEState s0{tau0, ModeVector(cfg.n)};
    s0.modes.b2_diag = samples.front().modes.b2_diag;
    ModeODEOptions mo;
    mo.pin_unstable = true;
    mo.tau_out = cfg.tau_out;
    const auto ode = integrate_modes(s0, tau0 + span, s.fp, mo);
    double worst = survived ? 0.0 : INFINITY;
    for (const auto& o : ode.samples) {
      for (const auto& smp : samples) {
        if (std::abs(smp.tau - o.tau) > 1e-6) continue;
        worst = std::max(worst, std::abs(smp.modes.b2_diag[0] - o.modes.b2_diag[0]) / std::abs(o.modes.b2_diag[0]));
      }
    }
    rep.cases["canonical"]["pde_ode_b2_max_rel"] = worst;
    rep.add_trajectory("profile_convergence_ode", ode);
    rep.add("pde_ode_b2_agreement", 7, span >= 15.0 && worst <= 0.05,
            "max relative b2(1,1) deviation over " + fmt(span) + " = " + fmt(worst));
  }
  return rep;
}

ScenarioReport scenario_dichotomy(const ScenarioConfig& cfg) {
  const auto s = rescaled_setup(cfg);
  ScenarioReport rep;
  rep.scenario = "dichotomy";
  const double tau0 = cfg.tau0;
  auto opts = drifted(cfg);
  auto shot = shoot_h0(canonical_datum(cfg, s.fp, s.grid, s.q), tau0, tau0 + cfg.control_horizon, s.fp, s.q, opts);
  Field base = canonical_datum(cfg, s.fp, s.grid, s.q);
  for (double& v : base.values) v += shot.offset;
  const double h0 = s.fp.k0n();
  auto branch = [&](double eps, double horizon) {
    Field w = base;
    for (double& v : w.values) v += eps * h0;
    return run_rescaled(w, tau0, tau0 + horizon, s.fp, s.q, opts);
  };
  const double threshold = 4.0 * s.fp.p * std::pow(s.fp.kappa, s.fp.p - 1.0) / h0 *
                           std::exp(-3.0 * tau0 / (4.0 * (s.fp.p - 1.0)));
  auto plus = std::async(std::launch::async, branch, cfg.epsilon, cfg.horizon);
  auto minus = std::async(std::launch::async, branch, -cfg.epsilon, cfg.horizon);
  auto zero = std::async(std::launch::async, branch, 0.0, cfg.control_horizon);
  auto tiny = std::async(std::launch::async, branch, cfg.threshold_epsilon, cfg.control_horizon);
  const auto tp = plus.get(), tm = minus.get(), tz = zero.get(), tt = tiny.get();
  rep.cases = {{"offset", shot.offset},
               {"trials", shot.trials},
               {"threshold", threshold},
               {"plus", exit_json(tp)},
               {"minus", exit_json(tm)},
               {"zero", exit_json(tz)},
               {"threshold_epsilon", exit_json(tt)}};
  rep.add_trajectory("dichotomy_plus", tp);
  rep.add_trajectory("dichotomy_minus", tm);
  rep.add_trajectory("dichotomy_zero", tz);
  rep.add_trajectory("dichotomy_threshold", tt);
  rep.add("plus_branch_blows_up", 5, tp.exit == RunExit::rescaled_blowup,
          std::string("+eps exit ") + to_string(tp.exit) + " at tau " + fmt(tp.exit_tau));
  rep.add("minus_branch_quenches", 5, tm.exit == RunExit::quench,
          std::string("-eps exit ") + to_string(tm.exit) + " at tau " + fmt(tm.exit_tau));
  rep.add("zero_branch_neutral", 5, tz.exit == RunExit::completed,
          std::string("eps = 0 exit ") + to_string(tz.exit) + " at tau " + fmt(tz.exit_tau));
  rep.add("below_threshold_neutral", 5, cfg.threshold_epsilon < threshold && tt.exit == RunExit::completed,
          "eps " + fmt(cfg.threshold_epsilon) + " vs threshold " + fmt(threshold) + ", exit " + to_string(tt.exit));
  return rep;
}

namespace {

struct PhysicalCase {
  std::string name;
  double delta = 0.0;
  double sign = 1.0;
  BlowupReport rep;
  std::vector<double> tau, residual;
  std::vector<Point> xi;
};

PhysicalConfig physical_config(const ScenarioConfig& cfg, const FrameParams& fp) {
  PhysicalConfig pc;
  pc.p = cfg.p;
  pc.M_stop = cfg.m_stop;
  for (int k = 2; k <= 10; ++k) pc.snapshot_levels.push_back(fp.kappa * std::pow(10.0, k / 2.0));
  return pc;
}

// Rescales the resolved snapshots about the estimated point, recenters and
// records the profile residual of the recentered field.
void analyze(PhysicalCase& c, const ScenarioConfig& cfg, const Setup& s) {
  if (!c.rep.blew_up) return;
  double off = 0.0;
  for (std::size_t J = 0; J < cfg.n; ++J) off = std::max(off, std::abs(c.rep.point_est[J]));
  for (const auto& snap : c.rep.snapshots) {
    const double width = std::sqrt(c.rep.T_est - snap.t);
    if (cfg.extent * width + off > cfg.box || cfg.physical_spacing / width > 1.2) continue;
    const auto [w, tau] = rescale_to_similarity(snap.u, snap.t, c.rep.T_est, c.rep.point_est, s.fp, s.grid);
    const auto cs = solve_center(w, s.fp, s.q, {.xi0 = Point(cfg.n)});
    c.tau.push_back(tau);
    c.xi.push_back(cs.xi);
    c.residual.push_back(profile_residual(shifted(w, cs.xi), tau, s.fp, s.q));
  }
}

bool residual_decreasing(const PhysicalCase& c) {
  if (c.residual.size() < 2) return false;
  for (std::size_t i = 1; i < c.residual.size(); ++i)
    if (!(c.residual[i] < c.residual[i - 1])) return false;
  return true;
}

std::vector<PhysicalCase> run_physical_cases(const ScenarioConfig& cfg, const Setup& s,
                                             const std::vector<std::pair<double, double>>& deltas) {
  const Grid pg = physical_grid(cfg);
  const Field bump = bump_datum(pg, cfg.amplitude, 0.0);
  const Field eta = box_noise(pg, cfg.seed);
  const auto pc = physical_config(cfg, s.fp);
  std::vector<std::future<PhysicalCase>> jobs;
  for (const auto& [delta, sign] : deltas) {
    jobs.push_back(std::async(std::launch::async, [&, delta, sign] {
      PhysicalCase c;
      c.delta = delta;
      c.sign = sign;
      c.name = delta == 0.0 ? "delta_0" : (sign < 0 ? "delta_-" : "delta_") + fmt(delta);
      Field u0 = bump;
      if (delta != 0.0)
        for (std::size_t i = 0; i < u0.values.size(); ++i) u0.values[i] += sign * delta * eta.values[i];
      c.rep = run_to_blowup(u0, pc);
      analyze(c, cfg, s);
      return c;
    }));
  }
  std::vector<PhysicalCase> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

std::string history_csv(const BlowupReport& r) {
  std::ostringstream os;
  const std::size_t n = r.point_est.size();
  os << "t,sup";
  for (std::size_t J = 1; J <= n; ++J) os << ",argmax_" << J;
  os << '\n' << std::setprecision(12);
  for (const auto& h : r.history) {
    os << h.t << ',' << h.sup;
    for (std::size_t J = 0; J < n; ++J) os << ',' << h.argmax[J];
    os << '\n';
  }
  return os.str();
}

nlohmann::json case_json(const PhysicalCase& c, const PhysicalCase& base) {
  double drift = 0.0;
  for (std::size_t J = 0; J < c.rep.point_est.size(); ++J)
    drift = std::max(drift, std::abs(c.rep.point_est[J] - base.rep.point_est[J]));
  std::vector<double> xi0;
  for (const auto& x : c.xi) xi0.push_back(x[0]);
  return {{"delta", c.delta},
          {"sign", c.sign},
          {"blew_up", c.rep.blew_up},
          {"T", c.rep.T_est},
          {"T_deviation", std::abs(c.rep.T_est - base.rep.T_est)},
          {"point", std::vector<double>(c.rep.point_est.c.begin(), c.rep.point_est.c.begin() + c.rep.point_est.size())},
          {"point_drift", drift},
          {"rate_slope", c.rep.rate_slope},
          {"r_squared", c.rep.r_squared},
          {"residual_tau", c.tau},
          {"residual", c.residual},
          {"recenter_xi_1", xi0},
          {"final_residual", c.residual.empty() ? NAN : c.residual.back()},
          {"warnings", c.rep.warnings}};
}

std::string sweep_csv(const std::vector<PhysicalCase>& cases, const PhysicalCase& base) {
  std::ostringstream os;
  os << "case,delta,sign,blew_up,T,T_deviation,point_1,final_residual\n" << std::setprecision(12);
  for (const auto& c : cases)
    os << c.name << ',' << c.delta << ',' << c.sign << ',' << c.rep.blew_up << ',' << c.rep.T_est << ','
       << std::abs(c.rep.T_est - base.rep.T_est) << ',' << c.rep.point_est[0] << ','
       << (c.residual.empty() ? NAN : c.residual.back()) << '\n';
  return os.str();
}

bool identical(const BlowupReport& a, const BlowupReport& b) {
  if (a.T_est != b.T_est || a.history.size() != b.history.size() || a.final_sup != b.final_sup) return false;
  for (std::size_t J = 0; J < a.point_est.size(); ++J)
    if (a.point_est[J] != b.point_est[J]) return false;
  for (std::size_t i = 0; i < a.history.size(); ++i)
    if (a.history[i].t != b.history[i].t || a.history[i].sup != b.history[i].sup) return false;
  return true;
}

// deviations ordered by decreasing delta
std::vector<std::pair<double, double>> deviations(const std::vector<PhysicalCase>& cases, const PhysicalCase& base,
                                                  double sign) {
  std::vector<std::pair<double, double>> d;
  for (const auto& c : cases)
    if (c.delta > 0.0 && c.sign == sign) d.emplace_back(c.delta, std::abs(c.rep.T_est - base.rep.T_est));
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return d;
}

bool nonincreasing(const std::vector<std::pair<double, double>>& d) {
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i].second > d[i - 1].second) return false;
  return !d.empty();
}

std::string list_deviations(const std::vector<std::pair<double, double>>& d) {
  std::string s;
  for (const auto& [delta, dev] : d) s += (s.empty() ? "" : ", ") + fmt(delta) + ": " + fmt(dev);
  return "|T_delta - T| by delta {" + s + "}";
}

std::pair<bool, std::string> linear_bound(const std::vector<std::pair<double, double>>& d) {
  if (d.empty()) return {false, "no cases"};
  const double C = d.front().second / d.front().first;
  bool ok = true;
  std::string s = "C = " + fmt(C) + " fitted at delta " + fmt(d.front().first) + ";";
  for (const auto& [delta, dev] : d) {
    // the fitted case meets its own bound up to rounding of C * delta
    const bool pass = dev <= C * delta * (1.0 + 1e-12);
    ok = ok && pass;
    s += " " + fmt(delta) + ": " + fmt(dev / delta) + (pass ? "" : " (exceeds)");
  }
  return {ok, s + " (|dT|/delta)"};
}

}  // namespace

ScenarioReport scenario_stability_sweep(const ScenarioConfig& cfg) {
  const auto s = rescaled_setup(cfg);
  ScenarioReport rep;
  rep.scenario = "stability_sweep";
  std::vector<std::pair<double, double>> plan{{0.0, 1.0}, {0.0, 1.0}};
  for (double d : cfg.deltas) plan.emplace_back(d, cfg.noise_sign);
  plan.emplace_back(1e-2, -cfg.noise_sign);
  auto cases = run_physical_cases(cfg, s, plan);
  const PhysicalCase base = cases[0];
  const PhysicalCase zero = cases[1];
  std::vector<PhysicalCase> perturbed(cases.begin() + 2, cases.end() - 1);
  const PhysicalCase flipped = cases.back();

  rep.cases["base"] = case_json(base, base);
  for (const auto& c : perturbed) rep.cases[c.name] = case_json(c, base);
  rep.cases["flipped_" + flipped.name] = case_json(flipped, base);
  rep.tables.emplace_back("stability_sweep_cases", sweep_csv(cases, base));
  rep.tables.emplace_back("stability_sweep_base_history", history_csv(base.rep));

  bool all_blow = base.rep.blew_up;
  for (const auto& c : perturbed) all_blow = all_blow && c.rep.blew_up;
  rep.add("perturbed_runs_blow_up", 8, all_blow, "every delta in the sweep reaches M_stop");

  const auto dev = deviations(perturbed, base, cfg.noise_sign);
  rep.add("time_deviation_nonincreasing", 8, nonincreasing(dev), list_deviations(dev));

  bool decreasing = residual_decreasing(base);
  std::string detail = "base " + std::to_string(base.residual.size()) + " decades";
  for (const auto& c : perturbed) {
    decreasing = decreasing && residual_decreasing(c);
    detail += ", " + c.name + " final " + (c.residual.empty() ? std::string("none") : fmt(c.residual.back()));
  }
  rep.add("recentered_residual_decreasing", 8, decreasing, detail);

  rep.add("zero_delta_bit_identical", 8, identical(base.rep, zero.rep), "delta = 0 against the base report");

  const auto ref = std::find_if(perturbed.begin(), perturbed.end(), [&](const auto& c) { return c.delta == 1e-2; });
  const bool flip_ok = flipped.rep.blew_up && residual_decreasing(flipped);
  rep.add("flipped_noise_same_predicates", 8, flip_ok,
          "sign-flipped delta = 1e-2: blew_up " + std::string(flipped.rep.blew_up ? "yes" : "no") + ", |dT| " +
              fmt(std::abs(flipped.rep.T_est - base.rep.T_est)) +
              (ref != perturbed.end() ? ", unflipped |dT| " + fmt(std::abs(ref->rep.T_est - base.rep.T_est)) : ""));
  return rep;
}

ScenarioReport scenario_blowup_time_continuity(const ScenarioConfig& cfg) {
  const auto s = rescaled_setup(cfg);
  ScenarioReport rep;
  rep.scenario = "blowup_time_continuity";
  std::vector<std::pair<double, double>> plan{{0.0, 1.0}, {0.0, 1.0}};
  for (double d : cfg.deltas) plan.emplace_back(d, cfg.noise_sign);
  for (double d : cfg.deltas) plan.emplace_back(d, -cfg.noise_sign);
  auto cases = run_physical_cases(cfg, s, plan);
  const PhysicalCase base = cases[0];
  rep.cases["base"] = case_json(base, base);
  for (std::size_t i = 2; i < cases.size(); ++i) rep.cases[cases[i].name] = case_json(cases[i], base);
  rep.tables.emplace_back("blowup_time_continuity_cases", sweep_csv(cases, base));

  bool all_blow = true;
  for (const auto& c : cases) all_blow = all_blow && c.rep.blew_up;
  const auto pos = deviations(cases, base, cfg.noise_sign);
  const auto neg = deviations(cases, base, -cfg.noise_sign);
  rep.add("deviation_nonincreasing", 8, all_blow && nonincreasing(pos), list_deviations(pos));
  const auto [lin_ok, lin_detail] = linear_bound(pos);
  rep.add("deviation_linear_bound", 8, all_blow && lin_ok, lin_detail);
  const double zero_dev = std::abs(cases[1].rep.T_est - base.rep.T_est);
  rep.add("zero_delta_zero_deviation", 8, zero_dev == 0.0, "|T_0 - T| = " + fmt(zero_dev));
  const auto [neg_lin, neg_detail] = linear_bound(neg);
  rep.add("negative_amplitude_same_predicates", 8, all_blow && nonincreasing(neg) && neg_lin,
          list_deviations(neg) + "; " + neg_detail);
  return rep;
}

namespace {

struct DriftCase {
  BlowupReport phys;
  double tau_s = 0.0;
  Point xi_s;
  double xi_inf = 0.0;
  double c_tau_first = 0.0;
  double c_tau_second = 0.0;
  Trajectory traj;
};

DriftCase drift_case(const Field& u0, const ScenarioConfig& cfg, const Setup& s) {
  DriftCase d;
  auto pc = physical_config(cfg, s.fp);
  pc.snapshot_levels.clear();
  for (int k = 2; k <= 20; ++k) pc.snapshot_levels.push_back(s.fp.kappa * std::pow(10.0, k / 4.0));
  d.phys = run_to_blowup(u0, pc);
  if (!d.phys.blew_up) throw Error(Errc::invalid_argument, "drift case did not blow up");
  // latest snapshot whose window fits the box about a = 0 and whose
  // similarity-frame offset stays within the Newton seed range L/8
  const Snapshot* pick = nullptr;
  for (const auto& snap : d.phys.snapshots) {
    const double width = std::sqrt(d.phys.T_est - snap.t);
    if (cfg.extent * width > cfg.box || cfg.physical_spacing / width > 1.2) continue;
    if (std::abs(d.phys.point_est[0]) / width > 0.125 * cfg.extent) continue;
    pick = &snap;
  }
  if (!pick) throw Error(Errc::outside_physical_data, "no snapshot fits the similarity window");
  const auto [w, tau] = rescale_to_similarity(pick->u, pick->t, d.phys.T_est, Point(cfg.n), s.fp, s.grid);
  d.tau_s = tau;
  d.xi_s = solve_center(w, s.fp, s.q).xi;

  auto opts = drifted(cfg);
  opts.tau_out = cfg.dtau * 10.0;
  d.traj = run_rescaled(shifted(w, d.xi_s), tau, tau + cfg.drift_span, s.fp, s.q, opts);

  // xi_inf = e^{-tau_s/2} xi_s + int e^{-s/2} c(s) ds
  double integral = 0.0;
  const auto& sm = d.traj.samples;
  for (std::size_t i = 1; i < sm.size(); ++i) {
    if (!sm[i].c || !sm[i - 1].c) continue;
    const double f0 = std::exp(-0.5 * sm[i - 1].tau) * (*sm[i - 1].c)[0];
    const double f1 = std::exp(-0.5 * sm[i].tau) * (*sm[i].c)[0];
    integral += 0.5 * (sm[i].tau - sm[i - 1].tau) * (f0 + f1);
  }
  d.xi_inf = std::exp(-0.5 * d.tau_s) * d.xi_s[0] + integral;

  const double mid = tau + 0.5 * (d.traj.exit_tau - tau);
  for (const auto& smp : sm) {
    if (!smp.c) continue;
    const double v = std::abs((*smp.c)[0]) * smp.tau;
    (smp.tau <= mid ? d.c_tau_first : d.c_tau_second) =
        std::max(smp.tau <= mid ? d.c_tau_first : d.c_tau_second, v);
  }
  return d;
}

nlohmann::json drift_json(const DriftCase& d) {
  return {{"T", d.phys.T_est},
          {"point_est", d.phys.point_est[0]},
          {"tau_start", d.tau_s},
          {"xi_start", d.xi_s[0]},
          {"xi_inf", d.xi_inf},
          {"run", exit_json(d.traj)},
          {"c_tau_max_first_half", d.c_tau_first},
          {"c_tau_max_second_half", d.c_tau_second}};
}

}  // namespace

ScenarioReport scenario_recenter_drift(const ScenarioConfig& cfg) {
  if (cfg.n != 1) throw Error(Errc::unsupported_dimension, "recenter drift scenario runs in one dimension");
  const auto s = rescaled_setup(cfg);
  ScenarioReport rep;
  rep.scenario = "recenter_drift";
  const Grid pg = physical_grid(cfg);
  const double h = cfg.physical_spacing;

  auto f_shift = std::async(std::launch::async, [&] { return drift_case(bump_datum(pg, cfg.amplitude, cfg.shift), cfg, s); });
  auto f_even = std::async(std::launch::async, [&] { return drift_case(bump_datum(pg, cfg.amplitude, 0.0), cfg, s); });
  auto f_odd = std::async(std::launch::async, [&] {
    Field u0 = bump_datum(pg, cfg.amplitude, 0.0);
    const Field odd = sample(pg, Frame::physical, [](const Point& x) { return x[0] * std::exp(-x[0] * x[0]); });
    for (std::size_t i = 0; i < u0.values.size(); ++i) u0.values[i] += cfg.odd_amplitude * odd.values[i];
    return drift_case(u0, cfg, s);
  });
  const auto sh = f_shift.get(), ev = f_even.get(), od = f_odd.get();
  rep.cases = {{"shifted", drift_json(sh)}, {"even", drift_json(ev)}, {"odd", drift_json(od)}};
  rep.add_trajectory("recenter_drift_shifted", sh.traj);
  rep.add_trajectory("recenter_drift_even", ev.traj);
  rep.add_trajectory("recenter_drift_odd", od.traj);

  const double e_shift = std::abs(sh.xi_inf - cfg.shift);
  const double e_point = std::abs(sh.xi_inf - sh.phys.point_est[0]);
  rep.add("xi_inf_matches_shift", 8, e_shift <= 2.0 * h && e_point <= 2.0 * h,
          "xi_inf = " + fmt(sh.xi_inf) + ", |xi_inf - shift| = " + fmt(e_shift) + ", |xi_inf - point_est| = " +
              fmt(e_point) + ", 2h = " + fmt(2.0 * h));
  rep.add("even_data_stays_centered", 8, std::abs(ev.xi_s[0]) < 1e-10 && std::abs(ev.xi_inf) < 1e-10,
          "xi_start = " + fmt(ev.xi_s[0]) + ", xi_inf = " + fmt(ev.xi_inf));
  rep.add("odd_drift_c_tau_bounded", 8, od.c_tau_second <= 2.0 * od.c_tau_first,
          "max |c| tau: first half " + fmt(od.c_tau_first) + ", second half " + fmt(od.c_tau_second) +
              "; xi_inf = " + fmt(od.xi_inf) + ", point_est = " + fmt(od.phys.point_est[0]));
  return rep;
}

ScenarioReport run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  std::string name = cfg.scenario;
  std::replace(name.begin(), name.end(), '_', '-');
  ScenarioReport rep;
  if (name == "profile-convergence") rep = scenario_profile_convergence(cfg);
  else if (name == "dichotomy") rep = scenario_dichotomy(cfg);
  else if (name == "stability-sweep") rep = scenario_stability_sweep(cfg);
  else if (name == "time-continuity" || name == "blowup-time-continuity") rep = scenario_blowup_time_continuity(cfg);
  else if (name == "recenter-drift") rep = scenario_recenter_drift(cfg);
  else throw Error(Errc::invalid_argument, "unknown scenario " + cfg.scenario);
  rep.config_hash = cfg.hash();
  rep.code_version = code_version();
  if (!cfg.output_dir.empty()) rep.write(cfg.output_dir);
  return rep;
}

}  // namespace blowup
