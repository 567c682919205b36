#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "blowup/nonlinearity.hpp"
#include "blowup/rescaled_solver.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace blowup;

namespace {

// kappa (1 + beta (|z|^2 - 2n))^{-1/(p-1)} with beta = (p-1)/(4 p tau0)
Field profile_datum(const Grid& g, const FrameParams& fp, double tau0) {
  const double beta = (fp.p - 1.0) / (4.0 * fp.p * tau0);
  return sample(g, Frame::similarity, [&](const Point& z) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) r2 += z[k] * z[k];
    return fp.kappa * std::pow(1.0 + beta * (r2 - 2.0 * static_cast<double>(fp.n)), -1.0 / (fp.p - 1.0));
  });
}

// z^3 e^{-z^2/8} with its H1 component removed by a localized H1 e^{-z^2/16} correction
double odd_bump(double z, double a) {
  return z * z * z * std::exp(-z * z / 8.0) - a * z * std::exp(-z * z / 16.0);
}

double odd_bump_correction(const FrameParams& fp, const QuadratureRule& q) {
  const auto h1 = node_values(EigenIndex::h1(0), fp, q);
  const auto f = node_values([](const Point& z) { return odd_bump(z[0], 0.0); }, q);
  const auto phi = node_values([](const Point& z) { return z[0] * std::exp(-z[0] * z[0] / 16.0); }, q);
  return inner_product_rho(f, h1, q) / inner_product_rho(phi, h1, q);
}

double fitted_rate(const Trajectory& t, double window, const std::function<double(const ModeVector&)>& pick) {
  const double t0 = t.samples.front().tau;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (const auto& s : t.samples) {
    if (s.tau > t0 + window + 1e-9) break;
    const double x = s.tau - t0;
    const double y = std::log(std::abs(pick(s.modes)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

struct Setup1 {
  FrameParams fp = FrameParams::make(3.0, 1);
  QuadratureRule q = build_quadrature(1, 64);
  Grid g = Grid::symmetric(1, 20.0, 0.05);
};

}  // namespace

TEST_CASE("stationary states") {
  for (std::size_t n : {1u, 2u}) {
    const auto fp = FrameParams::make(3.0, n);
    const auto q = build_quadrature(n, n == 1 ? 64 : 24);
    const auto g = n == 1 ? Grid::symmetric(1, 20.0, 0.05) : Grid::symmetric(2, 8.0, 0.2);
    const RescaledStepper stepper(fp, q, g, 1e-3);
    for (double level : {fp.kappa, 0.0}) {
      for (DriftMode mode : {DriftMode::none, DriftMode::orthogonality}) {
        RescaledState s;
        s.w = Field(g, Frame::similarity, level);
        s.drift = mode;
        for (int k = 0; k < 50; ++k) {
          const Field before = s.w;
          stepper.step(s);
          double d = 0.0;
          for (std::size_t i = 0; i < before.values.size(); ++i)
            d = std::max(d, std::abs(s.w.values[i] - before.values[i]));
          CHECK(d < 1e-12);
        }
        CHECK(s.c_last.norm() == 0.0);
        CHECK(!s.blown_up);
      }
    }
  }
}

TEST_CASE("spatially constant state follows the scalar equation") {
  const Setup1 S;
  const double eps = 1e-3, dt = 1e-3;
  RescaledState s;
  s.w = Field(S.g, Frame::similarity, S.fp.kappa + eps);
  const auto next = step_rescaled(s, dt, S.fp, S.q);
  const double rate = (next.w.values[400] - s.w.values[400]) / dt;
  const double w0 = S.fp.kappa + eps;
  const double ode_rhs = -w0 / (S.fp.p - 1.0) + std::pow(w0, S.fp.p);
  CHECK(std::abs(rate / ode_rhs - 1.0) < 1e-3);
  // linearization rate p kappa^{p-1} - 1/(p-1) = 1
  CHECK(std::abs(rate / eps - 1.0) < 3e-3);

  // refined steps converge to the scalar trajectory (RK4 with tiny steps)
  auto f = [&](double w) { return -w / (S.fp.p - 1.0) + std::pow(w, S.fp.p); };
  double w = w0;
  const double hs = 1e-5;
  for (int k = 0; k < 1000; ++k) {
    const double k1 = f(w), k2 = f(w + 0.5 * hs * k1), k3 = f(w + 0.5 * hs * k2), k4 = f(w + hs * k3);
    w += hs / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const auto fine = run_rescaled(s.w, 0.0, 1e-2, S.fp, S.q, {.dtau = 1e-4, .tau_out = 1e-2});
  CHECK(std::abs((fine.samples.back().sup_w - w0) / (w - w0) - 1.0) < 1e-3);
}

TEST_CASE("linearized mode rates") {
  const Setup1 S;
  SUBCASE("H0 grows at rate 1") {
    for (double amp : {1e-3, 0.05}) {
      ModeVector m(1);
      m.b0 = amp;
      const auto t = run_rescaled(reconstruct(m, S.fp, S.g), 0.0, 0.5, S.fp, S.q, {.tau_out = 0.05});
      const double rate = fitted_rate(t, 0.5, [](const ModeVector& v) { return v.b0; });
      // the quadratic self-interaction lifts the rate at larger amplitude
      CHECK(std::abs(rate - 1.0) < (amp < 1e-2 ? 0.05 : 0.10));
    }
  }
  SUBCASE("H1 grows at rate 1/2 without drift") {
    ModeVector m(1);
    m.b1[0] = 0.05;
    const auto t = run_rescaled(reconstruct(m, S.fp, S.g), 0.0, 0.5, S.fp, S.q, {.tau_out = 0.05});
    const double rate = fitted_rate(t, 0.5, [](const ModeVector& v) { return v.b1[0]; });
    CHECK(rate >= 0.45);
    CHECK(rate <= 0.55);
  }
  SUBCASE("H0 rate in two dimensions") {
    const auto fp = FrameParams::make(3.0, 2);
    const auto q = build_quadrature(2, 24);
    const auto g = Grid::symmetric(2, 8.0, 0.2);
    ModeVector m(2);
    m.b0 = 1e-3;
    const auto t = run_rescaled(reconstruct(m, fp, g), 0.0, 0.5, fp, q, {.dtau = 2e-3, .tau_out = 0.05});
    const double rate = fitted_rate(t, 0.5, [](const ModeVector& v) { return v.b0; });
    CHECK(std::abs(rate - 1.0) < 0.05);
  }
}

TEST_CASE("drift_from_orthogonality examples") {
  const Setup1 S;
  const double tau = 20.0;
  const double b2 = -1.0 / (S.fp.c_p * tau);
  const double eps = 1e-4;
  const double a = odd_bump_correction(S.fp, S.q);
  const double k = S.fp.k0;
  const double r2 = std::numbers::sqrt2;

  auto W = [&](double z) { return b2 * k * (z * z - 2.0) / (2.0 * r2) + eps * odd_bump(z, a); };
  RescaledState s;
  s.tau = tau;
  s.w = sample(S.g, Frame::similarity, [&](const Point& z) { return S.fp.kappa + W(z[0]); });

  const Point c = drift_from_orthogonality(s, S.fp, S.q);
  // scalar case of the matrix equation
  const auto d = project(s.w, S.fp, S.q);
  CHECK(std::abs(c[0] + project_nonlinear(d, S.fp, S.q).b1[0] / d.modes.b2_diag[0]) < 1e-15);
  CHECK(std::abs(c[0]) * tau < 1.0);

  // analytic right-hand side at the nodes: W_tau = W'' - z W'/2 + W + N(W) (+ c W')
  auto dW = [&](double z) {
    const double e = std::exp(-z * z / 8.0), e2 = std::exp(-z * z / 16.0);
    const double f1 = (3 * z * z - z * z * z * z / 4.0) * e - a * (1.0 - z * z / 8.0) * e2;
    return b2 * k * z / r2 + eps * f1;
  };
  auto d2W = [&](double z) {
    const double e = std::exp(-z * z / 8.0), e2 = std::exp(-z * z / 16.0);
    const double f2 = (6 * z - 7 * z * z * z / 4.0 + std::pow(z, 5) / 16.0) * e -
                      a * (-3.0 * z / 8.0 + z * z * z / 64.0) * e2;
    return b2 * k / r2 + eps * f2;
  };
  const NonlinearTerm N(S.fp);
  const auto h1 = node_values(EigenIndex::h1(0), S.fp, S.q);
  auto rate = [&](double cc) {
    const auto r = node_values(
        [&](const Point& p) {
          const double z = p[0];
          return d2W(z) - 0.5 * z * dW(z) + W(z) + N(W(z)) + cc * dW(z);
        },
        S.q);
    return inner_product_rho(r, h1, S.q);
  };
  const double undrifted = rate(0.0);
  const double drifted = rate(c[0]);
  CHECK(std::abs(undrifted) > 0.0);
  CHECK(std::abs(drifted) * 1e3 <= std::abs(undrifted));

  // even states need no drift
  RescaledState even;
  even.w = profile_datum(S.g, S.fp, 10.0);
  CHECK(std::abs(drift_from_orthogonality(even, S.fp, S.q)[0]) < 1e-14);

  // flat states cannot be steered
  RescaledState flat;
  flat.w = Field(S.g, Frame::similarity, S.fp.kappa);
  CHECK(testing::error_code([&] { drift_from_orthogonality(flat, S.fp, S.q); }) == Errc::flat_profile);
}

TEST_CASE("orthogonality-preserving drift keeps H1 modes at their initial level") {
  const Setup1 S;
  const double a = odd_bump_correction(S.fp, S.q);
  Field w0 = profile_datum(S.g, S.fp, 10.0);
  for (std::size_t i = 0; i < w0.values.size(); ++i) w0.values[i] += 1e-3 * odd_bump(S.g.coords(i)[0], a);

  const auto drifted = run_rescaled(w0, 10.0, 15.0, S.fp, S.q, {.drift = DriftMode::orthogonality});
  const auto plain = run_rescaled(w0, 10.0, 15.0, S.fp, S.q);
  REQUIRE(drifted.exit == RunExit::completed);
  const double b1_0 = std::abs(drifted.samples.front().modes.b1[0]);
  const double bound = std::max(10.0 * b1_0, 1e-12);
  double worst = 0.0;
  for (const auto& s : drifted.samples) {
    worst = std::max(worst, std::abs(s.modes.b1[0]));
    CHECK(s.c.has_value());
  }
  CHECK(worst <= bound);
  // without drift the odd part leaks into H1 and grows
  CHECK(std::abs(plain.samples.back().modes.b1[0]) > 100.0 * bound);
}

TEST_CASE("orthogonality drift in two dimensions") {
  const auto fp = FrameParams::make(3.0, 2);
  const auto q = build_quadrature(2, 24);
  const auto g = Grid::symmetric(2, 8.0, 0.2);
  Field w0 = profile_datum(g, fp, 10.0);
  for (std::size_t i = 0; i < w0.values.size(); ++i) {
    const Point z = g.coords(i);
    w0.values[i] += 1e-3 * (z[0] - 0.5 * z[1]) * std::exp(-(z[0] * z[0] + z[1] * z[1]) / 4.0);
  }
  const auto t = run_rescaled(w0, 10.0, 11.0, fp, q, {.dtau = 2e-3, .drift = DriftMode::orthogonality});
  REQUIRE(t.exit == RunExit::completed);
  const double b_init = std::max(std::abs(t.samples.front().modes.b1[0]), std::abs(t.samples.front().modes.b1[1]));
  for (const auto& s : t.samples) {
    CHECK(std::abs(s.modes.b1[0]) <= b_init);
    CHECK(std::abs(s.modes.b1[1]) <= b_init);
  }
  CHECK(std::abs(t.samples.back().modes.b1[0]) < 0.7 * b_init);
}

TEST_CASE("drift splitting is first order") {
  const Setup1 S;
  const Field w0 = profile_datum(S.g, S.fp, 10.0);
  auto b1_at_end = [&](double dt) {
    RescaledRunOptions o;
    o.dtau = dt;
    o.tau_out = 1.0;
    o.drift = DriftMode::fixed;
    o.c_fixed = Point{0.2};
    return run_rescaled(w0, 10.0, 11.0, S.fp, S.q, o).samples.back().modes.b1[0];
  };
  const double b4 = b1_at_end(4e-3), b2 = b1_at_end(2e-3), b1 = b1_at_end(1e-3);
  const double ratio = (b4 - b2) / (b2 - b1);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
  CHECK(std::abs(b1) > 0.0);
}

TEST_CASE("Neumann ends do not reach the weighted diagnostics") {
  const auto fp = FrameParams::make(3.0, 1);
  const auto q = build_quadrature(1, 64);
  const auto g20 = Grid::symmetric(1, 20.0, 0.1);
  const auto g40 = Grid::symmetric(1, 40.0, 0.1);
  const auto a = run_rescaled(profile_datum(g20, fp, 10.0), 10.0, 12.0, fp, q, {.tau_out = 2.0});
  const auto b = run_rescaled(profile_datum(g40, fp, 10.0), 10.0, 12.0, fp, q, {.tau_out = 2.0});
  const auto& ma = a.samples.back().modes;
  const auto& mb = b.samples.back().modes;
  CHECK(std::abs(ma.b2_diag[0] / mb.b2_diag[0] - 1.0) < 1e-6);
  CHECK(std::abs(ma.b0 - mb.b0) < 1e-8);
}

TEST_CASE("run exits and trajectory output") {
  const Setup1 S;
  const auto flat = run_rescaled(Field(S.g, Frame::similarity, S.fp.kappa), 0.0, 1.0, S.fp, S.q);
  CHECK(flat.exit == RunExit::completed);
  for (const auto& s : flat.samples) CHECK(s.modes.norm() < 1e-12);
  for (std::size_t i = 1; i < flat.samples.size(); ++i) CHECK(flat.samples[i].tau > flat.samples[i - 1].tau);
  CHECK(flat.samples.size() == 11);

  const auto up = run_rescaled(Field(S.g, Frame::similarity, S.fp.kappa + 0.05), 0.0, 20.0, S.fp, S.q);
  CHECK(up.exit == RunExit::rescaled_blowup);
  CHECK(up.exit_tau > 1.0);
  CHECK(up.exit_tau < 20.0);

  const auto down = run_rescaled(Field(S.g, Frame::similarity, S.fp.kappa - 0.05), 0.0, 20.0, S.fp, S.q);
  CHECK(down.exit == RunExit::quench);

  std::ostringstream os;
  flat.write_csv(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "tau,b0,b1_1,b2_diag_1,wperp_l2,wperp_h1,sup_w,c_1");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 11);

  Trajectory t2;
  t2.n = 2;
  std::ostringstream os2;
  t2.write_csv(os2);
  CHECK(os2.str() == "tau,b0,b1_1,b1_2,b2_diag_1,b2_diag_2,b2_off_1_2,wperp_l2,wperp_h1,sup_w,c_1,c_2\n");
}

TEST_CASE("rescaled solver errors") {
  const Setup1 S;
  const Field w(S.g, Frame::similarity, S.fp.kappa);
  CHECK(testing::error_code([&] { run_rescaled(w, 1.0, 1.0, S.fp, S.q); }) == Errc::invalid_argument);
  CHECK(testing::error_code([&] { RescaledStepper(S.fp, S.q, S.g, 0.5); }) == Errc::invalid_argument);
  Field phys = w;
  phys.frame = Frame::physical;
  RescaledState s;
  s.w = phys;
  CHECK(testing::error_code([&] { step_rescaled(s, 1e-3, S.fp, S.q); }) == Errc::wrong_frame);
}

TEST_CASE("shooting on the H0 offset balances blowup and quench") {
  const auto fp = FrameParams::make(3.0, 1);
  const auto q = build_quadrature(1, 64);
  const auto g = Grid::symmetric(1, 20.0, 0.1);
  const auto r = shoot_h0(profile_datum(g, fp, 10.0), 10.0, 18.0, fp, q, {.dtau = 2e-3, .tau_out = 0.5});
  CHECK(r.survived);
  CHECK(r.trials > 1);
  CHECK(std::abs(r.offset) < 2e-2);
  CHECK(r.trajectory.exit == RunExit::completed);
}
