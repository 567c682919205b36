#include <cmath>
#include <random>

#include "blowup/recenter.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace blowup;

namespace {

// kappa + m sum_J H2(J,J)(z - a)
Field shifted_profile(const Grid& g, const FrameParams& fp, double m, const Point& a) {
  ModeVector modes(fp.n);
  for (auto& b : modes.b2_diag) b = m;
  return sample(g, Frame::similarity, [&](const Point& z) { return fp.kappa + mode_sum(modes, z - a, fp); });
}

}  // namespace

TEST_CASE("solve_center recovers a shifted profile") {
  SUBCASE("n = 1") {
    const auto fp = FrameParams::make(3.0, 1);
    const auto q = build_quadrature(1, 64);
    const auto g = Grid::symmetric(1, 20.0, 0.05);
    const Point a{0.3};
    const auto w = shifted_profile(g, fp, -0.05, a);
    CenterOptions opt;
    opt.xi0 = Point{0.0};
    const auto s = solve_center(w, fp, q, opt);
    CHECK(s.converged);
    CHECK(std::abs(s.xi[0] - 0.3) < 1e-8);
    CHECK(s.residual < 1e-12);
    CHECK(s.iterations <= 5);
  }
  SUBCASE("n = 2") {
    const auto fp = FrameParams::make(3.0, 2);
    const auto q = build_quadrature(2, 32);
    const auto g = Grid::symmetric(2, 12.0, 0.1);
    const Point a{0.2, -0.1};
    const auto w = shifted_profile(g, fp, -0.05, a);
    CenterOptions opt;
    opt.xi0 = Point{0.0, 0.0};
    const auto s = solve_center(w, fp, q, opt);
    CHECK(s.converged);
    CHECK((s.xi - a).norm() < 1e-8);
  }
}

TEST_CASE("Jacobian of a shifted profile is m times the identity") {
  const auto fp = FrameParams::make(3.0, 2);
  const auto q = build_quadrature(2, 32);
  const auto g = Grid::symmetric(2, 12.0, 0.1);
  const Point a{0.2, -0.1};
  const auto w = shifted_profile(g, fp, -0.05, a);
  const auto J = center_jacobian(w, a, fp, q);
  CHECK(std::abs(J(0, 0) + 0.05) < 1e-10);
  CHECK(std::abs(J(1, 1) + 0.05) < 1e-10);
  CHECK(std::abs(J(0, 1)) < 1e-10);
  CHECK(std::abs(J(1, 0)) < 1e-10);

  // finite-difference check of dF/dxi at a generic point
  const Point x{0.05, 0.1};
  const auto Jx = center_jacobian(w, x, fp, q);
  const double h = 1e-4;
  for (std::size_t k = 0; k < 2; ++k) {
    Point xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Eigen::VectorXd d = (center_residual(w, xp, fp, q) - center_residual(w, xm, fp, q)) / (2 * h);
    for (std::size_t J2 = 0; J2 < 2; ++J2) CHECK(std::abs(d(J2) - Jx(J2, k)) < 1e-7);
  }
}

TEST_CASE("center map examples") {
  const auto fp1 = FrameParams::make(3.0, 1);
  const auto q1 = build_quadrature(1, 64);
  const auto g1 = Grid::symmetric(1, 20.0, 0.05);
  ModeVector h1(1);
  h1.b1[0] = 1.0;
  CHECK(std::abs(center_residual(reconstruct(h1, fp1, g1), Point{0.0}, fp1, q1)(0) - 1.0) < 1e-10);

  std::mt19937 rng(8);
  auto even = testing::random_smooth_field(g1, rng, 0.3);
  const auto mirrored = shifted(even, Point{0.0});
  for (std::size_t i = 0; i < even.values.size(); ++i)
    even.values[i] = fp1.kappa + 0.5 * (mirrored.values[i] + mirrored.values[even.values.size() - 1 - i]);
  CHECK(std::abs(center_residual(even, Point{0.0}, fp1, q1)(0)) < 1e-10);

  const auto fp2 = FrameParams::make(3.0, 2);
  const auto q2 = build_quadrature(2, 32);
  const auto g2 = Grid::symmetric(2, 12.0, 0.1);
  ModeVector off(2);
  off.b2_off[0] = 0.1;
  const auto J = center_jacobian(reconstruct(off, fp2, g2), Point{0.0, 0.0}, fp2, q2);
  CHECK(std::abs(J(0, 1) - 0.1 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(J(1, 0) - 0.1 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(J(0, 0)) < 1e-12);
  CHECK(std::abs(J(1, 1)) < 1e-12);

  const auto flat = Field(g2, Frame::similarity, fp2.kappa);
  CHECK(center_jacobian(flat, Point{0.0, 0.0}, fp2, q2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(testing::error_code([&] { solve_center(flat, fp2, q2); }) == Errc::degenerate_profile);

  const Point one{1.0};
  const auto E = shift_basis_expansion(one, fp1);
  CHECK(E(1, 0) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(E(2, 0) == doctest::Approx(0.35355).epsilon(1e-5));
}

TEST_CASE("centered profile needs no iterations") {
  const auto fp = FrameParams::make(3.0, 1);
  const auto q = build_quadrature(1, 64);
  const auto g = Grid::symmetric(1, 20.0, 0.05);
  const auto w = reconstruct(profile_modes(10.0, fp), fp, g);
  const auto s = solve_center(w, fp, q);
  CHECK(s.converged);
  CHECK(s.iterations == 0);
  CHECK(s.xi.norm() == 0.0);
  CHECK(s.c1_ratio == 0.0);
}

TEST_CASE("recentering errors") {
  const auto fp = FrameParams::make(3.0, 1);
  const auto q = build_quadrature(1, 64);
  const auto g = Grid::symmetric(1, 20.0, 0.05);

  ModeVector flat(1);
  flat.b0 = 0.1;
  flat.b1[0] = 0.01;
  const auto w = reconstruct(flat, fp, g);
  CenterOptions origin;
  origin.xi0 = Point{0.0};
  CHECK(testing::error_code([&] { solve_center(w, fp, q, origin); }) == Errc::degenerate_profile);

  const auto prof = shifted_profile(g, fp, -0.05, Point{0.3});
  CHECK(testing::error_code([&] { center_residual(prof, Point{6.0}, fp, q); }) == Errc::shift_too_large);
  CenterOptions far;
  far.xi0 = Point{3.0};
  CHECK(testing::error_code([&] { solve_center(prof, fp, q, far); }) == Errc::shift_too_large);

  Field phys = prof;
  phys.frame = Frame::physical;
  CHECK(testing::error_code([&] { solve_center(phys, fp, q); }) == Errc::wrong_frame);
}

TEST_CASE("zero of the center map is unique near a perturbed profile") {
  const auto fp = FrameParams::make(3.0, 1);
  const auto q = build_quadrature(1, 64);
  const auto g = Grid::symmetric(1, 20.0, 0.05);
  std::mt19937 rng(17);
  auto w = shifted_profile(g, fp, -0.05, Point{0.2});
  const auto bump = testing::random_smooth_field(g, rng, 1e-3);
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] += bump.values[i];

  int sign_changes = 0;
  double prev = center_residual(w, Point{-2.0}, fp, q)(0);
  for (int k = 1; k <= 400; ++k) {
    const double cur = center_residual(w, Point{-2.0 + 0.01 * k}, fp, q)(0);
    if ((cur > 0) != (prev > 0)) ++sign_changes;
    prev = cur;
  }
  CHECK(sign_changes == 1);

  CenterOptions opt;
  opt.xi0 = Point{0.0};
  const auto s = solve_center(w, fp, q, opt);
  CHECK(s.converged);
  CHECK(std::abs(s.xi[0] - 0.2) < 0.1);
  CHECK(std::isfinite(s.c1_ratio));
}

TEST_CASE("shift basis expansion") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t n : {1u, 2u, 3u}) {
    const auto fp = FrameParams::make(3.0, n);
    const auto basis = tracked_basis(n);
    Point xi(n);
    for (std::size_t k = 0; k < n; ++k) xi[k] = 0.3 * u(rng);
    const auto E = shift_basis_expansion(xi, fp);
    for (int trial = 0; trial < 20; ++trial) {
      Point z(n);
      for (std::size_t k = 0; k < n; ++k) z[k] = u(rng);
      for (std::size_t a = 0; a < basis.size(); ++a) {
        double s = 0.0;
        for (std::size_t c = 0; c < basis.size(); ++c) s += E(a, c) * eval_eigenfunction(basis[c], z, fp);
        CHECK(std::abs(s - eval_eigenfunction(basis[a], z + xi, fp)) < 1e-13);
      }
    }
    // quadrature projection of the shifted eigenfunctions
    const auto q = build_quadrature(n, n == 3 ? 12 : 24);
    Point xq(n);
    for (std::size_t k = 0; k < n; ++k) xq[k] = 0.5 * u(rng);
    const auto Eq = shift_basis_expansion(xq, fp);
    for (std::size_t a = 0; a < basis.size(); ++a) {
      const auto moved = node_values([&](const Point& z) { return eval_eigenfunction(basis[a], z + xq, fp); }, q);
      for (std::size_t c = 0; c < basis.size(); ++c)
        CHECK(std::abs(inner_product_rho(moved, node_values(basis[c], fp, q), q) - Eq(a, c)) < 1e-10);
    }
    // zero shift is the identity
    CHECK(shift_basis_expansion(Point(n), fp).isIdentity(0.0));
  }
}

TEST_CASE("shift_modes agrees with projecting the resampled field") {
  const auto fp = FrameParams::make(3.0, 2);
  const auto q = build_quadrature(2, 32);
  const auto g = Grid::symmetric(2, 12.0, 0.1);
  ModeVector m(2);
  m.b0 = 0.02;
  m.b1 = {0.01, -0.03};
  m.b2_diag = {-0.05, -0.04};
  m.b2_off = {0.01};
  const auto w = reconstruct(m, fp, g);
  const Point xi{0.25, -0.15};
  const auto moved = project(shifted(w, xi), fp, q).modes;
  const auto predicted = shift_modes(m, xi, fp);
  for (std::size_t k = 0; k < m.size(); ++k) CHECK(std::abs(moved[k] - predicted[k]) < 1e-9);

  // recentering a shifted field undoes the first modes
  const auto s = solve_center(w, fp, q, CenterOptions{1e-12, 50, Point{0.0, 0.0}});
  const auto centered = shift_modes(m, s.xi, fp);
  CHECK(std::abs(centered.b1[0]) < 1e-10);
  CHECK(std::abs(centered.b1[1]) < 1e-10);
}
