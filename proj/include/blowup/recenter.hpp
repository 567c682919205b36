#pragma once

// Recentering: find the shift xi with <w(. + xi), H1(J)>_rho = 0 for all J,
// i.e. the frame in which the rescaled solution carries no first modes.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "blowup/spectral.hpp"

namespace blowup {

struct CenterSolve {
  Point xi;
  double residual = 0.0;  // max_J |<w(. + xi), H1(J)>_rho|
  int iterations = 0;
  bool converged = false;
  /// |xi| / ||w - kappa - m sum_J H2(J,J)||_rho with m the mean diagonal
  /// second-mode coefficient of the unshifted w.
  double c1_ratio = 0.0;
};

struct CenterOptions {
  double tol = 1e-12;
  int max_iter = 50;
  std::optional<Point> xi0;  // default: grid argmax of w
};

/// F(w, xi)_J = <w(. + xi), H1(J)>_rho.
Eigen::VectorXd center_residual(const Field& w, const Point& xi, const FrameParams& fp, const QuadratureRule& q);

/// dF/dxi: <w(. + xi), H2(J,J)> on the diagonal, <w(. + xi), H2(I,J)>/sqrt2 off it.
Eigen::MatrixXd center_jacobian(const Field& w, const Point& xi, const FrameParams& fp, const QuadratureRule& q);

/// Damped Newton iteration on F(w, .). Throws degenerate_profile when the
/// Jacobian is singular and shift_too_large when an iterate leaves |xi| <= L/4.
CenterSolve solve_center(const Field& w, const FrameParams& fp, const QuadratureRule& q,
                         const CenterOptions& opts = {});

/// Expansion of every shifted tracked eigenfunction H_a(z + xi) over the
/// tracked basis: table(a, c) is the coefficient of H_c.
Eigen::MatrixXd shift_basis_expansion(const Point& xi, const FrameParams& fp);

/// Coefficients of w(. + xi) - kappa given those of w - kappa (remainder-free input).
ModeVector shift_modes(const ModeVector& m, const Point& xi, const FrameParams& fp);

/// w(z + xi) resampled on the same grid; coordinates beyond the grid are
/// clamped to its edge.
Field shifted(const Field& w, const Point& xi);

}  // namespace blowup
