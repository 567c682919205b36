#pragma once

// Leading-order ODE for the tracked mode coefficients and the closed-form
// profile function g.

#include "blowup/rescaled_solver.hpp"
#include "blowup/spectral.hpp"

namespace blowup {

struct ModeODEState {
  double tau = 0.0;
  ModeVector modes;
};

struct ModeODEOptions {
  double dtau = 1e-3;
  double tau_out = 0.1;
  /// Freeze b0 and b1 (their laws are exponentially unstable).
  bool pin_unstable = false;
  /// |coefficient| above this, or a non-finite one, ends the run as an escape.
  double escape_cap = 1e3;
};

/// b0' = b0 + <(p/2kappa) W^2, H0>,  b1' = b1/2,
/// b2(J,J)' = c_p b2(J,J)^2 + (p H0/kappa) b0 b2(J,J),  b2(I,J)' = -(2/tau) b2(I,J).
ModeVector rhs_modes(const ModeODEState& s, const FrameParams& fp, bool pin_unstable = false);

/// Classical RK4 with a fixed step. The trajectory uses the rescaled CSV
/// schema with wperp = 0 and sup_w = kappa + mode sum at z = 0.
Trajectory integrate_modes(const ModeODEState& s0, double tau_end, const FrameParams& fp,
                           const ModeODEOptions& opts = {});

/// g = kappa (1 - ((p-1)/kappa) b2.H2(z))^{-1/(p-1)}; only the b2 entries of m
/// are used. Throws outside_profile_domain when the base is not positive.
double profile_g(const ModeVector& m, const Point& z, const FrameParams& fp);

/// profile_g sampled on a grid.
Field sample_profile_g(const ModeVector& m, const Grid& grid, const FrameParams& fp);

}  // namespace blowup
