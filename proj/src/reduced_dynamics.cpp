#include "blowup/reduced_dynamics.hpp"

#include <cmath>

#include "blowup/error.hpp"
#include "blowup/nonlinearity.hpp"

namespace blowup {

ModeVector rhs_modes(const ModeODEState& s, const FrameParams& fp, bool pin_unstable) {
  const ModeVector& m = s.modes;
  const std::size_t n = fp.n;
  ModeVector d(n);
  if (!pin_unstable) {
    d.b0 = m.b0 + quadratic_closure(m, fp).b0;
    for (std::size_t J = 0; J < n; ++J) d.b1[J] = 0.5 * m.b1[J];
  }
  const double cross = fp.p * fp.k0n() / fp.kappa * m.b0;
  for (std::size_t J = 0; J < n; ++J) {
    const double b = m.b2_diag[J];
    d.b2_diag[J] = fp.c_p * b * b + cross * b;
  }
  for (std::size_t a = 0; a < m.b2_off.size(); ++a) d.b2_off[a] = -2.0 / s.tau * m.b2_off[a];
  return d;
}

namespace {

TrajectorySample ode_sample(const ModeODEState& s, const FrameParams& fp) {
  TrajectorySample out;
  out.tau = s.tau;
  out.modes = s.modes;
  out.sup_w = fp.kappa + mode_sum(s.modes, Point(fp.n), fp);
  return out;
}

bool escaped(const ModeVector& m, double cap) {
  for (double v : m.flat())
    if (!std::isfinite(v) || std::abs(v) > cap) return true;
  return false;
}

}  // namespace

Trajectory integrate_modes(const ModeODEState& s0, double tau_end, const FrameParams& fp, const ModeODEOptions& opts) {
  if (!(tau_end > s0.tau)) throw Error(Errc::invalid_argument, "tau_end must exceed the initial tau");
  if (!(s0.tau > 0.0)) throw Error(Errc::invalid_argument, "mode ODE needs tau > 0");
  if (s0.modes.dimension() != fp.n) throw Error(Errc::grid_mismatch, "mode vector dimension differs from frame");
  Trajectory traj;
  traj.n = fp.n;
  ModeODEState s = s0;
  traj.samples.push_back(ode_sample(s, fp));
  const double h = opts.dtau;
  const auto steps = static_cast<long>(std::llround((tau_end - s0.tau) / h));
  const long every = std::max(1L, static_cast<long>(std::llround(opts.tau_out / h)));
  for (long k = 1; k <= steps; ++k) {
    const ModeVector k1 = rhs_modes(s, fp, opts.pin_unstable);
    const ModeVector k2 = rhs_modes({s.tau + 0.5 * h, s.modes + (0.5 * h) * k1}, fp, opts.pin_unstable);
    const ModeVector k3 = rhs_modes({s.tau + 0.5 * h, s.modes + (0.5 * h) * k2}, fp, opts.pin_unstable);
    const ModeVector k4 = rhs_modes({s.tau + h, s.modes + h * k3}, fp, opts.pin_unstable);
    s.modes = s.modes + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s.tau = s0.tau + static_cast<double>(k) * h;
    if (escaped(s.modes, opts.escape_cap)) {
      traj.exit = RunExit::unstable_escape;
      traj.exit_tau = s.tau;
      return traj;
    }
    if (k % every == 0 || k == steps) traj.samples.push_back(ode_sample(s, fp));
  }
  traj.exit = RunExit::completed;
  traj.exit_tau = s.tau;
  return traj;
}

double profile_g(const ModeVector& m, const Point& z, const FrameParams& fp) {
  ModeVector b2 = m;
  b2.b0 = 0.0;
  for (double& v : b2.b1) v = 0.0;
  const double base = 1.0 - (fp.p - 1.0) / fp.kappa * mode_sum(b2, z, fp);
  if (!(base > 0.0)) throw Error(Errc::outside_profile_domain, "profile base is not positive");
  return fp.kappa * std::pow(base, -1.0 / (fp.p - 1.0));
}

Field sample_profile_g(const ModeVector& m, const Grid& grid, const FrameParams& fp) {
  return sample(grid, Frame::similarity, [&](const Point& z) { return profile_g(m, z, fp); });
}

}  // namespace blowup
