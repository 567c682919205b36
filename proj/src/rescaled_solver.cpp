#include "blowup/rescaled_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>

#include "blowup/error.hpp"
#include "blowup/nonlinearity.hpp"

namespace blowup {

const char* to_string(RunExit e) {
  switch (e) {
    case RunExit::completed:
      return "completed";
    case RunExit::rescaled_blowup:
      return "rescaled_blowup";
    case RunExit::quench:
      return "quench";
    case RunExit::unstable_escape:
      return "unstable_escape";
  }
  return "unknown";
}

void Trajectory::write_csv(std::ostream& os) const {
  os << "tau,b0";
  for (std::size_t J = 1; J <= n; ++J) os << ",b1_" << J;
  for (std::size_t J = 1; J <= n; ++J) os << ",b2_diag_" << J;
  for (const auto& [i, j] : off_diagonal_pairs(n)) os << ",b2_off_" << i + 1 << '_' << j + 1;
  os << ",wperp_l2,wperp_h1,sup_w";
  for (std::size_t J = 1; J <= n; ++J) os << ",c_" << J;
  os << '\n' << std::setprecision(12);
  for (const auto& s : samples) {
    os << s.tau;
    for (double v : s.modes.flat()) os << ',' << v;
    os << ',' << s.wperp_l2 << ',' << s.wperp_h1 << ',' << s.sup_w;
    for (std::size_t J = 0; J < n; ++J) {
      os << ',';
      if (s.c) os << (*s.c)[J];
    }
    os << '\n';
  }
}

RescaledStepper::Tridiag RescaledStepper::factor(std::vector<double> sub, std::vector<double> diag,
                                                 std::vector<double> sup) {
  const std::size_t N = diag.size();
  Tridiag t;
  t.sub = std::move(sub);
  t.sup_prime.assign(N, 0.0);
  t.inv_pivot.assign(N, 0.0);
  double prev = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double pivot = diag[i] - (i > 0 ? t.sub[i] * prev : 0.0);
    if (pivot == 0.0 || !std::isfinite(pivot)) throw Error(Errc::linear_solve_failure, "zero pivot in line solve");
    t.inv_pivot[i] = 1.0 / pivot;
    t.sup_prime[i] = i + 1 < N ? sup[i] * t.inv_pivot[i] : 0.0;
    prev = t.sup_prime[i];
  }
  return t;
}

void RescaledStepper::solve_lines(const Tridiag& t, std::size_t axis, std::vector<double>& v) const {
  const std::size_t N = grid_.axis(axis).count;
  const std::size_t s = grid_.stride(axis);
  const std::size_t outer = grid_.size() / (N * s);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < s; ++in) {
      double* x = v.data() + o * N * s + in;
      x[0] *= t.inv_pivot[0];
      for (std::size_t i = 1; i < N; ++i) x[i * s] = (x[i * s] - t.sub[i] * x[(i - 1) * s]) * t.inv_pivot[i];
      for (std::size_t i = N - 1; i-- > 0;) x[i * s] -= t.sup_prime[i] * x[(i + 1) * s];
    }
  }
}

namespace {

// Adjoint of gradient(., axis): returns g with g . v = y . gradient(v).
std::vector<double> gradient_transpose(const std::vector<double>& y, const Grid& g, std::size_t axis) {
  const double inv2h = 1.0 / (2.0 * g.axis(axis).spacing());
  const std::size_t s = g.stride(axis);
  const std::size_t last = g.axis(axis).count - 1;
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t j = g.index_along(i, axis);
    const double c = y[i] * inv2h;
    if (j == 0) {
      out[i] -= 3.0 * c;
      out[i + s] += 4.0 * c;
      out[i + 2 * s] -= c;
    } else if (j == last) {
      out[i] += 3.0 * c;
      out[i - s] -= 4.0 * c;
      out[i - 2 * s] += c;
    } else {
      out[i + s] += c;
      out[i - s] -= c;
    }
  }
  return out;
}

}  // namespace

RescaledStepper::RescaledStepper(const FrameParams& fp, const QuadratureRule& q, const Grid& grid, double dtau,
                                 double blowup_cap)
    : fp_(fp), proj_(fp, q, grid), grid_(grid), dtau_(dtau), cap_(blowup_cap) {
  if (!(dtau > 0.0) || dtau > kMaxRescaledStep) throw Error(Errc::invalid_argument, "dtau must lie in (0, 0.1]");
  if (grid.dimension() != fp.n) throw Error(Errc::grid_mismatch, "grid dimension differs from frame");
  for (std::size_t k = 0; k < grid.dimension(); ++k) {
    const Axis& a = grid.axis(k);
    if (a.count < 3) throw Error(Errc::grid_too_coarse, "rescaled stepping needs 3 points per axis");
    const std::size_t N = a.count;
    const double h = a.spacing();
    const double d2 = dtau / (h * h);
    std::vector<double> sub(N, 0.0), diag(N, 1.0 + 2.0 * d2), sup(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      const double adv = dtau * a.coord(i) / (4.0 * h);
      if (i == 0) {
        sup[i] = -2.0 * d2;
      } else if (i == N - 1) {
        sub[i] = -2.0 * d2;
      } else {
        sub[i] = -d2 - adv;
        sup[i] = -d2 + adv;
      }
    }
    implicit_.push_back(factor(std::move(sub), std::move(diag), std::move(sup)));
  }
  const std::size_t n = fp.n;
  for (std::size_t J = 0; J < n; ++J) h1_dual_.push_back(proj_.dual_on_grid(1 + J));
  for (std::size_t I = 0; I < n; ++I)
    for (std::size_t J = 0; J < n; ++J) grad_dual_.push_back(gradient_transpose(h1_dual_[J], grid, I));
}

Point RescaledStepper::consistent_drift(const Field& before, const Field& after, double lambda) const {
  const std::size_t n = fp_.n;
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  Eigen::VectorXd target(n);
  Eigen::MatrixXd M(n, n);
  for (std::size_t J = 0; J < n; ++J) {
    const double b_old = dot(h1_dual_[J], before.values);
    const double b_new = dot(h1_dual_[J], after.values);
    target(J) = (b_old * (1.0 - lambda * dtau_) - b_new) / dtau_;
  }
  for (std::size_t I = 0; I < n; ++I)
    for (std::size_t J = 0; J < n; ++J) M(J, I) = dot(grad_dual_[I * n + J], after.values);
  const double mnorm = M.cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, after.max_abs());
  if (mnorm < 1e-12 * scale || std::abs(M.determinant()) < 1e-12 * std::pow(mnorm, static_cast<double>(n))) {
    // nothing to correct: flat states such as w = kappa keep c = 0
    if (target.lpNorm<Eigen::Infinity>() <= 1e-12 * scale) return Point(n);
    throw Error(Errc::flat_profile, "profile too flat for drift control");
  }
  const Eigen::VectorXd c = M.partialPivLu().solve(target);
  Point out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = c(k);
  return out;
}

void RescaledStepper::step(RescaledState& s) const {
  if (!(s.w.grid == grid_)) throw Error(Errc::grid_mismatch, "state grid differs from stepper grid");
  if (s.w.frame != Frame::similarity) throw Error(Errc::wrong_frame, "rescaled stepping acts on similarity fields");
  Field next = s.w;
  auto& v = next.values;
  for (double& x : v) x += dtau_ * signed_power(x, fp_.p);
  for (std::size_t k = 0; k < fp_.n; ++k) solve_lines(implicit_[k], k, v);
  const double damp = 1.0 / (1.0 + dtau_ / (fp_.p - 1.0));
  for (double& x : v) x *= damp;

  Point c(fp_.n);
  if (s.drift == DriftMode::fixed) {
    c = s.c_fixed;
    c.dim = fp_.n;
  } else if (s.drift == DriftMode::orthogonality && next.all_finite()) {
    c = consistent_drift(s.w, next);
  }
  for (std::size_t k = 0; k < fp_.n; ++k) {
    if (c[k] == 0.0) continue;
    const Axis& a = grid_.axis(k);
    const std::size_t N = a.count;
    const double r = dtau_ * c[k] / (2.0 * a.spacing());
    // rows r x[i-1] + x[i] - r x[i+1]; Neumann ends: the derivative
    // vanishes on the boundary rows, which stay identity rows
    std::vector<double> cp(N, 0.0), inv(N, 1.0);
    for (std::size_t i = 1; i + 1 < N; ++i) {
      if (i > 1 && cp[i - 1] == cp[i - 2]) {
        // the pivot recurrence has reached its fixed point; later rows repeat it exactly
        inv[i] = inv[i - 1];
        cp[i] = cp[i - 1];
        continue;
      }
      inv[i] = 1.0 / (1.0 - r * cp[i - 1]);
      cp[i] = -r * inv[i];
    }
    const std::size_t s = grid_.stride(k);
    const std::size_t outer = grid_.size() / (N * s);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < s; ++in) {
        double* x = v.data() + o * N * s + in;
        for (std::size_t i = 1; i + 1 < N; ++i) x[i * s] = (x[i * s] - r * x[(i - 1) * s]) * inv[i];
        for (std::size_t i = N - 1; i-- > 1;) x[i * s] -= cp[i] * x[(i + 1) * s];
      }
    }
  }

  s.w = std::move(next);
  s.c_last = c;
  s.tau += dtau_;
  if (!s.blown_up && (!s.w.all_finite() || s.w.max_abs() > cap_)) {
    s.blown_up = true;
    s.blowup_tau = s.tau;
  }
}

RescaledState step_rescaled(const RescaledState& s, double dtau, const FrameParams& fp, const QuadratureRule& q) {
  const RescaledStepper stepper(fp, q, s.w.grid, dtau);
  RescaledState out = s;
  stepper.step(out);
  return out;
}

Point drift_from_orthogonality(const RescaledState& s, const FrameParams& fp, const QuadratureRule& q) {
  const std::size_t n = fp.n;
  const Decomposition d = project(s.w, fp, q, s.tau);
  const ModeVector pn = project_nonlinear(d, fp, q);
  Eigen::MatrixXd M(n, n);
  Eigen::VectorXd rhs(n);
  for (std::size_t J = 0; J < n; ++J) {
    rhs(J) = -pn.b1[J];
    for (std::size_t I = 0; I < n; ++I)
      M(J, I) = I == J ? d.modes.b2_diag[J] : d.modes.off(I, J) / std::numbers::sqrt2;
  }
  const double mnorm = M.cwiseAbs().maxCoeff();
  if (mnorm == 0.0 || std::abs(M.determinant()) < 1e-12 * std::pow(mnorm, static_cast<double>(n)))
    throw Error(Errc::flat_profile, "profile too flat for drift control");
  const Eigen::VectorXd c = M.partialPivLu().solve(rhs);
  Point out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = c(k);
  return out;
}

namespace {

TrajectorySample observe(const RescaledState& s, const ModalProjector& proj) {
  const Decomposition d = proj.project(s.w, s.tau);
  TrajectorySample out;
  out.tau = s.tau;
  out.modes = d.modes;
  out.wperp_l2 = norm_rho(d.remainder, proj.rule());
  out.wperp_h1 = norm_h1_rho(d.remainder, proj.rule());
  out.sup_w = s.w.max();
  if (s.drift != DriftMode::none) out.c = s.c_last;
  return out;
}

}  // namespace

Trajectory run_rescaled(const Field& w0, double tau0, double tau_end, const FrameParams& fp, const QuadratureRule& q,
                        const RescaledRunOptions& opts) {
  if (!(tau_end > tau0)) throw Error(Errc::invalid_argument, "tau_end must exceed tau0");
  const RescaledStepper stepper(fp, q, w0.grid, opts.dtau, opts.blowup_cap);
  RescaledState s;
  s.w = w0;
  s.tau = tau0;
  s.drift = opts.drift;
  s.c_fixed = opts.c_fixed;
  s.c_last = Point(fp.n);

  Trajectory traj;
  traj.n = fp.n;
  auto record = [&] {
    traj.samples.push_back(observe(s, stepper.projector()));
    if (opts.observer) opts.observer(s);
  };
  record();
  const auto steps = static_cast<long>(std::llround((tau_end - tau0) / opts.dtau));
  const long every = std::max(1L, static_cast<long>(std::llround(opts.tau_out / opts.dtau)));
  for (long k = 1; k <= steps; ++k) {
    stepper.step(s);
    if (s.blown_up) {
      traj.exit = RunExit::rescaled_blowup;
      traj.exit_tau = s.blowup_tau;
      return traj;
    }
    if (s.w.max() < fp.kappa) {
      record();
      traj.exit = RunExit::quench;
      traj.exit_tau = s.tau;
      return traj;
    }
    if (k % every == 0 || k == steps) record();
  }
  traj.exit = RunExit::completed;
  traj.exit_tau = s.tau;
  return traj;
}

ShootResult shoot_h0(const Field& w0, double tau0, double tau_end, const FrameParams& fp, const QuadratureRule& q,
                     const RescaledRunOptions& opts, double bracket, int max_trials) {
  double lo = -bracket;
  double hi = bracket;
  ShootResult out;
  Field trial = w0;
  for (int t = 0; t < max_trials; ++t) {
    const double e = 0.5 * (lo + hi);
    if (e <= lo || e >= hi) break;  // bracket exhausted in double precision
    for (std::size_t i = 0; i < trial.values.size(); ++i) trial.values[i] = w0.values[i] + e;
    auto traj = run_rescaled(trial, tau0, tau_end, fp, q, opts);
    out.trials = t + 1;
    switch (traj.exit) {
      case RunExit::completed:
        out.survived = true;
        out.offset = e;
        // a survivor still leans towards one side; the final b0 tells which
        (traj.samples.back().modes.b0 > 0.0 ? hi : lo) = e;
        out.trajectory = std::move(traj);
        break;
      case RunExit::rescaled_blowup:
        hi = e;
        break;
      case RunExit::quench:
        lo = e;
        break;
      case RunExit::unstable_escape:
        if (!out.survived) {
          out.offset = e;
          out.trajectory = std::move(traj);
        }
        return out;
    }
    if (!out.survived) {
      out.offset = e;
      out.trajectory = std::move(traj);
    }
  }
  return out;
}

}  // namespace blowup
