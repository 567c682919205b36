#pragma once

// Time stepping of the rescaled equation
//   w_tau = A_z w - w/(p-1) + |w|^{p-1} w  (+ c(tau) . grad w when drifted)
// on a symmetric similarity-frame grid with homogeneous Neumann ends.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "blowup/spectral.hpp"

namespace blowup {

enum class DriftMode { none, fixed, orthogonality };

struct RescaledState {
  Field w;
  double tau = 0.0;
  DriftMode drift = DriftMode::none;
  Point c_fixed;       // used when drift == fixed
  Point c_last;        // drift applied in the most recent step
  bool blown_up = false;
  double blowup_tau = 0.0;
};

struct TrajectorySample {
  double tau = 0.0;
  ModeVector modes;
  double wperp_l2 = 0.0;
  double wperp_h1 = 0.0;
  double sup_w = 0.0;
  std::optional<Point> c;
};

enum class RunExit { completed, rescaled_blowup, quench, unstable_escape };

const char* to_string(RunExit e);

struct Trajectory {
  std::size_t n = 0;
  std::vector<TrajectorySample> samples;
  RunExit exit = RunExit::completed;
  double exit_tau = 0.0;

  /// Columns tau, b0, b1_*, b2_diag_*, b2_off_*, wperp_l2, wperp_h1, sup_w, c_*.
  void write_csv(std::ostream& os) const;
};

/// Largest accepted step.
inline constexpr double kMaxRescaledStep = 0.1;

/// Prefactorized IMEX integrator for one grid and step size.
/// Linear part: (1 + dtau/(p-1)) prod_j (I - dtau A_j) w_new = w + dtau |w|^{p-1} w,
/// A_j = d_j^2 - (z_j/2) d_j; the drift (I - dtau c_j d_j) follows per axis.
class RescaledStepper {
 public:
  RescaledStepper(const FrameParams& fp, const QuadratureRule& q, const Grid& grid, double dtau,
                  double blowup_cap = 1e3);

  void step(RescaledState& s) const;

  /// Drift that keeps every <w, H1(J)>_rho relaxing at rate lambda towards
  /// zero over one step of the discrete scheme, given the undrifted update.
  Point consistent_drift(const Field& before, const Field& after, double lambda = 0.5) const;

  double dtau() const { return dtau_; }
  const ModalProjector& projector() const { return proj_; }

 private:
  struct Tridiag {
    std::vector<double> sub, sup_prime, inv_pivot;
  };
  static Tridiag factor(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup);
  void solve_lines(const Tridiag& t, std::size_t axis, std::vector<double>& v) const;

  FrameParams fp_;
  ModalProjector proj_;
  Grid grid_;
  double dtau_;
  double cap_;
  std::vector<Tridiag> implicit_;  // one per axis
  // <v, H1(J)>_rho and <d_I v, H1(J)>_rho as dot products with grid vectors
  std::vector<std::vector<double>> h1_dual_;    // [J]
  std::vector<std::vector<double>> grad_dual_;  // [I * n + J]
};

/// One step, building a stepper on the fly.
RescaledState step_rescaled(const RescaledState& s, double dtau, const FrameParams& fp, const QuadratureRule& q);

/// Drift c solving M c = -<N, H1>_rho with M(J,J) = b2(J,J), M(I,J) = b2(I,J)/sqrt2.
/// Throws flat_profile when M is singular.
Point drift_from_orthogonality(const RescaledState& s, const FrameParams& fp, const QuadratureRule& q);

struct RescaledRunOptions {
  double dtau = 1e-3;
  double tau_out = 0.1;
  double blowup_cap = 1e3;
  DriftMode drift = DriftMode::none;
  Point c_fixed;
  std::function<void(const RescaledState&)> observer;  // called at every sample
};

Trajectory run_rescaled(const Field& w0, double tau0, double tau_end, const FrameParams& fp, const QuadratureRule& q,
                        const RescaledRunOptions& opts = {});

/// Bisection on a constant offset e (a multiple of H0) of w0 + e against the H0 instability: a
/// blowup lowers the upper bracket, a quench raises the lower one, a trial
/// that reaches tau_end moves the bracket by the sign of its final b0. Runs
/// until the bracket is exhausted in double precision or max_trials is hit
/// and returns the last trial that reached tau_end.
struct ShootResult {
  double offset = 0.0;
  int trials = 0;
  bool survived = false;
  Trajectory trajectory;
};

ShootResult shoot_h0(const Field& w0, double tau0, double tau_end, const FrameParams& fp, const QuadratureRule& q,
                     const RescaledRunOptions& opts, double bracket = 2e-2, int max_trials = 64);

}  // namespace blowup
