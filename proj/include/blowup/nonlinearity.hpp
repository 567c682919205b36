#pragma once

#include <vector>

#include "blowup/spectral.hpp"
#include "blowup/weighted_space.hpp"

namespace blowup {

/// sign(x) |x|^p, computed as |x|^{p-1} x so negative bases stay finite for
/// non-integer p.
double signed_power(double x, double p);

/// N(W) = |kappa+W|^{p-1}(kappa+W) - kappa^p - p kappa^{p-1} W and its convex
/// extension below W = -kappa.
struct NonlinearTerm {
  FrameParams fp;

  explicit NonlinearTerm(const FrameParams& f) : fp(f) {}

  double operator()(double W) const;
  double convexified(double s) const;
  /// Leading quadratic part p W^2 / (2 kappa).
  double quadratic(double W) const { return fp.p * W * W / (2.0 * fp.kappa); }
};

double nonlinear_remainder(double W, const FrameParams& fp);
/// Pointwise N of a deviation field W = w - kappa.
Field nonlinear_remainder(const Field& W, const FrameParams& fp);
double convexified_remainder(double s, const FrameParams& fp);

/// <N(W), H>_rho for every tracked H, where W is rebuilt at the nodes from
/// the modes (closed form) plus the interpolated remainder.
ModeVector project_nonlinear(const Decomposition& d, const FrameParams& fp, const QuadratureRule& q);

enum class QuadraticTerms {
  leading,  // leading terms only
  exact,    // full closed form of <(b2.H2)^2, H2>_rho
};

/// <(b2.H2)^2, H> for the H2 targets in closed form; b0, b1 entries of the
/// result are zero. Leading terms: diagonal 2 sqrt2 k0^n b_JJ^2, off-diagonal
/// 2 sqrt2 k0^n (b_II + b_JJ) b_IJ.
ModeVector quadratic_mode_projection(const ModeVector& m, const FrameParams& fp,
                                     QuadraticTerms terms = QuadraticTerms::leading);

/// Triple products <H_a H_b H_c>_rho over the tracked basis, by quadrature,
/// computed once per dimension. Index as table[(a * K + b) * K + c], K = mode_count(n).
const std::vector<double>& triple_product_table(std::size_t n);

/// <(p/(2 kappa)) W^2, H_c>_rho for W = sum_a b_a H_a, for every tracked H_c.
ModeVector quadratic_closure(const ModeVector& m, const FrameParams& fp);

}  // namespace blowup
