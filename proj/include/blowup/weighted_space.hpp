#pragma once

// Gaussian-weighted space L^2_rho, rho(z) = exp(-|z|^2/4): quadrature, the
// normalized Hermite eigenfunctions of A_z = Laplacian - (z/2).grad up to
// degree two, weighted inner products and norms, and the discrete A_z.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blowup/field.hpp"

namespace blowup {

/// Problem constants for u_t = Lap u + |u|^{p-1} u in R^n, plus the optional
/// blowup frame (T, center) used when moving between physical and
/// similarity variables.
struct FrameParams {
  double p = 3.0;
  std::size_t n = 1;
  double kappa = 0.0;  // (p-1)^{-1/(p-1)}, the stationary rescaled amplitude
  double k0 = 0.0;     // (4 pi)^{-1/4}, so that k0^n normalizes H0
  double c_p = 0.0;    // sqrt(2) p k0^n / kappa, the diagonal Riccati coefficient
  std::optional<double> T;
  std::optional<Point> center;

  static FrameParams make(double p, std::size_t n);

  double k0n() const;  // k0^n
};

/// Nodes and weights for integrals of f(z) rho(z) over R^n.
struct QuadratureRule {
  std::size_t dimension = 0;
  std::size_t points_per_axis = 0;
  std::vector<Point> nodes;
  std::vector<double> weights;
};

/// Tensor Gauss-Hermite rule, exact for f(z) rho(z) with polynomial f of
/// degree <= 2m-1 in each variable. n in {1,2,3}, m >= 8.
QuadratureRule build_quadrature(std::size_t n, std::size_t m = 64);

/// Labels one of the tracked eigenfunctions. Indices are 0-based; H2 keeps i <= j.
struct EigenIndex {
  enum class Kind { H0, H1, H2 };
  Kind kind = Kind::H0;
  std::size_t i = 0;
  std::size_t j = 0;

  static EigenIndex h0() { return {Kind::H0, 0, 0}; }
  static EigenIndex h1(std::size_t i) { return {Kind::H1, i, i}; }
  static EigenIndex h2(std::size_t i, std::size_t j);

  /// mu with A_z H = -mu H: 0, 1/2 or 1.
  double eigenvalue() const;
  std::string label() const;  // 1-based, e.g. "H2(1,2)"
  bool operator==(const EigenIndex&) const = default;
};

/// The 1 + n + n(n+1)/2 tracked eigenfunctions in wire order:
/// H0, H1(1..n), H2 diagonal (1..n), H2 off-diagonal in lexicographic pairs.
std::vector<EigenIndex> tracked_basis(std::size_t n);

/// Off-diagonal pairs (i < j) in lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> off_diagonal_pairs(std::size_t n);

/// Closed-form value of a normalized eigenfunction.
double eval_eigenfunction(const EigenIndex& idx, const Point& z, const FrameParams& fp);

/// Eigenfunction sampled at the grid, always from the closed form.
Field sample_eigenfunction(const EigenIndex& idx, const Grid& grid, const FrameParams& fp);

// Values at the quadrature nodes. Inner products are plain weighted sums of these.
using NodeValues = std::vector<double>;

NodeValues node_values(const EigenIndex& idx, const FrameParams& fp, const QuadratureRule& q);
NodeValues node_values(const std::function<double(const Point&)>& f, const QuadratureRule& q);
/// Interpolates a field at the nodes shifted by `shift` (f(z + shift)).
NodeValues node_values(const Field& f, const QuadratureRule& q, const std::optional<Point>& shift = std::nullopt,
                       Extrapolation policy = Extrapolation::clamp_to_zero);

double inner_product_rho(const NodeValues& f, const NodeValues& g, const QuadratureRule& q);
double inner_product_rho(const Field& f, const Field& g, const QuadratureRule& q,
                         Extrapolation policy = Extrapolation::clamp_to_zero);
double inner_product_rho(const std::function<double(const Point&)>& f,
                         const std::function<double(const Point&)>& g, const QuadratureRule& q);

double norm_rho(const Field& f, const QuadratureRule& q);

/// sqrt(||f||^2 + sum_J ||d_J f||^2) with central-difference gradients.
double norm_h1_rho(const Field& f, const QuadratureRule& q);

/// Discrete A_z f = Lap f - (z/2).grad f: central differences inside,
/// one-sided second-order stencils on the boundary.
Field apply_Az(const Field& f);

}  // namespace blowup
