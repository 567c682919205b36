#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "blowup/field.hpp"
#include "blowup/weighted_space.hpp"

namespace blowup {

/// Coefficients of w - kappa on the tracked eigenfunctions.
/// Off-diagonal entries follow the lexicographic pair order (1,2),(1,3),...,(n-1,n).
struct ModeVector {
  double b0 = 0.0;
  std::vector<double> b1;
  std::vector<double> b2_diag;
  std::vector<double> b2_off;

  ModeVector() = default;
  explicit ModeVector(std::size_t n) : b1(n, 0.0), b2_diag(n, 0.0), b2_off(n * (n - 1) / 2, 0.0) {}

  std::size_t dimension() const { return b1.size(); }
  std::size_t size() const { return 1 + b1.size() + b2_diag.size() + b2_off.size(); }

  /// Coefficient in tracked_basis() order.
  double& operator[](std::size_t k);
  double operator[](std::size_t k) const;

  /// Flat wire order [b0, b1..., b2_diag..., b2_off...].
  std::vector<double> flat() const;
  static ModeVector from_flat(std::size_t n, std::span<const double> values);

  /// Off-diagonal coefficient for the pair (i, j), i != j, 0-based.
  double off(std::size_t i, std::size_t j) const;

  bool all_finite() const;
  double norm() const;  // Euclidean norm over all entries

  friend ModeVector operator+(ModeVector a, const ModeVector& b);
  friend ModeVector operator*(double s, ModeVector a);
};

std::size_t mode_count(std::size_t n);
std::size_t off_index(std::size_t n, std::size_t i, std::size_t j);

void to_json(nlohmann::json& j, const ModeVector& m);
void from_json(const nlohmann::json& j, ModeVector& m);

struct Decomposition {
  ModeVector modes;
  Field remainder;  // w_perp, orthogonal to every tracked eigenfunction
  double tau = 0.0;
};

/// Caches the basis at the quadrature nodes and the node interpolation plan
/// for one grid, so repeated projections of fields on that grid are cheap.
class ModalProjector {
 public:
  ModalProjector(const FrameParams& fp, const QuadratureRule& q, const Grid& grid);

  /// <v, H>_rho for every tracked H, with v given at the quadrature nodes.
  ModeVector coefficients(const NodeValues& v) const;
  /// Interpolates grid values at the nodes.
  NodeValues at_nodes(std::span<const double> values) const { return plan_.apply(values); }

  Decomposition project(const Field& w, double tau = 0.0) const;

  const FrameParams& frame() const { return fp_; }
  const QuadratureRule& rule() const { return q_; }
  const Grid& grid() const { return plan_.grid(); }
  const std::vector<EigenIndex>& basis() const { return basis_; }
  const NodeValues& basis_at_nodes(std::size_t k) const { return basis_nodes_[k]; }
  /// Grid vector a with a . values = <interpolated values, H_k>_rho.
  std::vector<double> dual_on_grid(std::size_t k) const;
  /// Basis function k sampled on the grid.
  const std::vector<double>& basis_on_grid(std::size_t k) const { return basis_grid_[k]; }

 private:
  FrameParams fp_;
  QuadratureRule q_;
  SamplePlan plan_;
  std::vector<EigenIndex> basis_;
  std::vector<NodeValues> basis_nodes_;
  std::vector<std::vector<double>> basis_grid_;
};

/// Splits w - kappa into tracked modes and an orthogonal remainder.
Decomposition project(const Field& w, const FrameParams& fp, const QuadratureRule& q, double tau = 0.0);

/// kappa + b0 H0 + b1.H1 + b2.H2 on the grid.
Field reconstruct(const ModeVector& m, const FrameParams& fp, const Grid& grid);

/// Sum of the mode expansion without kappa, evaluated at one point.
double mode_sum(const ModeVector& m, const Point& z, const FrameParams& fp);

/// tau * || w - kappa + (1/(c_p tau)) sum_J H2(J,J) ||_{H1_rho}.
double profile_residual(const Field& w, double tau, const FrameParams& fp, const QuadratureRule& q);

/// kappa - (1/(c_p tau)) sum_J H2(J,J) = kappa - kappa/(4 p tau) (|z|^2 - 2n).
ModeVector profile_modes(double tau, const FrameParams& fp);

}  // namespace blowup
