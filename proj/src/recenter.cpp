#include "blowup/recenter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "blowup/error.hpp"

namespace blowup {

namespace {

double half_extent(const Grid& g) {
  double L = g.axis(0).hi - g.axis(0).lo;
  for (const Axis& a : g.axes()) L = std::min(L, a.hi - a.lo);
  return 0.5 * L;
}

void check_shift(const Field& w, const Point& xi) {
  const double limit = 0.25 * half_extent(w.grid);
  if (xi.norm() > limit) {
    std::ostringstream msg;
    msg << "|xi| = " << xi.norm() << " exceeds L/4 = " << limit;
    throw Error(Errc::shift_too_large, msg.str());
  }
}

// Deviation w - kappa at the shifted nodes. Beyond the grid the deviation is
// taken as zero, where the weight is negligible.
NodeValues shifted_deviation(const Field& w, const Point& xi, const FrameParams& fp, const QuadratureRule& q) {
  Field dev = w;
  for (double& v : dev.values) v -= fp.kappa;
  return node_values(dev, q, xi);
}

double scale_of(const Field& w, const FrameParams& fp, const QuadratureRule& q) {
  Field dev = w;
  for (double& v : dev.values) v -= fp.kappa;
  return std::max(1.0, norm_rho(dev, q));
}

Eigen::VectorXd residual_from(const NodeValues& v, const FrameParams& fp, const QuadratureRule& q) {
  Eigen::VectorXd F(fp.n);
  for (std::size_t J = 0; J < fp.n; ++J) F(J) = inner_product_rho(v, node_values(EigenIndex::h1(J), fp, q), q);
  return F;
}

Eigen::MatrixXd jacobian_from(const NodeValues& v, const FrameParams& fp, const QuadratureRule& q) {
  Eigen::MatrixXd Jm(fp.n, fp.n);
  for (std::size_t I = 0; I < fp.n; ++I) {
    for (std::size_t J = I; J < fp.n; ++J) {
      const double ip = inner_product_rho(v, node_values(EigenIndex::h2(I, J), fp, q), q);
      if (I == J) {
        Jm(I, I) = ip;
      } else {
        Jm(I, J) = Jm(J, I) = ip / std::numbers::sqrt2;
      }
    }
  }
  return Jm;
}

void require_nonsingular(const Eigen::MatrixXd& Jm, double scale, std::size_t n) {
  const double jnorm = Jm.cwiseAbs().maxCoeff();
  if (jnorm < 1e-12 * scale || std::abs(Jm.determinant()) < 1e-12 * std::pow(jnorm, static_cast<double>(n)))
    throw Error(Errc::degenerate_profile, "recentering Jacobian is singular");
}

}  // namespace

Eigen::VectorXd center_residual(const Field& w, const Point& xi, const FrameParams& fp, const QuadratureRule& q) {
  check_shift(w, xi);
  return residual_from(shifted_deviation(w, xi, fp, q), fp, q);
}

Eigen::MatrixXd center_jacobian(const Field& w, const Point& xi, const FrameParams& fp, const QuadratureRule& q) {
  check_shift(w, xi);
  return jacobian_from(shifted_deviation(w, xi, fp, q), fp, q);
}

CenterSolve solve_center(const Field& w, const FrameParams& fp, const QuadratureRule& q, const CenterOptions& opts) {
  if (w.frame != Frame::similarity) throw Error(Errc::wrong_frame, "recentering acts on similarity-frame fields");
  const double scale = scale_of(w, fp, q);
  const double seed_limit = 0.125 * half_extent(w.grid);
  Point xi(fp.n);
  if (opts.xi0) {
    xi = *opts.xi0;
    xi.dim = fp.n;
    if (xi.norm() > seed_limit) throw Error(Errc::shift_too_large, "initial guess beyond L/8");
  } else {
    // argmax seed; a flat or edge-peaked field falls back to the origin
    const Point peak = w.grid.coords(w.argmax());
    if (peak.norm() <= seed_limit) xi = peak;
  }

  CenterSolve out;
  NodeValues v = shifted_deviation(w, xi, fp, q);
  Eigen::VectorXd F = residual_from(v, fp, q);
  double fnorm = F.lpNorm<Eigen::Infinity>();
  Point best = xi;
  double best_norm = fnorm;
  for (int it = 0; it < opts.max_iter && fnorm >= opts.tol * scale; ++it) {
    const Eigen::MatrixXd Jm = jacobian_from(v, fp, q);
    require_nonsingular(Jm, scale, fp.n);
    const Eigen::VectorXd step = Jm.partialPivLu().solve(F);

    double lambda = 1.0;
    Point trial = xi;
    NodeValues tv;
    Eigen::VectorXd tF;
    for (int halving = 0; halving <= 6; ++halving) {
      for (std::size_t k = 0; k < fp.n; ++k) trial[k] = xi[k] - lambda * step(k);
      check_shift(w, trial);
      tv = shifted_deviation(w, trial, fp, q);
      tF = residual_from(tv, fp, q);
      if (tF.lpNorm<Eigen::Infinity>() < fnorm) break;
      lambda *= 0.5;
    }
    xi = trial;
    v = std::move(tv);
    F = tF;
    fnorm = F.lpNorm<Eigen::Infinity>();
    out.iterations = it + 1;
    if (fnorm < best_norm) {
      best = xi;
      best_norm = fnorm;
    }
  }
  out.xi = best;
  out.residual = best_norm;
  out.converged = best_norm < opts.tol * scale;
  if (out.iterations == 0) require_nonsingular(jacobian_from(v, fp, q), scale, fp.n);

  // distance from the unshifted reference profile m sum_J H2(J,J)
  const ModalProjector proj(fp, q, w.grid);
  const auto d = proj.project(w);
  double m = 0.0;
  for (double b : d.modes.b2_diag) m += b;
  m /= static_cast<double>(fp.n);
  Field ref = w;
  for (std::size_t k = 0; k < fp.n; ++k) {
    const auto& h = proj.basis_on_grid(1 + fp.n + k);
    for (std::size_t i = 0; i < ref.values.size(); ++i) ref.values[i] -= m * h[i];
  }
  for (double& val : ref.values) val -= fp.kappa;
  const double dist = norm_rho(ref, q);
  out.c1_ratio = dist > 0.0 ? best.norm() / dist : 0.0;
  return out;
}

Eigen::MatrixXd shift_basis_expansion(const Point& xi, const FrameParams& fp) {
  const std::size_t n = fp.n;
  const auto basis = tracked_basis(n);
  const std::size_t K = basis.size();
  auto pos = [&](const EigenIndex& e) {
    return static_cast<std::size_t>(std::find(basis.begin(), basis.end(), e) - basis.begin());
  };
  const double r2 = std::numbers::sqrt2;
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(K, K);
  for (std::size_t a = 0; a < K; ++a) {
    const EigenIndex& e = basis[a];
    switch (e.kind) {
      case EigenIndex::Kind::H0:
        break;
      case EigenIndex::Kind::H1:
        E(a, 0) += xi[e.i] / r2;
        break;
      case EigenIndex::Kind::H2:
        if (e.i == e.j) {
          E(a, pos(EigenIndex::h1(e.i))) += xi[e.i];
          E(a, 0) += xi[e.i] * xi[e.i] / (2.0 * r2);
        } else {
          E(a, pos(EigenIndex::h1(e.i))) += xi[e.j] / r2;
          E(a, pos(EigenIndex::h1(e.j))) += xi[e.i] / r2;
          E(a, 0) += 0.5 * xi[e.i] * xi[e.j];
        }
        break;
    }
  }
  return E;
}

ModeVector shift_modes(const ModeVector& m, const Point& xi, const FrameParams& fp) {
  const Eigen::MatrixXd E = shift_basis_expansion(xi, fp);
  ModeVector out(fp.n);
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t c = 0; c < m.size(); ++c) out[c] += m[a] * E(a, c);
  return out;
}

Field shifted(const Field& w, const Point& xi) {
  const Grid& g = w.grid;
  std::vector<Point> pts(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.coords(i);
    for (std::size_t k = 0; k < g.dimension(); ++k) x[k] = std::clamp(x[k] + xi[k], g.axis(k).lo, g.axis(k).hi);
    pts[i] = x;
  }
  Field out(g, w.frame);
  out.values = SamplePlan(g, pts).apply(w.values);
  return out;
}

}  // namespace blowup
