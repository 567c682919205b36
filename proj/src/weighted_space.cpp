#include "blowup/weighted_space.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "blowup/error.hpp"

namespace blowup {

FrameParams FrameParams::make(double p, std::size_t n) {
  if (!(p > 1.0)) throw Error(Errc::invalid_argument, "exponent p must exceed 1");
  if (n < 1 || n > kMaxDim) throw Error(Errc::unsupported_dimension, "n must be 1, 2 or 3");
  FrameParams fp;
  fp.p = p;
  fp.n = n;
  fp.kappa = std::pow(p - 1.0, -1.0 / (p - 1.0));
  fp.k0 = std::pow(4.0 * std::numbers::pi, -0.25);
  fp.c_p = std::numbers::sqrt2 * p * fp.k0n() / fp.kappa;
  return fp;
}

double FrameParams::k0n() const { return std::pow(k0, static_cast<double>(n)); }

QuadratureRule build_quadrature(std::size_t n, std::size_t m) {
  if (n < 1 || n > kMaxDim) throw Error(Errc::unsupported_dimension, "quadrature dimension must be 1, 2 or 3");
  if (m < 8) throw Error(Errc::too_few_points, "need at least 8 points per axis");

  // GSL's Hermite rule integrates against exp(-y^2); z = 2y turns that into
  // exp(-z^2/4) and doubles each weight.
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, m, 0.0, 1.0, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw Error(Errc::too_few_points, "GSL could not build the Hermite rule");
  const double* y = gsl_integration_fixed_nodes(ws.get());
  const double* wy = gsl_integration_fixed_weights(ws.get());
  std::vector<double> z1(m), w1(m);
  for (std::size_t i = 0; i < m; ++i) {
    z1[i] = 2.0 * y[i];
    w1[i] = 2.0 * wy[i];
  }

  QuadratureRule q;
  q.dimension = n;
  q.points_per_axis = m;
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) total *= m;
  q.nodes.reserve(total);
  q.weights.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Point z(n);
    double w = 1.0;
    std::size_t rem = flat;
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t i = rem % m;
      rem /= m;
      z[k] = z1[i];
      w *= w1[i];
    }
    q.nodes.push_back(z);
    q.weights.push_back(w);
  }
  return q;
}

EigenIndex EigenIndex::h2(std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return {Kind::H2, i, j};
}

double EigenIndex::eigenvalue() const {
  switch (kind) {
    case Kind::H0: return 0.0;
    case Kind::H1: return 0.5;
    case Kind::H2: return 1.0;
  }
  return 0.0;
}

std::string EigenIndex::label() const {
  std::ostringstream s;
  switch (kind) {
    case Kind::H0: s << "H0"; break;
    case Kind::H1: s << "H1(" << i + 1 << ")"; break;
    case Kind::H2: s << "H2(" << i + 1 << "," << j + 1 << ")"; break;
  }
  return s.str();
}

std::vector<std::pair<std::size_t, std::size_t>> off_diagonal_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<EigenIndex> tracked_basis(std::size_t n) {
  std::vector<EigenIndex> basis{EigenIndex::h0()};
  for (std::size_t i = 0; i < n; ++i) basis.push_back(EigenIndex::h1(i));
  for (std::size_t i = 0; i < n; ++i) basis.push_back(EigenIndex::h2(i, i));
  for (auto [i, j] : off_diagonal_pairs(n)) basis.push_back(EigenIndex::h2(i, j));
  return basis;
}

double eval_eigenfunction(const EigenIndex& idx, const Point& z, const FrameParams& fp) {
  const double k = fp.k0n();
  switch (idx.kind) {
    case EigenIndex::Kind::H0:
      return k;
    case EigenIndex::Kind::H1:
      return k / std::numbers::sqrt2 * z[idx.i];
    case EigenIndex::Kind::H2:
      if (idx.i == idx.j) return k / (2.0 * std::numbers::sqrt2) * (z[idx.i] * z[idx.i] - 2.0);
      return 0.5 * k * z[idx.i] * z[idx.j];
  }
  return 0.0;
}

Field sample_eigenfunction(const EigenIndex& idx, const Grid& grid, const FrameParams& fp) {
  return sample(grid, Frame::similarity, [&](const Point& z) { return eval_eigenfunction(idx, z, fp); });
}

NodeValues node_values(const EigenIndex& idx, const FrameParams& fp, const QuadratureRule& q) {
  NodeValues v(q.nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = eval_eigenfunction(idx, q.nodes[i], fp);
  return v;
}

NodeValues node_values(const std::function<double(const Point&)>& f, const QuadratureRule& q) {
  NodeValues v(q.nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(q.nodes[i]);
  return v;
}

NodeValues node_values(const Field& f, const QuadratureRule& q, const std::optional<Point>& shift,
                       Extrapolation policy) {
  if (f.grid.dimension() != q.dimension) throw Error(Errc::grid_mismatch, "field and quadrature dimensions differ");
  if (!shift) return SamplePlan(f.grid, q.nodes, policy).apply(f.values);
  std::vector<Point> pts(q.nodes.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = q.nodes[i] + *shift;
  return SamplePlan(f.grid, pts, policy).apply(f.values);
}

double inner_product_rho(const NodeValues& f, const NodeValues& g, const QuadratureRule& q) {
  if (f.size() != q.weights.size() || g.size() != q.weights.size())
    throw Error(Errc::grid_mismatch, "node values do not match the quadrature rule");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += q.weights[i] * f[i] * g[i];
  return s;
}

double inner_product_rho(const Field& f, const Field& g, const QuadratureRule& q, Extrapolation policy) {
  return inner_product_rho(node_values(f, q, std::nullopt, policy), node_values(g, q, std::nullopt, policy), q);
}

double inner_product_rho(const std::function<double(const Point&)>& f,
                         const std::function<double(const Point&)>& g, const QuadratureRule& q) {
  return inner_product_rho(node_values(f, q), node_values(g, q), q);
}

double norm_rho(const Field& f, const QuadratureRule& q) {
  const NodeValues v = node_values(f, q);
  return std::sqrt(inner_product_rho(v, v, q));
}

double norm_h1_rho(const Field& f, const QuadratureRule& q) {
  for (const Axis& a : f.grid.axes())
    if (a.count < 3) throw Error(Errc::grid_too_coarse, "H1 norm needs >= 3 points per axis");
  const SamplePlan plan(f.grid, q.nodes);
  auto sq = [&](const std::vector<double>& values) {
    const NodeValues v = plan.apply(values);
    return inner_product_rho(v, v, q);
  };
  double total = sq(f.values);
  for (std::size_t k = 0; k < f.grid.dimension(); ++k) total += sq(gradient(f, k).values);
  return std::sqrt(total);
}

Field apply_Az(const Field& f) {
  if (f.frame != Frame::similarity) throw Error(Errc::wrong_frame, "A_z acts on similarity-frame fields");
  const Grid& g = f.grid;
  Field out(g, Frame::similarity);
  const auto& v = f.values;
  for (std::size_t k = 0; k < g.dimension(); ++k) {
    const Axis& ax = g.axis(k);
    if (ax.count < 4) throw Error(Errc::grid_too_coarse, "A_z needs >= 4 points per axis");
    const double h = ax.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const double inv_2h = 1.0 / (2.0 * h);
    const std::size_t s = g.stride(k);
    const std::size_t last = ax.count - 1;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = g.index_along(i, k);
      const double z = ax.coord(j);
      double d1, d2;
      if (j == 0) {
        d1 = (-3.0 * v[i] + 4.0 * v[i + s] - v[i + 2 * s]) * inv_2h;
        d2 = (2.0 * v[i] - 5.0 * v[i + s] + 4.0 * v[i + 2 * s] - v[i + 3 * s]) * inv_h2;
      } else if (j == last) {
        d1 = (3.0 * v[i] - 4.0 * v[i - s] + v[i - 2 * s]) * inv_2h;
        d2 = (2.0 * v[i] - 5.0 * v[i - s] + 4.0 * v[i - 2 * s] - v[i - 3 * s]) * inv_h2;
      } else {
        d1 = (v[i + s] - v[i - s]) * inv_2h;
        d2 = (v[i + s] - 2.0 * v[i] + v[i - s]) * inv_h2;
      }
      out.values[i] += d2 - 0.5 * z * d1;
    }
  }
  return out;
}

}  // namespace blowup
