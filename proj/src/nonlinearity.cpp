#include "blowup/nonlinearity.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>

#include "blowup/error.hpp"

namespace blowup {

double signed_power(double x, double p) {
  if (p == 3.0) return x * x * x;
  if (p == 2.0) return std::abs(x) * x;
  if (p == 5.0) {
    const double x2 = x * x;
    return x2 * x2 * x;
  }
  return std::pow(std::abs(x), p - 1.0) * x;
}

double NonlinearTerm::operator()(double W) const {
  const double kp1 = std::pow(fp.kappa, fp.p - 1.0);
  return signed_power(fp.kappa + W, fp.p) - kp1 * fp.kappa - fp.p * kp1 * W;
}

double NonlinearTerm::convexified(double s) const {
  if (s > -fp.kappa) return (*this)(s);
  const double kp1 = std::pow(fp.kappa, fp.p - 1.0);
  const double a = fp.kappa + s;
  return (fp.p - 1.0) * kp1 * fp.kappa - 2.0 * fp.p * kp1 * a + a * a;
}

double nonlinear_remainder(double W, const FrameParams& fp) { return NonlinearTerm(fp)(W); }

Field nonlinear_remainder(const Field& W, const FrameParams& fp) {
  const NonlinearTerm N(fp);
  Field out(W.grid, W.frame);
  for (std::size_t i = 0; i < W.values.size(); ++i) out.values[i] = N(W.values[i]);
  return out;
}

double convexified_remainder(double s, const FrameParams& fp) { return NonlinearTerm(fp).convexified(s); }

ModeVector project_nonlinear(const Decomposition& d, const FrameParams& fp, const QuadratureRule& q) {
  if (d.modes.dimension() != fp.n) throw Error(Errc::grid_mismatch, "mode vector dimension differs from frame");
  NodeValues W = node_values(d.remainder, q);
  const auto basis = tracked_basis(fp.n);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double b = d.modes[k];
    if (b == 0.0) continue;
    const NodeValues h = node_values(basis[k], fp, q);
    for (std::size_t i = 0; i < W.size(); ++i) W[i] += b * h[i];
  }
  const NonlinearTerm N(fp);
  for (double& v : W) v = N(v);
  ModeVector out(fp.n);
  for (std::size_t k = 0; k < basis.size(); ++k) out[k] = inner_product_rho(W, node_values(basis[k], fp, q), q);
  return out;
}

ModeVector quadratic_mode_projection(const ModeVector& m, const FrameParams& fp, QuadraticTerms terms) {
  const std::size_t n = fp.n;
  if (m.dimension() != n) throw Error(Errc::grid_mismatch, "mode vector dimension differs from frame");
  const double k = fp.k0n();
  const double s2 = std::numbers::sqrt2;
  ModeVector out(n);
  for (std::size_t J = 0; J < n; ++J) {
    const double b = m.b2_diag[J];
    out.b2_diag[J] = 2.0 * s2 * k * b * b;
    if (terms == QuadraticTerms::exact) {
      // <H2(J,J), H2(I,J)^2> = sqrt2 k0^n for each pair containing J
      for (std::size_t I = 0; I < n; ++I)
        if (I != J) out.b2_diag[J] += s2 * k * m.off(I, J) * m.off(I, J);
    }
  }
  const auto pairs = off_diagonal_pairs(n);
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    const auto [I, J] = pairs[a];
    const double bij = m.b2_off[a];
    out.b2_off[a] = 2.0 * s2 * k * (m.b2_diag[I] + m.b2_diag[J]) * bij;
    if (terms == QuadraticTerms::exact) {
      // <H2(I,K) H2(K,J) H2(I,J)> = k0^n for K outside {I,J}, counted twice
      for (std::size_t K = 0; K < n; ++K)
        if (K != I && K != J) out.b2_off[a] += 2.0 * k * m.off(I, K) * m.off(K, J);
    }
  }
  return out;
}

const std::vector<double>& triple_product_table(std::size_t n) {
  if (n < 1 || n > kMaxDim) throw Error(Errc::unsupported_dimension, "n must be 1, 2 or 3");
  static std::array<std::vector<double>, kMaxDim + 1> tables;
  static std::mutex guard;
  const std::lock_guard lock(guard);
  auto& table = tables[n];
  if (table.empty()) {
    // Degree-6 integrands; 8 nodes per axis integrate them exactly.
    const auto fp = FrameParams::make(2.0, n);
    const auto q = build_quadrature(n, 8);
    const auto basis = tracked_basis(n);
    const std::size_t K = basis.size();
    std::vector<NodeValues> h;
    for (const auto& e : basis) h.push_back(node_values(e, fp, q));
    table.assign(K * K * K, 0.0);
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b)
        for (std::size_t c = 0; c < K; ++c) {
          double s = 0.0;
          for (std::size_t i = 0; i < q.weights.size(); ++i) s += q.weights[i] * h[a][i] * h[b][i] * h[c][i];
          table[(a * K + b) * K + c] = s;
        }
  }
  return table;
}

ModeVector quadratic_closure(const ModeVector& m, const FrameParams& fp) {
  const std::size_t K = mode_count(fp.n);
  const auto& table = triple_product_table(fp.n);
  const double scale = fp.p / (2.0 * fp.kappa);
  ModeVector out(fp.n);
  for (std::size_t a = 0; a < K; ++a) {
    if (m[a] == 0.0) continue;
    for (std::size_t b = 0; b < K; ++b) {
      if (m[b] == 0.0) continue;
      const double ab = m[a] * m[b];
      for (std::size_t c = 0; c < K; ++c) out[c] += scale * ab * table[(a * K + b) * K + c];
    }
  }
  return out;
}

}  // namespace blowup
