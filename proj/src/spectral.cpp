#include "blowup/spectral.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "blowup/error.hpp"

namespace blowup {

std::size_t mode_count(std::size_t n) { return 1 + n + n * (n + 1) / 2; }

std::size_t off_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  // pairs before row i: sum_{r<i} (n-1-r)
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

double& ModeVector::operator[](std::size_t k) {
  const std::size_t n = dimension();
  if (k == 0) return b0;
  if (k <= n) return b1[k - 1];
  if (k <= 2 * n) return b2_diag[k - 1 - n];
  return b2_off.at(k - 1 - 2 * n);
}

double ModeVector::operator[](std::size_t k) const { return const_cast<ModeVector&>(*this)[k]; }

std::vector<double> ModeVector::flat() const {
  std::vector<double> out;
  out.reserve(size());
  out.push_back(b0);
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), b2_diag.begin(), b2_diag.end());
  out.insert(out.end(), b2_off.begin(), b2_off.end());
  return out;
}

ModeVector ModeVector::from_flat(std::size_t n, std::span<const double> values) {
  if (values.size() != mode_count(n)) throw Error(Errc::invalid_argument, "flat mode vector has the wrong length");
  ModeVector m(n);
  for (std::size_t k = 0; k < values.size(); ++k) m[k] = values[k];
  return m;
}

double ModeVector::off(std::size_t i, std::size_t j) const { return b2_off[off_index(dimension(), i, j)]; }

bool ModeVector::all_finite() const {
  for (double v : flat())
    if (!std::isfinite(v)) return false;
  return true;
}

double ModeVector::norm() const {
  double s = 0.0;
  for (double v : flat()) s += v * v;
  return std::sqrt(s);
}

ModeVector operator+(ModeVector a, const ModeVector& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

ModeVector operator*(double s, ModeVector a) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] *= s;
  return a;
}

void to_json(nlohmann::json& j, const ModeVector& m) { j = m.flat(); }

void from_json(const nlohmann::json& j, ModeVector& m) {
  const auto v = j.get<std::vector<double>>();
  // length = 1 + n + n(n+1)/2 determines n
  for (std::size_t n = 1; n <= kMaxDim; ++n) {
    if (mode_count(n) == v.size()) {
      m = ModeVector::from_flat(n, v);
      return;
    }
  }
  throw Error(Errc::invalid_argument, "mode vector length does not match any supported dimension");
}

ModalProjector::ModalProjector(const FrameParams& fp, const QuadratureRule& q, const Grid& grid)
    : fp_(fp), q_(q), plan_(grid, q.nodes), basis_(tracked_basis(fp.n)) {
  if (grid.dimension() != fp.n || q.dimension != fp.n)
    throw Error(Errc::grid_mismatch, "grid, quadrature and frame dimensions must agree");
  for (const auto& e : basis_) {
    basis_nodes_.push_back(node_values(e, fp, q));
    basis_grid_.push_back(sample_eigenfunction(e, grid, fp).values);
  }
}

std::vector<double> ModalProjector::dual_on_grid(std::size_t k) const {
  NodeValues y(q_.weights.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = q_.weights[i] * basis_nodes_[k][i];
  return plan_.apply_transpose(y);
}

ModeVector ModalProjector::coefficients(const NodeValues& v) const {
  ModeVector m(fp_.n);
  for (std::size_t k = 0; k < basis_.size(); ++k) m[k] = inner_product_rho(v, basis_nodes_[k], q_);
  return m;
}

Decomposition ModalProjector::project(const Field& w, double tau) const {
  if (w.frame != Frame::similarity) throw Error(Errc::wrong_frame, "projection needs a similarity-frame field");
  if (!(w.grid == plan_.grid())) throw Error(Errc::grid_mismatch, "field grid differs from projector grid");
  Field dev(w.grid, Frame::similarity);
  for (std::size_t i = 0; i < dev.values.size(); ++i) dev.values[i] = w.values[i] - fp_.kappa;
  Decomposition d;
  d.tau = tau;
  d.modes = coefficients(plan_.apply(dev.values));
  for (std::size_t k = 0; k < basis_.size(); ++k) {
    const double b = d.modes[k];
    const auto& h = basis_grid_[k];
    for (std::size_t i = 0; i < dev.values.size(); ++i) dev.values[i] -= b * h[i];
  }
  d.remainder = std::move(dev);
  return d;
}

Decomposition project(const Field& w, const FrameParams& fp, const QuadratureRule& q, double tau) {
  if (w.grid.dimension() != q.dimension) throw Error(Errc::grid_mismatch, "field and quadrature dimensions differ");
  return ModalProjector(fp, q, w.grid).project(w, tau);
}

double mode_sum(const ModeVector& m, const Point& z, const FrameParams& fp) {
  const auto basis = tracked_basis(fp.n);
  double s = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k)
    if (m[k] != 0.0) s += m[k] * eval_eigenfunction(basis[k], z, fp);
  return s;
}

Field reconstruct(const ModeVector& m, const FrameParams& fp, const Grid& grid) {
  if (m.dimension() != fp.n || grid.dimension() != fp.n)
    throw Error(Errc::grid_mismatch, "mode vector, frame and grid dimensions must agree");
  return sample(grid, Frame::similarity, [&](const Point& z) { return fp.kappa + mode_sum(m, z, fp); });
}

ModeVector profile_modes(double tau, const FrameParams& fp) {
  ModeVector m(fp.n);
  for (double& b : m.b2_diag) b = -1.0 / (fp.c_p * tau);
  return m;
}

double profile_residual(const Field& w, double tau, const FrameParams& fp, const QuadratureRule& q) {
  if (!(tau > 0.0)) throw Error(Errc::invalid_argument, "profile residual needs tau > 0");
  const Field profile = reconstruct(profile_modes(tau, fp), fp, w.grid);
  Field d(w.grid, Frame::similarity);
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = w.values[i] - profile.values[i];
  return tau * norm_h1_rho(d, q);
}

}  // namespace blowup
