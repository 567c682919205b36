#include "blowup/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blowup/error.hpp"

namespace blowup {

Point::Point(std::initializer_list<double> xs) : dim(xs.size()) {
  if (xs.size() > kMaxDim) throw Error(Errc::unsupported_dimension, "point dimension > 3");
  std::copy(xs.begin(), xs.end(), c.begin());
}

double Point::norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += c[i] * c[i];
  return std::sqrt(s);
}

Point operator+(Point a, const Point& b) {
  for (std::size_t i = 0; i < a.dim; ++i) a.c[i] += b.c[i];
  return a;
}

Point operator-(Point a, const Point& b) {
  for (std::size_t i = 0; i < a.dim; ++i) a.c[i] -= b.c[i];
  return a;
}

Point operator*(double s, Point a) {
  for (std::size_t i = 0; i < a.dim; ++i) a.c[i] *= s;
  return a;
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > kMaxDim)
    throw Error(Errc::unsupported_dimension, "grid dimension must be 1..3");
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (std::size_t k = axes_.size(); k-- > 0;) {
    if (axes_[k].count < 2 || !(axes_[k].hi > axes_[k].lo))
      throw Error(Errc::grid_too_coarse, "axis needs at least 2 points and positive extent");
    strides_[k] = size_;
    size_ *= axes_[k].count;
  }
}

Grid Grid::symmetric(std::size_t n, double extent, double h) {
  return box(n, -extent, extent, h);
}

Grid Grid::box(std::size_t n, double lo, double hi, double h) {
  if (!(h > 0.0)) throw Error(Errc::invalid_argument, "grid spacing must be positive");
  const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / h));
  return Grid(std::vector<Axis>(n, Axis{lo, hi, cells + 1}));
}

Point Grid::coords(std::size_t flat) const {
  Point x(axes_.size());
  for (std::size_t k = 0; k < axes_.size(); ++k) x[k] = axes_[k].coord(index_along(flat, k));
  return x;
}

bool Grid::operator==(const Grid& other) const {
  if (axes_.size() != other.axes_.size()) return false;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const Axis& a = axes_[k];
    const Axis& b = other.axes_[k];
    if (a.count != b.count || a.lo != b.lo || a.hi != b.hi) return false;
  }
  return true;
}

double Field::max() const { return *std::max_element(values.begin(), values.end()); }
double Field::min() const { return *std::min_element(values.begin(), values.end()); }

double Field::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

std::size_t Field::argmax() const {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

bool Field::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

Field sample(const Grid& grid, Frame frame, const std::function<double(const Point&)>& f) {
  Field out(grid, frame);
  for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = f(grid.coords(i));
  return out;
}

namespace {

// Fills `w` with the stencil weights for coordinate x and returns the first
// stencil index, or -1 when x lies outside the axis.
long stencil(const Axis& ax, std::size_t order, double x, double* w) {
  const double h = ax.spacing();
  const double s = (x - ax.lo) / h;
  const double last = static_cast<double>(ax.count - 1);
  constexpr double slack = 1e-9;
  if (s < -slack || s > last + slack) return -1;
  const double sc = std::clamp(s, 0.0, last);
  long start;
  if (order == 2) {
    start = std::clamp(static_cast<long>(std::floor(sc)), 0L, static_cast<long>(ax.count) - 2);
    const double t = sc - static_cast<double>(start);
    w[0] = 1.0 - t;
    w[1] = t;
    return start;
  }
  start = static_cast<long>(std::floor(sc)) - 1;
  start = std::clamp(start, 0L, static_cast<long>(ax.count) - 4);
  const double t = sc - static_cast<double>(start);  // stencil nodes at 0,1,2,3
  w[0] = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
  w[1] = t * (t - 2.0) * (t - 3.0) / 2.0;
  w[2] = -t * (t - 1.0) * (t - 3.0) / 2.0;
  w[3] = t * (t - 1.0) * (t - 2.0) / 6.0;
  return start;
}

std::size_t stencil_order(const Grid& grid) {
  for (const Axis& a : grid.axes())
    if (a.count < 4) return 2;
  return 4;
}

}  // namespace

SamplePlan::SamplePlan(const Grid& grid, std::span<const Point> points, Extrapolation policy)
    : grid_(grid), order_(stencil_order(grid)) {
  const std::size_t n = grid.dimension();
  inside_.assign(points.size(), 0);
  base_.assign(points.size(), 0);
  weights_.assign(points.size() * n * order_, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim != n) throw Error(Errc::grid_mismatch, "point dimension differs from grid");
    bool inside = true;
    std::size_t base = 0;
    for (std::size_t k = 0; k < n && inside; ++k) {
      const long s = stencil(grid.axis(k), order_, points[i][k], &weights_[(i * n + k) * order_]);
      if (s < 0) {
        inside = false;
      } else {
        base += static_cast<std::size_t>(s) * grid.stride(k);
      }
    }
    if (!inside && policy == Extrapolation::error) {
      std::ostringstream msg;
      msg << "evaluation point at index " << i << " lies beyond the grid extent";
      throw Error(Errc::outside_grid, msg.str());
    }
    inside_[i] = inside ? 1 : 0;
    base_[i] = base;
  }
}

std::vector<double> SamplePlan::apply(std::span<const double> values) const {
  std::vector<double> out(inside_.size());
  apply(values, out);
  return out;
}

void SamplePlan::apply(std::span<const double> values, std::span<double> out) const {
  if (values.size() != grid_.size()) throw Error(Errc::grid_mismatch, "field size differs from plan grid");
  const std::size_t n = grid_.dimension();
  const std::size_t m = order_;
  for (std::size_t i = 0; i < inside_.size(); ++i) {
    if (!inside_[i]) {
      out[i] = 0.0;
      continue;
    }
    const double* w = &weights_[i * n * m];
    const std::size_t b = base_[i];
    double acc = 0.0;
    if (n == 1) {
      for (std::size_t a = 0; a < m; ++a) acc += w[a] * values[b + a];
    } else if (n == 2) {
      const std::size_t s0 = grid_.stride(0);
      for (std::size_t a = 0; a < m; ++a) {
        double row = 0.0;
        const double* v = &values[b + a * s0];
        for (std::size_t c = 0; c < m; ++c) row += w[m + c] * v[c];
        acc += w[a] * row;
      }
    } else {
      const std::size_t s0 = grid_.stride(0);
      const std::size_t s1 = grid_.stride(1);
      for (std::size_t a = 0; a < m; ++a) {
        double plane = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          double row = 0.0;
          const double* v = &values[b + a * s0 + c * s1];
          for (std::size_t d = 0; d < m; ++d) row += w[2 * m + d] * v[d];
          plane += w[m + c] * row;
        }
        acc += w[a] * plane;
      }
    }
    out[i] = acc;
  }
}

std::vector<double> SamplePlan::apply_transpose(std::span<const double> at_points) const {
  if (at_points.size() != inside_.size()) throw Error(Errc::grid_mismatch, "point count differs from plan");
  std::vector<double> out(grid_.size(), 0.0);
  const std::size_t n = grid_.dimension();
  const std::size_t m = order_;
  for (std::size_t i = 0; i < inside_.size(); ++i) {
    if (!inside_[i]) continue;
    const double* w = &weights_[i * n * m];
    const std::size_t b = base_[i];
    const double y = at_points[i];
    if (n == 1) {
      for (std::size_t a = 0; a < m; ++a) out[b + a] += w[a] * y;
    } else if (n == 2) {
      const std::size_t s0 = grid_.stride(0);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t c = 0; c < m; ++c) out[b + a * s0 + c] += w[a] * w[m + c] * y;
    } else {
      const std::size_t s0 = grid_.stride(0);
      const std::size_t s1 = grid_.stride(1);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t c = 0; c < m; ++c)
          for (std::size_t d = 0; d < m; ++d) out[b + a * s0 + c * s1 + d] += w[a] * w[m + c] * w[2 * m + d] * y;
    }
  }
  return out;
}

double interpolate(const Field& f, const Point& x, Extrapolation policy) {
  const SamplePlan plan(f.grid, std::span<const Point>(&x, 1), policy);
  return plan.apply(f.values)[0];
}

Field gradient(const Field& f, std::size_t axis) {
  const Grid& g = f.grid;
  const Axis& ax = g.axis(axis);
  if (ax.count < 3) throw Error(Errc::grid_too_coarse, "central differences need >= 3 points per axis");
  const double inv2h = 1.0 / (2.0 * ax.spacing());
  const std::size_t s = g.stride(axis);
  const std::size_t last = ax.count - 1;
  Field out(g, f.frame);
  const auto& v = f.values;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t j = g.index_along(i, axis);
    if (j == 0) {
      out.values[i] = (-3.0 * v[i] + 4.0 * v[i + s] - v[i + 2 * s]) * inv2h;
    } else if (j == last) {
      out.values[i] = (3.0 * v[i] - 4.0 * v[i - s] + v[i - 2 * s]) * inv2h;
    } else {
      out.values[i] = (v[i + s] - v[i - s]) * inv2h;
    }
  }
  return out;
}

}  // namespace blowup
