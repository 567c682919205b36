#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace blowup {

inline constexpr std::size_t kMaxDim = 3;

/// A point in R^n, n <= 3, stored inline.
struct Point {
  std::array<double, kMaxDim> c{};
  std::size_t dim = 0;

  Point() = default;
  explicit Point(std::size_t n) : dim(n) {}
  Point(std::initializer_list<double> xs);

  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }
  std::size_t size() const { return dim; }
  double norm() const;

  friend Point operator+(Point a, const Point& b);
  friend Point operator-(Point a, const Point& b);
  friend Point operator*(double s, Point a);
};

enum class Frame { similarity, physical };

/// Uniform samples lo, lo+h, ..., hi along one axis.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;

  double spacing() const { return (hi - lo) / static_cast<double>(count - 1); }
  double coord(std::size_t i) const { return lo + static_cast<double>(i) * spacing(); }
};

/// Tensor grid, row-major with axis 0 slowest.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes);

  /// Symmetric similarity-frame grid [-L, L]^n with spacing h (L/h rounded).
  static Grid symmetric(std::size_t n, double extent, double h);
  /// Box [lo, hi]^n with spacing h.
  static Grid box(std::size_t n, double lo, double hi, double h);

  std::size_t dimension() const { return axes_.size(); }
  std::size_t size() const { return size_; }
  const Axis& axis(std::size_t k) const { return axes_[k]; }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t stride(std::size_t k) const { return strides_[k]; }

  /// Multi-index of flat index `flat` along axis k.
  std::size_t index_along(std::size_t flat, std::size_t k) const {
    return (flat / strides_[k]) % axes_[k].count;
  }
  Point coords(std::size_t flat) const;

  bool operator==(const Grid& other) const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Scalar samples on a grid, tagged with the variables they live in.
struct Field {
  Grid grid;
  std::vector<double> values;
  Frame frame = Frame::similarity;
  bool blown_up = false;

  Field() = default;
  Field(Grid g, Frame f, double fill = 0.0)
      : grid(std::move(g)), values(grid.size(), fill), frame(f) {}

  double max() const;
  double max_abs() const;
  double min() const;
  std::size_t argmax() const;
  bool all_finite() const;
};

/// Samples `f` at every grid point.
Field sample(const Grid& grid, Frame frame, const std::function<double(const Point&)>& f);

enum class Extrapolation { clamp_to_zero, error };

/// Precomputed tensor cubic (4-point Lagrange) interpolation stencils for a
/// fixed set of target points. Points beyond the grid extent evaluate to 0
/// under clamp_to_zero; axes with fewer than 4 samples fall back to linear.
class SamplePlan {
 public:
  SamplePlan(const Grid& grid, std::span<const Point> points,
             Extrapolation policy = Extrapolation::clamp_to_zero);

  std::vector<double> apply(std::span<const double> values) const;
  void apply(std::span<const double> values, std::span<double> out) const;
  /// Adjoint of apply: grid vector g with g . values = at_points . apply(values).
  std::vector<double> apply_transpose(std::span<const double> at_points) const;
  std::size_t size() const { return inside_.size(); }
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  std::size_t order_ = 4;  // stencil width per axis
  std::vector<unsigned char> inside_;
  std::vector<std::size_t> base_;   // per point: flat index of stencil corner
  std::vector<double> weights_;     // per point, per axis: order_ weights
};

/// Single-point evaluation with the same scheme as SamplePlan.
double interpolate(const Field& f, const Point& x, Extrapolation policy = Extrapolation::clamp_to_zero);

/// Second-order first derivative along `axis`; one-sided second-order at the ends.
Field gradient(const Field& f, std::size_t axis);

}  // namespace blowup
