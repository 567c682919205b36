#include "blowup/physical_solver.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blowup/error.hpp"
#include "blowup/nonlinearity.hpp"

namespace blowup {

namespace {

// Laplacian with ghost-point Neumann ends plus the reaction term.
void rhs(const Field& u, double p, std::vector<double>& out) {
  const Grid& g = u.grid;
  const auto& v = u.values;
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = signed_power(v[i], p);
  for (std::size_t k = 0; k < g.dimension(); ++k) {
    const std::size_t N = g.axis(k).count;
    const std::size_t s = g.stride(k);
    const double ih2 = 1.0 / (g.axis(k).spacing() * g.axis(k).spacing());
    const std::size_t outer = g.size() / (N * s);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < s; ++in) {
        const std::size_t b = o * N * s + in;
        const double* x = v.data() + b;
        double* y = out.data() + b;
        y[0] += 2.0 * (x[s] - x[0]) * ih2;
        for (std::size_t i = 1; i + 1 < N; ++i) y[i * s] += (x[(i + 1) * s] - 2.0 * x[i * s] + x[(i - 1) * s]) * ih2;
        y[(N - 1) * s] += 2.0 * (x[(N - 2) * s] - x[(N - 1) * s]) * ih2;
      }
    }
  }
}

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = (sxx > 0 && syy > 0) ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw Error(Errc::io_failure, "truncated snapshot");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

double physical_dt(const Field& u, const PhysicalConfig& cfg) {
  const Grid& g = u.grid;
  double h = g.axis(0).spacing();
  for (const Axis& a : g.axes()) h = std::min(h, a.spacing());
  const double diffusive = h * h / (2.0 * static_cast<double>(g.dimension()) * cfg.safety);
  const double s = u.max_abs();
  const double reactive = s > 0.0 ? cfg.rate_cap / std::pow(s, cfg.p - 1.0) : diffusive;
  return std::min(diffusive, reactive);
}

void step_physical(PhysicalRun& r, const PhysicalConfig& cfg) {
  if (r.u.frame != Frame::physical) throw Error(Errc::wrong_frame, "physical stepping acts on physical fields");
  const double dt = physical_dt(r.u, cfg);
  std::vector<double> k1, k2;
  rhs(r.u, cfg.p, k1);
  Field mid = r.u;
  for (std::size_t i = 0; i < k1.size(); ++i) mid.values[i] += dt * k1[i];
  rhs(mid, cfg.p, k2);
  for (std::size_t i = 0; i < k1.size(); ++i) r.u.values[i] += 0.5 * dt * (k1[i] + k2[i]);
  r.t += dt;
  r.dt = dt;
  if (!r.u.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite values at t = " << r.t << " after dt = " << dt;
    throw Error(Errc::numerical_overflow, msg.str());
  }
  r.history.push_back({r.t, r.u.max_abs(), refined_argmax(r.u)});
}

Point refined_argmax(const Field& u) {
  const Grid& g = u.grid;
  std::size_t best = 0;
  for (std::size_t i = 1; i < u.values.size(); ++i)
    if (std::abs(u.values[i]) > std::abs(u.values[best])) best = i;
  Point x = g.coords(best);
  for (std::size_t k = 0; k < g.dimension(); ++k) {
    const std::size_t idx = g.index_along(best, k);
    if (idx == 0 || idx + 1 >= g.axis(k).count) continue;
    const double fm = std::abs(u.values[best - g.stride(k)]);
    const double f0 = std::abs(u.values[best]);
    const double fp = std::abs(u.values[best + g.stride(k)]);
    const double curv = fm - 2.0 * f0 + fp;
    if (curv >= 0.0) continue;
    const double off = std::clamp(0.5 * (fm - fp) / curv, -0.5, 0.5);
    x[k] += off * g.axis(k).spacing();
  }
  return x;
}

BlowupReport run_to_blowup(const Field& u0, const PhysicalConfig& cfg) {
  PhysicalRun r;
  r.u = u0;
  r.history.push_back({0.0, u0.max_abs(), refined_argmax(u0)});
  BlowupReport rep;
  std::vector<double> levels = cfg.snapshot_levels;
  std::sort(levels.begin(), levels.end());
  std::size_t next_level = 0;
  while (r.history.back().sup < cfg.M_stop && r.t < cfg.t_max) {
    step_physical(r, cfg);
    ++rep.steps;
    while (next_level < levels.size() && r.history.back().sup >= levels[next_level]) {
      rep.snapshots.push_back({r.t, levels[next_level], r.u});
      ++next_level;
    }
  }
  rep.final_sup = r.history.back().sup;
  rep.final_t = r.t;
  rep.blew_up = rep.final_sup >= cfg.M_stop;
  if (!rep.blew_up) {
    rep.warnings.push_back("no blowup detected");
    rep.history = std::move(r.history);
    return rep;
  }

  std::vector<double> ts, ys;
  std::vector<std::vector<double>> pos(u0.grid.dimension());
  for (const auto& h : r.history) {
    if (h.sup < cfg.M_stop / 10.0) continue;
    ts.push_back(h.t);
    ys.push_back(std::pow(h.sup, -(cfg.p - 1.0)));
    for (std::size_t k = 0; k < pos.size(); ++k) pos[k].push_back(h.argmax[k]);
  }
  if (ts.size() < 3) throw Error(Errc::grid_too_coarse, "too few samples in the blowup fit window");
  const LineFit f = fit_line(ts, ys);
  rep.rate_slope = f.slope;
  rep.r_squared = f.r2;
  rep.T_est = f.slope < 0.0 ? -f.intercept / f.slope : r.t;
  rep.point_est = Point(u0.grid.dimension());
  for (std::size_t k = 0; k < pos.size(); ++k) {
    const LineFit d = fit_line(ts, pos[k]);
    rep.point_est[k] = d.intercept + d.slope * rep.T_est;
  }

  // argmax drift between consecutive decades of growth
  double h = u0.grid.axis(0).spacing();
  for (const Axis& a : u0.grid.axes()) h = std::min(h, a.spacing());
  std::vector<Point> decade_means;
  for (double hi = cfg.M_stop; hi > 10.0 && decade_means.size() < 4; hi /= 10.0) {
    Point m(u0.grid.dimension());
    int cnt = 0;
    for (const auto& e : r.history) {
      if (e.sup < hi / 10.0 || e.sup > hi) continue;
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += e.argmax[k];
      ++cnt;
    }
    if (cnt == 0) break;
    decade_means.push_back((1.0 / cnt) * m);
  }
  for (std::size_t i = 1; i < decade_means.size(); ++i) {
    if ((decade_means[i] - decade_means[i - 1]).norm() > 10.0 * h) {
      rep.warnings.push_back("blowup point unresolved");
      break;
    }
  }
  rep.history = std::move(r.history);
  return rep;
}

std::pair<Field, double> rescale_to_similarity(const Field& u, double t, double T, const Point& a,
                                               const FrameParams& fp, const Grid& z_grid) {
  if (u.frame != Frame::physical) throw Error(Errc::wrong_frame, "rescaling expects a physical field");
  if (!(t < T)) throw Error(Errc::invalid_argument, "rescaling needs t < T");
  if (z_grid.dimension() != u.grid.dimension()) throw Error(Errc::grid_mismatch, "grid dimensions differ");
  const double s = std::sqrt(T - t);
  double usable = INFINITY;
  bool fits = true;
  for (std::size_t k = 0; k < z_grid.dimension(); ++k) {
    const Axis& pa = u.grid.axis(k);
    const Axis& za = z_grid.axis(k);
    usable = std::min({usable, (a[k] - pa.lo) / s, (pa.hi - a[k]) / s});
    if (a[k] + za.lo * s < pa.lo - 1e-12 || a[k] + za.hi * s > pa.hi + 1e-12) fits = false;
  }
  if (!fits) {
    std::ostringstream msg;
    msg << "similarity grid leaves the physical box; max usable L = " << usable;
    throw Error(Errc::outside_physical_data, msg.str());
  }
  std::vector<Point> pts(z_grid.size());
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    Point z = z_grid.coords(i);
    Point x(z_grid.dimension());
    for (std::size_t k = 0; k < z.size(); ++k)
      x[k] = std::clamp(a[k] + z[k] * s, u.grid.axis(k).lo, u.grid.axis(k).hi);
    pts[i] = x;
  }
  Field w(z_grid, Frame::similarity);
  w.values = SamplePlan(u.grid, pts, Extrapolation::error).apply(u.values);
  const double amp = std::pow(T - t, 1.0 / (fp.p - 1.0));
  for (double& v : w.values) v *= amp;
  return {std::move(w), -std::log(T - t)};
}

void write_snapshot(std::ostream& os, const Field& u, double t, double p) {
  const Grid& g = u.grid;
  put_u64(os, g.dimension());
  for (const Axis& a : g.axes()) put_u64(os, a.count);
  for (const Axis& a : g.axes()) {
    put_f64(os, a.lo);
    put_f64(os, a.hi);
  }
  put_f64(os, t);
  put_f64(os, p);
  for (double v : u.values) put_f64(os, v);
  if (!os) throw Error(Errc::io_failure, "snapshot write failed");
}

LoadedSnapshot read_snapshot(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n < 1 || n > kMaxDim) throw Error(Errc::io_failure, "snapshot dimension out of range");
  std::vector<Axis> axes(n);
  for (auto& a : axes) a.count = get_u64(is);
  for (auto& a : axes) {
    a.lo = get_f64(is);
    a.hi = get_f64(is);
  }
  LoadedSnapshot out;
  out.t = get_f64(is);
  out.p = get_f64(is);
  out.u = Field(Grid(axes), Frame::physical);
  for (double& v : out.u.values) v = get_f64(is);
  return out;
}

void to_json(nlohmann::json& j, const HistoryEntry& h) {
  std::vector<double> x(h.argmax.c.begin(), h.argmax.c.begin() + h.argmax.size());
  j = nlohmann::json{{"t", h.t}, {"sup", h.sup}, {"argmax", x}};
}

void to_json(nlohmann::json& j, const BlowupReport& r) {
  std::vector<double> x(r.point_est.c.begin(), r.point_est.c.begin() + r.point_est.size());
  j = nlohmann::json{{"blew_up", r.blew_up},     {"T_est", r.T_est},         {"point_est", x},
                     {"rate_slope", r.rate_slope}, {"r_squared", r.r_squared}, {"final_sup", r.final_sup},
                     {"final_t", r.final_t},       {"steps", r.steps},         {"warnings", r.warnings},
                     {"history", r.history}};
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : r.snapshots) snaps.push_back({{"t", s.t}, {"level", s.level}});
  j["snapshots"] = snaps;
}

}  // namespace blowup
