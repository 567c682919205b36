#pragma once

// u_t = Laplacian u + |u|^{p-1} u on a box with homogeneous Neumann ends,
// integrated explicitly until the solution blows up.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "blowup/field.hpp"
#include "blowup/weighted_space.hpp"

namespace blowup {

struct HistoryEntry {
  double t = 0.0;
  double sup = 0.0;  // sup |u|
  Point argmax;      // sub-cell refined location of sup |u|
};

struct PhysicalRun {
  Field u;
  double t = 0.0;
  double dt = 0.0;  // step used most recently
  std::vector<HistoryEntry> history;
};

struct PhysicalConfig {
  double p = 3.0;
  double safety = 1.1;
  // Half of the 0.1 growth bound: Heun at dt |u|^{p-1} = 0.1 biases the
  // tail slope by about 1%, at 0.05 by about 0.3%.
  double rate_cap = 0.05;
  double M_stop = 1e6;
  double t_max = 10.0;
  /// sup |u| levels at which a snapshot is stored (first crossing).
  std::vector<double> snapshot_levels;
};

struct Snapshot {
  double t = 0.0;
  double level = 0.0;
  Field u;
};

struct BlowupReport {
  bool blew_up = false;
  double T_est = 0.0;
  Point point_est;
  double rate_slope = 0.0;  // slope of sup^{-(p-1)} against t
  double r_squared = 0.0;
  double final_sup = 0.0;
  double final_t = 0.0;
  std::size_t steps = 0;
  std::vector<std::string> warnings;
  std::vector<HistoryEntry> history;
  std::vector<Snapshot> snapshots;
};

/// min(h^2 / (2 n safety), rate_cap / sup|u|^{p-1}).
double physical_dt(const Field& u, const PhysicalConfig& cfg);

/// One Heun (RK2) step with the step size from physical_dt. Throws
/// numerical_overflow if the update is not finite.
void step_physical(PhysicalRun& r, const PhysicalConfig& cfg);

/// Integrates until sup|u| >= M_stop or t >= t_max. On a blowup the tail
/// sup^{-(p-1)} for sup in [M_stop/10, M_stop] is fitted linearly in t.
BlowupReport run_to_blowup(const Field& u0, const PhysicalConfig& cfg);

/// Sub-cell location of sup |u| (parabolic refinement per axis).
Point refined_argmax(const Field& u);

/// w(z) = (T-t)^{1/(p-1)} u(a + z sqrt(T-t)) on z_grid, tau = -log(T-t).
/// Throws outside_physical_data naming the largest usable extent.
std::pair<Field, double> rescale_to_similarity(const Field& u, double t, double T, const Point& a,
                                               const FrameParams& fp, const Grid& z_grid);

/// Flat binary snapshot: n, per-axis sizes, per-axis (lo, hi), t, p, then the
/// row-major samples; all little-endian (uint64 counts, float64 values).
void write_snapshot(std::ostream& os, const Field& u, double t, double p);
struct LoadedSnapshot {
  Field u;
  double t = 0.0;
  double p = 0.0;
};
LoadedSnapshot read_snapshot(std::istream& is);

void to_json(nlohmann::json& j, const HistoryEntry& h);
void to_json(nlohmann::json& j, const BlowupReport& r);

}  // namespace blowup
