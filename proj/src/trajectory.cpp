#include "dplan/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace dplan {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

void validate(const Waypoint& wp) {
  require(std::isfinite(wp.x) && std::isfinite(wp.y) &&
              std::isfinite(wp.heading),
          "waypoint has non-finite component");
  require(wp.heading > -kPi - 1e-12 && wp.heading <= kPi + 1e-12,
          "waypoint heading outside (-pi, pi]");
}

void validate(const Trajectory& traj) {
  require(traj.waypoints.size() >= 2, "trajectory needs at least 2 waypoints");
  require(traj.dt_waypoint > 0.0, "trajectory dt must be positive");
  for (const Waypoint& wp : traj.waypoints) validate(wp);
}

void validate(const HistoryTrajectory& hist) {
  require(!hist.waypoints.empty(), "history needs at least 1 waypoint");
  require(hist.dt_waypoint > 0.0, "history dt must be positive");
  for (const Waypoint& wp : hist.waypoints) validate(wp);
}

void validate(const EgoStatus& ego) {
  require(std::isfinite(ego.speed) && std::isfinite(ego.acceleration) &&
              std::isfinite(ego.yaw_rate),
          "ego status has non-finite component");
  require(ego.speed >= 0.0, "ego speed must be non-negative");
}

void validate(const NormalizationSpec& spec) {
  require(spec.scale_x > 0.0 && spec.scale_y > 0.0 && spec.scale_heading > 0.0,
          "normalization scales must be strictly positive");
}

namespace {

Mat normalize_rows(const std::vector<Waypoint>& wps,
                   const NormalizationSpec& spec) {
  Mat out(static_cast<Eigen::Index>(wps.size()), 3);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Waypoint& wp = wps[static_cast<std::size_t>(i)];
    validate(wp);
    out(i, 0) = std::clamp(wp.x / spec.scale_x, -1.0, 1.0);
    out(i, 1) = std::clamp(wp.y / spec.scale_y, -1.0, 1.0);
    out(i, 2) = std::clamp(wp.heading / spec.scale_heading, -1.0, 1.0);
  }
  return out;
}

}  // namespace

Mat normalize(const Trajectory& traj, const NormalizationSpec& spec) {
  validate(spec);
  validate(traj);
  return normalize_rows(traj.waypoints, spec);
}

Mat normalize_history(const HistoryTrajectory& hist,
                      const NormalizationSpec& spec) {
  validate(spec);
  validate(hist);
  return normalize_rows(hist.waypoints, spec);
}

Trajectory denormalize(const Mat& actions, const NormalizationSpec& spec,
                       double dt_waypoint) {
  validate(spec);
  if (actions.cols() != 3) {
    throw std::invalid_argument("action tensor must have 3 columns");
  }
  if (actions.rows() < 2) {
    throw std::invalid_argument("action tensor needs at least 2 rows");
  }
  require(dt_waypoint > 0.0, "trajectory dt must be positive");
  Trajectory traj;
  traj.dt_waypoint = dt_waypoint;
  traj.waypoints.reserve(static_cast<std::size_t>(actions.rows()));
  for (Eigen::Index i = 0; i < actions.rows(); ++i) {
    if (!actions.row(i).allFinite()) {
      throw std::invalid_argument("action tensor has non-finite component");
    }
    traj.waypoints.push_back(
        {actions(i, 0) * spec.scale_x, actions(i, 1) * spec.scale_y,
         wrap_angle(actions(i, 2) * spec.scale_heading)});
  }
  return traj;
}

std::vector<Waypoint> resample_to_ticks(const Trajectory& traj,
                                        const Waypoint& start_pose,
                                        double dt_tick) {
  validate(traj);
  validate(start_pose);
  require(dt_tick > 0.0, "dt_tick must be positive");
  require(dt_tick <= traj.dt_waypoint + 1e-12,
          "dt_tick must not exceed dt_waypoint");

  // Pose timeline: start_pose at t=0, waypoint k at t=k*dt_waypoint.
  std::vector<Waypoint> knots;
  knots.reserve(traj.waypoints.size() + 1);
  knots.push_back(start_pose);
  knots.insert(knots.end(), traj.waypoints.begin(), traj.waypoints.end());

  const double duration = traj.duration();
  const int n_ticks = static_cast<int>(std::floor(duration / dt_tick + 1e-9));
  const int n_seg = static_cast<int>(traj.waypoints.size());

  std::vector<Waypoint> ticks;
  ticks.reserve(static_cast<std::size_t>(n_ticks) + 1);
  for (int k = 0; k <= n_ticks; ++k) {
    const double u = (static_cast<double>(k) * dt_tick) / traj.dt_waypoint;
    int seg = static_cast<int>(std::floor(u + 1e-9));
    seg = std::min(seg, n_seg - 1);
    const double frac = std::clamp(u - seg, 0.0, 1.0);
    const Waypoint& a = knots[static_cast<std::size_t>(seg)];
    const Waypoint& b = knots[static_cast<std::size_t>(seg) + 1];
    ticks.push_back({a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y),
                     interp_heading(a.heading, b.heading, frac)});
  }
  return ticks;
}

Waypoint to_frame(const Waypoint& wp, const Waypoint& origin) {
  const double c = std::cos(origin.heading);
  const double s = std::sin(origin.heading);
  return {origin.x + c * wp.x - s * wp.y, origin.y + s * wp.x + c * wp.y,
          wrap_angle(wp.heading + origin.heading)};
}

}  // namespace dplan
