#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dplan/geometry.hpp"

namespace dplan {

using Mat = Eigen::MatrixXd;

// Pose in a planar frame. For planner outputs the frame is the ego frame at
// t=0: x forward-positive, y leftward-positive, heading in (-pi, pi].
struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// N future waypoints spaced dt_waypoint seconds apart; the action space of
// the planner.
struct Trajectory {
  std::vector<Waypoint> waypoints;
  double dt_waypoint = 0.5;

  double duration() const {
    return static_cast<double>(waypoints.size()) * dt_waypoint;
  }
};

// H past waypoints, most recent last.
struct HistoryTrajectory {
  std::vector<Waypoint> waypoints;
  double dt_waypoint = 0.5;
};

struct EgoStatus {
  double speed = 0.0;         // m/s, >= 0
  double acceleration = 0.0;  // m/s^2
  double yaw_rate = 0.0;      // rad/s
};

// Per-component scales mapping metric space onto the [-1,1] action space the
// diffusion model works in. The same spec must be used for normalize and
// denormalize.
struct NormalizationSpec {
  double scale_x = 80.0;
  double scale_y = 40.0;
  double scale_heading = 3.141592653589793;
};

void validate(const Waypoint& wp);
void validate(const Trajectory& traj);
void validate(const HistoryTrajectory& hist);
void validate(const EgoStatus& ego);
void validate(const NormalizationSpec& spec);

// Metric trajectory -> N x 3 action tensor, each column divided by its scale
// and clamped to [-1, 1].
Mat normalize(const Trajectory& traj, const NormalizationSpec& spec);

// Rows of a history trajectory normalized the same way (no length-2 minimum).
Mat normalize_history(const HistoryTrajectory& hist,
                      const NormalizationSpec& spec);

// Inverse map; headings are re-wrapped into (-pi, pi].
Trajectory denormalize(const Mat& actions, const NormalizationSpec& spec,
                       double dt_waypoint);

// Resample a trajectory onto a fixed tick grid. The pose at t=0 is
// start_pose and waypoint k sits at t = k*dt_waypoint; x/y interpolate
// linearly, headings along the shortest arc. Ticks cover k*dt_tick for
// k = 0..floor(duration/dt_tick).
std::vector<Waypoint> resample_to_ticks(const Trajectory& traj,
                                        const Waypoint& start_pose,
                                        double dt_tick);

// Rigid transform of an ego-frame pose into the frame `origin` lives in.
Waypoint to_frame(const Waypoint& wp, const Waypoint& origin);

}  // namespace dplan
