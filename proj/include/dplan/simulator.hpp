#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dplan/scene.hpp"
#include "dplan/trajectory.hpp"

namespace dplan {

struct EgoParams {
  double length = 4.6;
  double width = 1.9;
};

struct ComfortLimits {
  double max_abs_lon_accel = 4.0;   // m/s^2
  double max_abs_lat_accel = 4.9;   // m/s^2
  double max_abs_jerk = 8.4;        // m/s^3
  double max_abs_yaw_rate = 0.95;   // rad/s
  // Derivatives are slopes over this sliding window; single-tick differences
  // on linearly resampled plans would spike at every waypoint boundary.
  double window_s = 0.5;
};

struct SimConfig {
  double dt_tick = 0.1;
  double ttc_tau = 1.0;
  double nc_speed_threshold = 0.1;  // ego at or below this speed is not at fault
  double ep_min_reference = 0.1;
  EgoParams ego;
  ComfortLimits comfort;
};

struct TickState {
  double time = 0.0;
  Waypoint ego;
  std::vector<Waypoint> agents;  // same order as scene.agents
};

struct RolloutResult {
  std::vector<TickState> ticks;
  double dt = 0.1;
};

// Non-reactive rollout: the ego follows the planned trajectory exactly
// (resampled onto the tick grid), every agent advances at constant velocity
// along its fixed heading.
RolloutResult rollout(const Scene& scene, const Trajectory& traj,
                      double dt_tick);

struct PdmsBreakdown {
  int nc = 0;
  int dac = 0;
  int ttc = 0;
  int comfort = 0;
  double ep = 0.0;
  double pdms = 0.0;
};

int score_nc(const RolloutResult& rollout, const Scene& scene,
             const SimConfig& cfg);
int score_dac(const RolloutResult& rollout, const Polygon& drivable,
              const SimConfig& cfg);
int score_ttc(const RolloutResult& rollout, const Scene& scene,
              const SimConfig& cfg);
int score_comfort(const RolloutResult& rollout, const ComfortLimits& limits);
double score_ep(const RolloutResult& rollout, const Scene& scene,
                const SimConfig& cfg);

// PDMS = nc * dac * (5*ep + 5*ttc + 2*comfort) / 12.
double pdms(int nc, int dac, int ttc, int comfort, double ep);

PdmsBreakdown score_all(const Scene& scene, const Trajectory& traj,
                        const SimConfig& cfg);

struct SceneReport {
  std::string scene_id;
  PdmsBreakdown breakdown;
  bool failed = false;
  std::string error;
};

struct EvalReport {
  std::vector<SceneReport> scenes;
  double mean_nc = 0.0;
  double mean_dac = 0.0;
  double mean_ttc = 0.0;
  double mean_comfort = 0.0;
  double mean_ep = 0.0;
  double mean_pdms = 0.0;
};

using Planner = std::function<Trajectory(const Scene&)>;

// Scores every scene; per-scene failures are recorded (as zero breakdowns),
// not fatal. Means are arithmetic over all scenes.
EvalReport evaluate(const Planner& planner, const std::vector<Scene>& scenes,
                    const SimConfig& cfg);

// Straight-ahead baseline at the current ego speed.
Trajectory constant_velocity_planner(const Scene& scene, int n_waypoints,
                                     double dt_waypoint);

}  // namespace dplan
