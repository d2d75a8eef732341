#include "dplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dplan {

RolloutResult rollout(const Scene& scene, const Trajectory& traj,
                      double dt_tick) {
  validate_scene(scene);
  validate(traj);
  if (traj.duration() > scene.duration + 1e-9) {
    throw std::invalid_argument(
        "trajectory duration exceeds the scene duration");
  }

  // The planner outputs ego-frame waypoints; move them into the scene frame.
  Trajectory scene_traj;
  scene_traj.dt_waypoint = traj.dt_waypoint;
  scene_traj.waypoints.reserve(traj.waypoints.size());
  for (const Waypoint& wp : traj.waypoints) {
    scene_traj.waypoints.push_back(to_frame(wp, scene.ego_pose));
  }

  const std::vector<Waypoint> ego_ticks =
      resample_to_ticks(scene_traj, scene.ego_pose, dt_tick);

  RolloutResult out;
  out.dt = dt_tick;
  out.ticks.reserve(ego_ticks.size());
  for (std::size_t k = 0; k < ego_ticks.size(); ++k) {
    TickState tick;
    tick.time = static_cast<double>(k) * dt_tick;
    tick.ego = ego_ticks[k];
    tick.agents.reserve(scene.agents.size());
    for (const Agent& a : scene.agents) {
      const double dx = a.velocity * tick.time * std::cos(a.pose.heading);
      const double dy = a.velocity * tick.time * std::sin(a.pose.heading);
      tick.agents.push_back({a.pose.x + dx, a.pose.y + dy, a.pose.heading});
    }
    out.ticks.push_back(std::move(tick));
  }
  return out;
}

namespace {

OrientedRect footprint(const Waypoint& pose, double length, double width) {
  return {{pose.x, pose.y}, pose.heading, length, width};
}

// Ego speed per tick from position differences (forward difference, the last
// tick reuses the previous value).
std::vector<double> tick_speeds(const RolloutResult& r) {
  const std::size_t n = r.ticks.size();
  std::vector<double> v(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Waypoint& a = r.ticks[k].ego;
    const Waypoint& b = r.ticks[k + 1].ego;
    v[k] = std::hypot(b.x - a.x, b.y - a.y) / r.dt;
  }
  if (n >= 2) v[n - 1] = v[n - 2];
  return v;
}

Vec2 tick_velocity(const RolloutResult& r, std::size_t k) {
  const std::size_t n = r.ticks.size();
  const std::size_t i = (k + 1 < n) ? k : (n >= 2 ? n - 2 : 0);
  if (n < 2) return {0.0, 0.0};
  const Waypoint& a = r.ticks[i].ego;
  const Waypoint& b = r.ticks[i + 1].ego;
  return {(b.x - a.x) / r.dt, (b.y - a.y) / r.dt};
}

}  // namespace

int score_nc(const RolloutResult& r, const Scene& scene, const SimConfig& cfg) {
  if (scene.agents.empty()) return 1;
  const std::vector<double> speeds = tick_speeds(r);
  for (std::size_t k = 0; k < r.ticks.size(); ++k) {
    if (speeds[k] <= cfg.nc_speed_threshold) continue;  // not at fault
    const OrientedRect ego =
        footprint(r.ticks[k].ego, cfg.ego.length, cfg.ego.width);
    for (std::size_t a = 0; a < scene.agents.size(); ++a) {
      const OrientedRect agent = footprint(
          r.ticks[k].agents[a], scene.agents[a].length, scene.agents[a].width);
      if (rects_overlap(ego, agent)) return 0;
    }
  }
  return 1;
}

int score_dac(const RolloutResult& r, const Polygon& drivable,
              const SimConfig& cfg) {
  if (drivable.size() < 3) {
    throw std::invalid_argument("degenerate drivable polygon");
  }
  for (const TickState& tick : r.ticks) {
    const OrientedRect ego =
        footprint(tick.ego, cfg.ego.length, cfg.ego.width);
    for (const Vec2& corner : ego.corners()) {
      if (!drivable.contains(corner)) return 0;
    }
  }
  return 1;
}

int score_ttc(const RolloutResult& r, const Scene& scene,
              const SimConfig& cfg) {
  if (scene.agents.empty()) return 1;
  if (!(cfg.ttc_tau > 0.0)) throw std::invalid_argument("ttc tau must be > 0");
  const std::vector<double> speeds = tick_speeds(r);
  for (std::size_t k = 0; k < r.ticks.size(); ++k) {
    // Mirrors the NC convention: a stationary ego is never at fault.
    if (speeds[k] <= cfg.nc_speed_threshold) continue;
    const Vec2 ego_v = tick_velocity(r, k);
    const Waypoint& ego_pose = r.ticks[k].ego;
    for (std::size_t a = 0; a < scene.agents.size(); ++a) {
      const Agent& agent = scene.agents[a];
      const Waypoint& ap = r.ticks[k].agents[a];
      const Vec2 agent_v = {agent.velocity * std::cos(ap.heading),
                            agent.velocity * std::sin(ap.heading)};
      // Straight-line projection of both bodies; first sampled overlap
      // strictly before tau fails the gate.
      for (double tau = r.dt; tau < cfg.ttc_tau - 1e-12; tau += r.dt) {
        OrientedRect ego_f = footprint(ego_pose, cfg.ego.length,
                                       cfg.ego.width);
        ego_f.center = ego_f.center + ego_v * tau;
        OrientedRect agent_f = footprint(ap, agent.length, agent.width);
        agent_f.center = agent_f.center + agent_v * tau;
        if (rects_overlap(ego_f, agent_f)) return 0;
      }
    }
  }
  return 1;
}

int score_comfort(const RolloutResult& r, const ComfortLimits& limits) {
  const std::size_t n = r.ticks.size();
  if (n < 3) throw std::invalid_argument("comfort needs at least 3 ticks");
  const int w = std::clamp(
      static_cast<int>(std::lround(limits.window_s / r.dt)), 1,
      static_cast<int>(n) - 1);
  const double wdt = static_cast<double>(w) * r.dt;

  auto slope = [&](const std::vector<double>& f, std::vector<double>& out) {
    out.clear();
    if (static_cast<int>(f.size()) <= w) return;
    for (std::size_t k = 0; k + static_cast<std::size_t>(w) < f.size(); ++k) {
      out.push_back((f[k + static_cast<std::size_t>(w)] - f[k]) / wdt);
    }
  };

  // Windowed speed, then windowed slopes for accel and jerk.
  std::vector<double> v;
  for (std::size_t k = 0; k + static_cast<std::size_t>(w) < n; ++k) {
    const Waypoint& a = r.ticks[k].ego;
    const Waypoint& b = r.ticks[k + static_cast<std::size_t>(w)].ego;
    v.push_back(std::hypot(b.x - a.x, b.y - a.y) / wdt);
  }
  std::vector<double> acc, jerk, yaw;
  slope(v, acc);
  slope(acc, jerk);
  for (std::size_t k = 0; k + static_cast<std::size_t>(w) < n; ++k) {
    yaw.push_back(angle_diff(r.ticks[k + static_cast<std::size_t>(w)].ego.heading,
                             r.ticks[k].ego.heading) /
                  wdt);
  }

  for (double a : acc) {
    if (std::abs(a) > limits.max_abs_lon_accel) return 0;
  }
  for (double j : jerk) {
    if (std::abs(j) > limits.max_abs_jerk) return 0;
  }
  for (std::size_t k = 0; k < yaw.size(); ++k) {
    if (std::abs(yaw[k]) > limits.max_abs_yaw_rate) return 0;
    // Lateral acceleration v^2 * curvature with curvature = yaw_rate / v.
    if (k < v.size() && std::abs(v[k] * yaw[k]) > limits.max_abs_lat_accel) {
      return 0;
    }
  }
  return 1;
}

double score_ep(const RolloutResult& r, const Scene& scene,
                const SimConfig& cfg) {
  if (scene.route.empty()) throw std::invalid_argument("route is empty");
  const Waypoint& first = r.ticks.front().ego;
  const Waypoint& last = r.ticks.back().ego;
  const double s0 = scene.route.project({first.x, first.y});
  const double s1 = scene.route.project({last.x, last.y});
  const double progress = s1 - s0;
  const double horizon = r.ticks.back().time;
  const double reference =
      std::min(scene.speed_limit * horizon, scene.route.length() - s0);
  return std::clamp(progress / std::max(reference, cfg.ep_min_reference), 0.0,
                    1.0);
}

double pdms(int nc, int dac, int ttc, int comfort, double ep) {
  auto binary = [](int v, const char* what) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument(std::string(what) + " must be 0 or 1");
    }
  };
  binary(nc, "nc");
  binary(dac, "dac");
  binary(ttc, "ttc");
  binary(comfort, "comfort");
  if (!(ep >= 0.0) || ep > 1.0) {
    throw std::invalid_argument("ep must lie in [0, 1]");
  }
  return nc * dac * (5.0 * ep + 5.0 * ttc + 2.0 * comfort) / 12.0;
}

PdmsBreakdown score_all(const Scene& scene, const Trajectory& traj,
                        const SimConfig& cfg) {
  const RolloutResult r = rollout(scene, traj, cfg.dt_tick);
  PdmsBreakdown b;
  b.nc = score_nc(r, scene, cfg);
  b.dac = score_dac(r, scene.drivable_area, cfg);
  b.ttc = score_ttc(r, scene, cfg);
  b.comfort = score_comfort(r, cfg.comfort);
  b.ep = score_ep(r, scene, cfg);
  b.pdms = pdms(b.nc, b.dac, b.ttc, b.comfort, b.ep);
  return b;
}

EvalReport evaluate(const Planner& planner, const std::vector<Scene>& scenes,
                    const SimConfig& cfg) {
  if (scenes.empty()) throw std::invalid_argument("no scenes to evaluate");
  EvalReport report;
  report.scenes.reserve(scenes.size());
  for (const Scene& scene : scenes) {
    SceneReport sr;
    sr.scene_id = scene.id;
    try {
      const Trajectory traj = planner(scene);
      sr.breakdown = score_all(scene, traj, cfg);
    } catch (const std::exception& e) {
      sr.failed = true;
      sr.error = e.what();
      sr.breakdown = PdmsBreakdown{};
    }
    report.mean_nc += sr.breakdown.nc;
    report.mean_dac += sr.breakdown.dac;
    report.mean_ttc += sr.breakdown.ttc;
    report.mean_comfort += sr.breakdown.comfort;
    report.mean_ep += sr.breakdown.ep;
    report.mean_pdms += sr.breakdown.pdms;
    report.scenes.push_back(std::move(sr));
  }
  const double inv = 1.0 / static_cast<double>(scenes.size());
  report.mean_nc *= inv;
  report.mean_dac *= inv;
  report.mean_ttc *= inv;
  report.mean_comfort *= inv;
  report.mean_ep *= inv;
  report.mean_pdms *= inv;
  return report;
}

Trajectory constant_velocity_planner(const Scene& scene, int n_waypoints,
                                     double dt_waypoint) {
  validate_scene(scene);
  Trajectory traj;
  traj.dt_waypoint = dt_waypoint;
  traj.waypoints.reserve(static_cast<std::size_t>(n_waypoints));
  for (int k = 1; k <= n_waypoints; ++k) {
    traj.waypoints.push_back(
        {scene.ego_status.speed * static_cast<double>(k) * dt_waypoint, 0.0,
         0.0});
  }
  return traj;
}

}  // namespace dplan
