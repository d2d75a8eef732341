#include "dplan/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dplan {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLatAccelBudget = 2.94;  // 0.6 * comfort lateral limit
constexpr double kYawBudget = 0.75;       // 0.79 * comfort yaw limit
constexpr double kOracleAccel = 1.4;
constexpr double kOracleDecel = 2.2;
constexpr double kOracleJerk = 2.5;
constexpr double kLeadMargin = 3.5;
constexpr double kForkBlend = 9.0;

}  // namespace

double quantize9(double v) { return std::strtod(fmt9(v).c_str(), nullptr); }

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CorpusSpec default_corpus_spec(std::uint64_t seed, int total_scenes) {
  CorpusSpec spec;
  spec.seed = seed;
  // Fractions of the mix; the remainder goes to STRAIGHT.
  const int fork = std::max(1, total_scenes / 10);
  const int curve = std::max(1, total_scenes / 5);
  const int turn = std::max(1, total_scenes / 6);
  const int lead = std::max(1, total_scenes / 6);
  const int narrow = std::max(1, total_scenes / 10);
  const int straight =
      std::max(1, total_scenes - fork - curve - turn - lead - narrow);
  spec.counts[ScenarioKind::Straight] = straight;
  spec.counts[ScenarioKind::Curve] = curve;
  spec.counts[ScenarioKind::IntersectionTurn] = turn;
  spec.counts[ScenarioKind::LeadBrake] = lead;
  spec.counts[ScenarioKind::Narrowing] = narrow;
  spec.counts[ScenarioKind::Fork] = fork;
  return spec;
}

namespace {

struct CenterlinePoint {
  Vec2 pos;
  double heading;
  double half_width;
};

Polygon corridor_polygon(const std::vector<CenterlinePoint>& pts) {
  std::vector<Vec2> left, right;
  left.reserve(pts.size());
  right.reserve(pts.size());
  for (const CenterlinePoint& p : pts) {
    const Vec2 n{-std::sin(p.heading), std::cos(p.heading)};
    left.push_back(p.pos + n * p.half_width);
    right.push_back(p.pos + n * (-p.half_width));
  }
  std::vector<Vec2> poly = std::move(left);
  poly.insert(poly.end(), right.rbegin(), right.rend());
  return Polygon(std::move(poly));
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

struct SceneDraft {
  std::vector<CenterlinePoint> center;
  Scene scene;
};

void finish_scene(SceneDraft& draft) {
  std::vector<Vec2> route_pts;
  route_pts.reserve(draft.center.size());
  for (const CenterlinePoint& p : draft.center) {
    if (p.pos.x >= -1e-9 || !route_pts.empty()) route_pts.push_back(p.pos);
  }
  draft.scene.route = Polyline(std::move(route_pts));
  draft.scene.drivable_area = corridor_polygon(draft.center);
  draft.scene.ego_pose = {0, 0, 0};
  draft.scene.duration = 4.0;
}

std::vector<CenterlinePoint> straight_center(double back, double length,
                                             double half_width, double ds) {
  std::vector<CenterlinePoint> pts;
  for (double s = -back; s <= length + 1e-9; s += ds) {
    pts.push_back({{s, 0.0}, 0.0, half_width});
  }
  return pts;
}

void quantize_scene(Scene& scene) {
  auto q = [](double& v) { v = quantize9(v); };
  std::vector<Vec2> poly = scene.drivable_area.points();
  for (Vec2& p : poly) {
    q(p.x);
    q(p.y);
  }
  scene.drivable_area = Polygon(std::move(poly));
  std::vector<Vec2> route = scene.route.points();
  for (Vec2& p : route) {
    q(p.x);
    q(p.y);
  }
  scene.route = Polyline(std::move(route));
  q(scene.ego_pose.x);
  q(scene.ego_pose.y);
  q(scene.ego_pose.heading);
  q(scene.ego_status.speed);
  q(scene.ego_status.acceleration);
  q(scene.ego_status.yaw_rate);
  q(scene.speed_limit);
  q(scene.duration);
  for (Agent& a : scene.agents) {
    q(a.pose.x);
    q(a.pose.y);
    q(a.pose.heading);
    q(a.velocity);
    q(a.length);
    q(a.width);
  }
  if (scene.fork) {
    q(scene.fork->offset);
    q(scene.fork->detour_start_s);
    q(scene.fork->detour_end_s);
  }
}

void add_parked_agents(Scene& scene, double corridor_half, double min_s,
                       double max_s, int count, RngStream& rng) {
  for (int i = 0; i < count; ++i) {
    const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
    Agent a;
    a.id = static_cast<int>(scene.agents.size());
    a.pose = {rng.uniform(min_s, max_s),
              side * (corridor_half + 1.3 + rng.uniform(0.0, 1.5)), 0.0};
    a.velocity = 0.0;
    a.length = rng.uniform(4.0, 5.0);
    a.width = rng.uniform(1.7, 2.0);
    scene.agents.push_back(a);
  }
}

Scene build_straight(const ScenarioRanges& rr, RngStream& rng) {
  SceneDraft d;
  const double lane = rng.uniform(rr.lane_width_min, rr.lane_width_max);
  const double half = lane / 2.0 + 0.4;
  const double limit = rng.uniform(3.0, std::min(15.0, rr.ego_speed_max));
  const double v0 = rng.uniform(std::max(0.0, limit - 3.0), limit);
  d.center = straight_center(10.0, 120.0, half, 2.0);
  d.scene.kind = ScenarioKind::Straight;
  d.scene.ego_status = {v0, 0.0, 0.0};
  d.scene.speed_limit = limit;
  d.scene.nav = NavCommand::FollowLane;
  finish_scene(d);
  Scene scene = std::move(d.scene);
  const int extra = rng.uniform_int(rr.agent_min, rr.agent_max);
  if (rng.uniform01() < 0.35) {
    // Lead near the limit and far ahead; no interaction needed.
    Agent lead;
    lead.id = 0;
    lead.pose = {rng.uniform(50.0, 75.0), 0.0, 0.0};
    lead.velocity = rng.uniform(0.8 * limit, limit);
    scene.agents.push_back(lead);
  }
  add_parked_agents(scene, half, 10.0, 100.0,
                    std::max(0, extra - static_cast<int>(scene.agents.size())),
                    rng);
  return scene;
}

Scene build_curve(const ScenarioRanges& rr, RngStream& rng) {
  SceneDraft d;
  const double lane =
      rng.uniform(rr.lane_width_min + 0.2, rr.lane_width_max + 0.2);
  const double half = lane / 2.0 + 0.4;
  const double kappa = rng.uniform(rr.curvature_min, rr.curvature_max);
  const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
  const double radius = 1.0 / kappa;
  const double limit =
      std::min({rng.uniform(5.0, 12.0), std::sqrt(kLatAccelBudget / kappa),
                kYawBudget / kappa});
  const double v0 = rng.uniform(std::max(0.0, limit - 2.0), limit);

  for (double s = -10.0; s <= 0.0; s += 2.0) {
    d.center.push_back({{s, 0.0}, 0.0, half});
  }
  for (double s = 2.0; s <= 110.0; s += 2.0) {
    const double ang = s / radius;
    d.center.push_back(
        {{radius * std::sin(ang), dir * radius * (1.0 - std::cos(ang))},
         dir * ang, half});
  }
  d.scene.kind = ScenarioKind::Curve;
  d.scene.ego_status = {v0, 0.0, 0.0};
  d.scene.speed_limit = limit;
  d.scene.nav = NavCommand::FollowLane;
  finish_scene(d);
  Scene scene = std::move(d.scene);
  add_parked_agents(scene, half + 2.0, 15.0, 60.0,
                    rng.uniform_int(rr.agent_min, std::max(rr.agent_min, 2)),
                    rng);
  return scene;
}

Scene build_turn(const ScenarioRanges& rr, RngStream& rng) {
  SceneDraft d;
  const double lane =
      rng.uniform(rr.lane_width_min + 0.4, rr.lane_width_max + 0.4);
  const double half = lane / 2.0 + 0.4;
  const double approach = rng.uniform(12.0, 20.0);
  const double radius = rng.uniform(8.0, 14.0);
  const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
  const double turn_cap =
      std::min(std::sqrt(kLatAccelBudget * radius), kYawBudget * radius);
  const double limit = std::min(rng.uniform(4.5, 6.5), turn_cap + 0.5);
  const double v0 = rng.uniform(std::max(1.0, limit - 1.5), limit);

  for (double s = -10.0; s <= approach; s += 2.0) {
    d.center.push_back({{s, 0.0}, 0.0, half});
  }
  const double arc_len = radius * kPi / 2.0;
  for (double a = 1.0; a <= arc_len + 1e-9; a += 1.0) {
    const double ang = a / radius;
    d.center.push_back({{approach + radius * std::sin(ang),
                         dir * radius * (1.0 - std::cos(ang))},
                        dir * ang, half});
  }
  const Vec2 corner{approach + radius, dir * radius};
  for (double e = 1.0; e <= 30.0; e += 2.0) {
    d.center.push_back(
        {{corner.x, corner.y + dir * e}, dir * kPi / 2.0, half});
  }
  d.scene.kind = ScenarioKind::IntersectionTurn;
  d.scene.ego_status = {v0, 0.0, 0.0};
  d.scene.speed_limit = limit;
  d.scene.nav = dir > 0 ? NavCommand::TurnLeft : NavCommand::TurnRight;
  finish_scene(d);
  return std::move(d.scene);
}

Scene build_lead_brake(const ScenarioRanges& rr, RngStream& rng) {
  SceneDraft d;
  const double lane = rng.uniform(rr.lane_width_min, rr.lane_width_max);
  const double half = lane / 2.0 + 0.4;
  const double limit = rng.uniform(5.0, 8.0);
  const double v0 = rng.uniform(limit - 1.5, limit);
  const bool stopped = rng.uniform01() < 0.5;
  const double lead_d = rng.uniform(32.0, 45.0);
  const double lead_v = stopped ? 0.0 : rng.uniform(1.5, 0.5 * limit);

  d.center = straight_center(10.0, 120.0, half, 2.0);
  d.scene.kind = ScenarioKind::LeadBrake;
  d.scene.ego_status = {v0, 0.0, 0.0};
  d.scene.speed_limit = limit;
  d.scene.nav = stopped ? NavCommand::Stop : NavCommand::FollowLane;
  finish_scene(d);
  Scene scene = std::move(d.scene);
  scene.agents.push_back({0, {lead_d, 0.0, 0.0}, lead_v, 4.6, 1.9});
  return scene;
}

Scene build_narrowing(const ScenarioRanges& rr, RngStream& rng) {
  SceneDraft d;
  const double w1 = rng.uniform(3.8, 4.6);
  const double w2 = rng.uniform(2.9, 3.3);
  const double limit = rng.uniform(5.0, 10.0);
  const double v0 = rng.uniform(limit - 2.0, limit);
  for (double s = -10.0; s <= 120.0; s += 2.0) {
    const double f = smoothstep((s - 40.0) / 30.0);
    const double w = w1 + (w2 - w1) * f;
    d.center.push_back({{s, 0.0}, 0.0, w / 2.0 + 0.3});
  }
  d.scene.kind = ScenarioKind::Narrowing;
  d.scene.ego_status = {v0, 0.0, 0.0};
  d.scene.speed_limit = limit;
  d.scene.nav = NavCommand::FollowLane;
  finish_scene(d);
  Scene scene = std::move(d.scene);
  add_parked_agents(scene, std::max(w1, w2) / 2.0 + 0.5, 10.0, 35.0,
                    rng.uniform_int(rr.agent_min, std::max(rr.agent_min, 2)),
                    rng);
  return scene;
}

Scene build_fork(const ScenarioRanges& rr, RngStream& rng) {
  // Y-split: one corridor forks into two branches around a wedge-shaped
  // median that is not drivable; a stopped vehicle sits where the median
  // opens up, blocking the straight-through path. Indecisive trajectories
  // either enter the median (drivable-area violation) or hit the vehicle.
  const double w0 = rng.uniform(3.4, 3.8);
  const double wb = rng.uniform(3.1, 3.4);
  const double offset =
      rng.uniform(std::max(2.6, rr.fork_offset_min),
                  std::min(3.0, rr.fork_offset_max));
  const double s0 = rng.uniform(3.5, 4.5);

  const auto off_at = [&](double s) {
    return offset * smoothstep((s - s0) / kForkBlend);
  };
  const auto edge_out = [&](double s) {
    return std::max(w0 / 2.0, off_at(s) + wb / 2.0);
  };
  const auto edge_in = [&](double s) {
    return std::max(0.0, off_at(s) - wb / 2.0);
  };
  // Median tip: first arc length where the branch inner edges separate.
  double s_tip = s0 + kForkBlend;
  for (double s = s0; s <= s0 + kForkBlend; s += 0.05) {
    if (edge_in(s) > 0.0) {
      s_tip = s;
      break;
    }
  }

  const double s_end = 100.0;
  std::vector<Vec2> poly;
  for (double s = -10.0; s <= s_end + 1e-9; s += 1.0) {
    poly.push_back({s, -edge_out(s)});
  }
  poly.push_back({s_end, -edge_in(s_end)});
  for (double s = s_end - 1.0; s >= s_tip; s -= 1.0) {
    poly.push_back({s, -edge_in(s)});
  }
  poly.push_back({s_tip, 0.0});
  for (double s = s_tip + 1.0; s <= s_end - 1.0 + 1e-9; s += 1.0) {
    poly.push_back({s, edge_in(s)});
  }
  poly.push_back({s_end, edge_in(s_end)});
  for (double s = s_end; s >= -10.0 - 1e-9; s -= 1.0) {
    poly.push_back({s, edge_out(s)});
  }

  Scene scene;
  scene.kind = ScenarioKind::Fork;
  scene.drivable_area = Polygon(std::move(poly));
  std::vector<Vec2> route;
  for (double s = 0.0; s <= s_end + 1e-9; s += 2.0) route.push_back({s, 0.0});
  scene.route = Polyline(std::move(route));
  scene.ego_pose = {0, 0, 0};
  scene.duration = 4.0;

  const double kappa_detour = 6.0 * offset / (kForkBlend * kForkBlend);
  const double limit =
      std::min(rng.uniform(4.2, 5.0),
               0.95 * std::sqrt(kLatAccelBudget / kappa_detour));
  const double v0 = rng.uniform(3.2, std::min(4.2, limit));
  scene.ego_status = {v0, 0.0, 0.0};
  scene.speed_limit = limit;
  scene.nav = NavCommand::FollowLane;

  // Obstacle past the end of the blend so branch traffic has full lateral
  // separation before its rear face comes within the TTC horizon.
  const double obs_w = 1.8;
  const double s_obs_rear = s0 + kForkBlend + rng.uniform(1.2, 2.0);
  scene.agents.push_back({0, {s_obs_rear + 2.3, 0.0, 0.0}, 0.0, 4.6, obs_w});
  scene.fork = ForkInfo{0, offset, s0, s_end};
  return scene;
}

Scene build_scene(ScenarioKind kind, const ScenarioRanges& rr,
                  RngStream& rng) {
  switch (kind) {
    case ScenarioKind::Straight: return build_straight(rr, rng);
    case ScenarioKind::Curve: return build_curve(rr, rng);
    case ScenarioKind::IntersectionTurn: return build_turn(rr, rng);
    case ScenarioKind::LeadBrake: return build_lead_brake(rr, rng);
    case ScenarioKind::Narrowing: return build_narrowing(rr, rng);
    case ScenarioKind::Fork: return build_fork(rr, rng);
  }
  throw std::logic_error("bad kind");
}

}  // namespace

Polyline reference_path(const Scene& scene, int side) {
  if (!scene.fork || side == 0) {
    return scene.route;
  }
  const ForkInfo& fork = *scene.fork;
  const double blend = kForkBlend;
  const double hold_start = fork.detour_start_s + blend;
  const double hold_end = fork.detour_end_s - blend;
  std::vector<Vec2> pts;
  const double len = scene.route.length();
  // Branches that run to the end of the scene never blend back.
  const bool rejoins = fork.detour_end_s < len - 1e-9;
  for (double s = 0.0; s <= len + 1e-9; s += 0.5) {
    const double sc = std::min(s, len);
    const Vec2 base = scene.route.point_at(sc);
    double off = 0.0;
    if (sc >= fork.detour_start_s && (sc <= fork.detour_end_s || !rejoins)) {
      if (sc < hold_start) {
        off = smoothstep((sc - fork.detour_start_s) / blend);
      } else if (sc <= hold_end || !rejoins) {
        off = 1.0;
      } else {
        off = smoothstep((fork.detour_end_s - sc) / blend);
      }
    }
    const double h = scene.route.heading_at(sc);
    const Vec2 n{-std::sin(h), std::cos(h)};
    pts.push_back(base + n * (static_cast<double>(side) * fork.offset * off));
  }
  return Polyline(std::move(pts));
}

namespace {

double curvature_at(const Polyline& path, double s) {
  const double ds = 1.0;
  const double h0 = path.heading_at(std::max(0.0, s - ds));
  const double h1 = path.heading_at(std::min(path.length(), s + ds));
  return std::abs(angle_diff(h1, h0)) / (2.0 * ds);
}

}  // namespace

Trajectory oracle_expert_variant(const Scene& scene, int side, int n_waypoints,
                                 double dt_waypoint) {
  validate_scene(scene);
  const Polyline ref = reference_path(scene, side);
  const double ref_len = ref.length();

  const double ds = 0.5;
  const int grid_n = static_cast<int>(ref_len / ds) + 1;
  std::vector<double> vmax(static_cast<std::size_t>(grid_n), 0.0);
  for (int i = 0; i < grid_n; ++i) {
    const double s = i * ds;
    // Small look-ahead so the bound engages before the curvature does.
    double kappa = 0.0;
    for (double look = 0.0; look <= 3.0; look += 1.0) {
      kappa = std::max(kappa, curvature_at(ref, s + look));
    }
    double v = scene.speed_limit;
    if (kappa > 1e-6) {
      v = std::min(v, std::sqrt(kLatAccelBudget / kappa));
      v = std::min(v, kYawBudget / kappa);
    }
    vmax[static_cast<std::size_t>(i)] = v;
  }

  const auto is_fork_obstacle = [&](const Agent& a) {
    return scene.fork && a.id == scene.fork->obstacle_agent && side != 0;
  };
  for (const Agent& a : scene.agents) {
    if (is_fork_obstacle(a)) continue;  // the detour clears the obstacle
    const double s_a = ref.project({a.pose.x, a.pose.y});
    const Vec2 close = ref.point_at(s_a);
    const double lateral = std::hypot(a.pose.x - close.x, a.pose.y - close.y);
    if (lateral > 1.6 || s_a < 0.5) continue;
    if (std::abs(a.velocity) < 0.3) {
      const double stop_s = s_a - a.length / 2.0 - 2.3 - kLeadMargin;
      for (int i = 0; i < grid_n; ++i) {
        const double gap = stop_s - i * ds;
        const double v_brake =
            gap > 0 ? std::sqrt(2.0 * kOracleDecel * gap) : 0.0;
        vmax[static_cast<std::size_t>(i)] =
            std::min(vmax[static_cast<std::size_t>(i)], v_brake);
      }
    } else {
      for (int i = 0; i < grid_n; ++i) {
        if (i * ds > s_a - 25.0) {
          vmax[static_cast<std::size_t>(i)] = std::min(
              vmax[static_cast<std::size_t>(i)], std::max(0.5, a.velocity));
        }
      }
    }
  }

  // Backward braking envelope.
  for (int i = grid_n - 2; i >= 0; --i) {
    vmax[static_cast<std::size_t>(i)] =
        std::min(vmax[static_cast<std::size_t>(i)],
                 std::sqrt(vmax[static_cast<std::size_t>(i + 1)] *
                               vmax[static_cast<std::size_t>(i + 1)] +
                           2.0 * kOracleDecel * ds));
  }
  const auto bound_at = [&](double s) {
    if (s >= ref_len) return 0.0;
    const int i = std::min(grid_n - 1, static_cast<int>(s / ds));
    return vmax[static_cast<std::size_t>(i)];
  };

  const double dt = 0.05;
  double s = 0.0;
  double v = std::min(scene.ego_status.speed, bound_at(0.0));
  double a_prev = 0.0;
  Trajectory traj;
  traj.dt_waypoint = dt_waypoint;
  const int substeps = static_cast<int>(std::lround(dt_waypoint / dt));
  for (int k = 1; k <= n_waypoints; ++k) {
    for (int j = 0; j < substeps; ++j) {
      double a_des = (bound_at(s) - v) / dt;
      a_des = std::clamp(a_des, -kOracleDecel, kOracleAccel);
      a_des = std::clamp(a_des, a_prev - kOracleJerk * dt,
                         a_prev + kOracleJerk * dt);
      v = std::max(0.0, v + a_des * dt);
      v = std::min(v, bound_at(s));
      s += v * dt;
      a_prev = a_des;
    }
    const double sc = std::min(s, ref_len);
    const Vec2 pos = ref.point_at(sc);
    traj.waypoints.push_back({pos.x, pos.y, ref.heading_at(sc)});
  }
  return traj;
}

Trajectory oracle_expert(const Scene& scene, RngStream& variant_rng,
                         int n_waypoints, double dt_waypoint) {
  int side = 0;
  if (scene.fork) side = variant_rng.uniform01() < 0.5 ? 1 : -1;
  return oracle_expert_variant(scene, side, n_waypoints, dt_waypoint);
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
  GeneratedCorpus out;
  const SimConfig sim;
  int scene_index = 0;
  for (const auto& [kind, count] : spec.counts) {
    if (count < 0) throw std::invalid_argument("negative scenario count");
    for (int i = 0; i < count; ++i) {
      bool ok = false;
      for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
        RngStream rng =
            derive_stream(spec.seed, "corpus.scene",
                          static_cast<std::uint64_t>(scene_index),
                          static_cast<std::uint64_t>(attempt));
        Scene scene = build_scene(kind, spec.ranges, rng);
        char id[32];
        std::snprintf(id, sizeof(id), "s%05d", scene_index);
        scene.id = id;
        quantize_scene(scene);
        try {
          validate_scene(scene);
          double worst = 1.0;
          const std::vector<int> sides =
              scene.fork ? std::vector<int>{1, -1} : std::vector<int>{0};
          bool feasible = true;
          for (int side : sides) {
            const Trajectory demo = oracle_expert_variant(scene, side);
            const PdmsBreakdown b = score_all(scene, demo, sim);
            if (b.nc != 1 || b.dac != 1 || b.comfort != 1 || b.pdms < 0.8) {
              if (std::getenv("DPLAN_DEBUG_FEASIBILITY")) {
                std::fprintf(stderr,
                             "%s attempt %d side %d: nc=%d dac=%d ttc=%d "
                             "comfort=%d ep=%.3f pdms=%.3f\n",
                             to_string(kind), attempt, side, b.nc, b.dac,
                             b.ttc, b.comfort, b.ep, b.pdms);
              }
              feasible = false;
              break;
            }
            worst = std::min(worst, b.pdms);
          }
          if (!feasible) continue;
          out.oracle_pdms_floor = std::min(out.oracle_pdms_floor, worst);
          out.scenes.push_back(std::move(scene));
          ok = true;
        } catch (const std::exception&) {
          continue;
        }
      }
      if (!ok) {
        throw std::runtime_error(
            "corpus generation failed: no feasible draw for " +
            std::string(to_string(kind)));
      }
      ++scene_index;
    }
  }
  return out;
}

namespace {

void append_xy_list(std::string& out, const std::vector<Vec2>& pts) {
  out += '[';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ',';
    out += '[';
    out += fmt9(pts[i].x);
    out += ',';
    out += fmt9(pts[i].y);
    out += ']';
  }
  out += ']';
}

}  // namespace

std::string scene_to_json_line(const Scene& scene) {
  std::string s = "{\"schema\":1,\"id\":\"" + scene.id + "\",\"kind\":\"" +
                  to_string(scene.kind) + "\",\"drivable\":";
  append_xy_list(s, scene.drivable_area.points());
  s += ",\"route\":";
  append_xy_list(s, scene.route.points());
  s += ",\"ego\":{\"pose\":[" + fmt9(scene.ego_pose.x) + ',' +
       fmt9(scene.ego_pose.y) + ',' + fmt9(scene.ego_pose.heading) +
       "],\"speed\":" + fmt9(scene.ego_status.speed) +
       ",\"accel\":" + fmt9(scene.ego_status.acceleration) +
       ",\"yaw_rate\":" + fmt9(scene.ego_status.yaw_rate) + '}';
  s += ",\"agents\":[";
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const Agent& a = scene.agents[i];
    if (i) s += ',';
    s += "{\"id\":" + std::to_string(a.id) + ",\"pose\":[" + fmt9(a.pose.x) +
         ',' + fmt9(a.pose.y) + ',' + fmt9(a.pose.heading) +
         "],\"v\":" + fmt9(a.velocity) + ",\"len\":" + fmt9(a.length) +
         ",\"wid\":" + fmt9(a.width) + '}';
  }
  s += "],\"nav\":\"" + std::string(to_string(scene.nav)) + "\"";
  s += ",\"speed_limit\":" + fmt9(scene.speed_limit);
  s += ",\"duration\":" + fmt9(scene.duration);
  if (scene.fork) {
    s += ",\"fork\":{\"agent\":" + std::to_string(scene.fork->obstacle_agent) +
         ",\"offset\":" + fmt9(scene.fork->offset) +
         ",\"start_s\":" + fmt9(scene.fork->detour_start_s) +
         ",\"end_s\":" + fmt9(scene.fork->detour_end_s) + '}';
  }
  s += '}';
  return s;
}

Scene scene_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  if (!j.contains("schema") || !j.at("schema").is_number_integer()) {
    throw std::invalid_argument("missing schema version");
  }
  if (j.at("schema").get<int>() != 1) {
    throw std::invalid_argument("unsupported corpus schema version " +
                                j.at("schema").dump());
  }
  Scene scene;
  scene.id = j.at("id").get<std::string>();
  scene.kind = kind_from_string(j.at("kind").get<std::string>());
  const auto read_pts = [](const nlohmann::json& arr) {
    std::vector<Vec2> pts;
    pts.reserve(arr.size());
    for (const auto& p : arr) {
      pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    return pts;
  };
  scene.drivable_area = Polygon(read_pts(j.at("drivable")));
  scene.route = Polyline(read_pts(j.at("route")));
  const auto& ego = j.at("ego");
  scene.ego_pose = {ego.at("pose").at(0).get<double>(),
                    ego.at("pose").at(1).get<double>(),
                    ego.at("pose").at(2).get<double>()};
  scene.ego_status = {ego.at("speed").get<double>(),
                      ego.at("accel").get<double>(),
                      ego.at("yaw_rate").get<double>()};
  for (const auto& aj : j.at("agents")) {
    Agent a;
    a.id = aj.at("id").get<int>();
    a.pose = {aj.at("pose").at(0).get<double>(),
              aj.at("pose").at(1).get<double>(),
              aj.at("pose").at(2).get<double>()};
    a.velocity = aj.at("v").get<double>();
    a.length = aj.at("len").get<double>();
    a.width = aj.at("wid").get<double>();
    scene.agents.push_back(a);
  }
  scene.nav = nav_from_string(j.at("nav").get<std::string>());
  scene.speed_limit = j.at("speed_limit").get<double>();
  scene.duration = j.at("duration").get<double>();
  if (j.contains("fork")) {
    const auto& fj = j.at("fork");
    scene.fork =
        ForkInfo{fj.at("agent").get<int>(), fj.at("offset").get<double>(),
                 fj.at("start_s").get<double>(), fj.at("end_s").get<double>()};
  }
  validate_scene(scene);
  return scene;
}

void save_corpus(const std::vector<Scene>& scenes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Scene& scene : scenes) {
    out << scene_to_json_line(scene) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<Scene> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Scene> scenes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      scenes.push_back(scene_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace dplan
