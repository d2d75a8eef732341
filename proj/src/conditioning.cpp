#include "dplan/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dplan/rng.hpp"

namespace dplan {

void validate(const SceneFeaturizerConfig& cfg) {
  if (cfg.route_samples < 1 || cfg.max_agents < 0 || cfg.token_dim < 1) {
    throw std::invalid_argument("featurizer config counts invalid");
  }
}

namespace {

// Feature scales keeping raw payloads near unit magnitude.
constexpr double kPosScale = 50.0;
constexpr double kSpeedScale = 15.0;
constexpr double kAccelScale = 5.0;
constexpr double kLengthScale = 10.0;
constexpr double kWidthScale = 5.0;

struct EgoFrame {
  double cx, sx, ox, oy;
  Vec2 to_local(const Vec2& p) const {
    const double dx = p.x - ox;
    const double dy = p.y - oy;
    return {cx * dx + sx * dy, -sx * dx + cx * dy};
  }
};

}  // namespace

Mat raw_scene_features(const Scene& scene, NavCommand nav,
                       const EgoStatus& ego,
                       const SceneFeaturizerConfig& cfg) {
  validate(cfg);
  validate_scene(scene);
  const int L = cfg.tokens();
  Mat raw = Mat::Zero(L, kRawFeatureDim);
  const EgoFrame frame{std::cos(scene.ego_pose.heading),
                       std::sin(scene.ego_pose.heading), scene.ego_pose.x,
                       scene.ego_pose.y};

  // Route tokens: equally spaced centerline points with their tangents,
  // spanning the stretch reachable within the planning horizon.
  const double len = std::min(scene.route.length(), 65.0);
  for (int j = 0; j < cfg.route_samples; ++j) {
    const double s = cfg.route_samples > 1
                         ? len * static_cast<double>(j) /
                               static_cast<double>(cfg.route_samples - 1)
                         : 0.0;
    const Vec2 p = frame.to_local(scene.route.point_at(s));
    const double h =
        scene.route.heading_at(s) - scene.ego_pose.heading;
    raw(j, 0) = 1.0;
    raw(j, 4) = p.x / kPosScale;
    raw(j, 5) = p.y / kPosScale;
    raw(j, 6) = std::cos(h);
    raw(j, 7) = std::sin(h);
  }

  // Agent tokens: nearest max_agents by Euclidean distance, ties by id
  // ascending; missing slots stay exactly zero.
  std::vector<std::size_t> order(scene.agents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto da = std::hypot(scene.agents[a].pose.x - scene.ego_pose.x,
                               scene.agents[a].pose.y - scene.ego_pose.y);
    const auto db = std::hypot(scene.agents[b].pose.x - scene.ego_pose.x,
                               scene.agents[b].pose.y - scene.ego_pose.y);
    if (da != db) return da < db;
    return scene.agents[a].id < scene.agents[b].id;
  });
  const int n_agents = std::min<int>(cfg.max_agents,
                                     static_cast<int>(order.size()));
  for (int j = 0; j < n_agents; ++j) {
    const Agent& agent = scene.agents[order[static_cast<std::size_t>(j)]];
    const int row = cfg.route_samples + j;
    const Vec2 p = frame.to_local({agent.pose.x, agent.pose.y});
    const double h = agent.pose.heading - scene.ego_pose.heading;
    raw(row, 1) = 1.0;
    raw(row, 4) = p.x / kPosScale;
    raw(row, 5) = p.y / kPosScale;
    raw(row, 6) = std::cos(h);
    raw(row, 7) = std::sin(h);
    raw(row, 8) = agent.velocity / kSpeedScale;
    raw(row, 9) = agent.length / kLengthScale;
    raw(row, 10) = agent.width / kWidthScale;
  }

  // Navigation command token (one-hot payload).
  const int nav_row = cfg.route_samples + cfg.max_agents;
  raw(nav_row, 2) = 1.0;
  raw(nav_row, 4 + static_cast<int>(nav)) = 1.0;

  // Ego status token.
  const int ego_row = nav_row + 1;
  raw(ego_row, 3) = 1.0;
  raw(ego_row, 4) = ego.speed / kSpeedScale;
  raw(ego_row, 5) = ego.acceleration / kAccelScale;
  raw(ego_row, 6) = ego.yaw_rate;
  return raw;
}

Mat featurizer_projection(const SceneFeaturizerConfig& cfg) {
  RngStream rng = derive_stream(cfg.seed, "featurizer.projection");
  Mat proj(kRawFeatureDim, cfg.token_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kRawFeatureDim));
  for (Eigen::Index r = 0; r < proj.rows(); ++r) {
    for (Eigen::Index c = 0; c < proj.cols(); ++c) {
      proj(r, c) = scale * rng.normal();
    }
  }
  return proj;
}

ConditioningBundle embed_scene(const Scene& scene, NavCommand nav,
                               const EgoStatus& ego,
                               const HistoryTrajectory& hist,
                               const SceneFeaturizerConfig& cfg,
                               const NormalizationSpec& norm) {
  ConditioningBundle bundle;
  bundle.tokens = raw_scene_features(scene, nav, ego, cfg) *
                  featurizer_projection(cfg);
  bundle.pooled = pool_semantic(bundle.tokens);
  bundle.ego = ego;
  bundle.hist = normalize_history(hist, norm);
  bundle.timestep = 0;
  return bundle;
}

HistoryTrajectory make_history(const EgoStatus& ego, int hist_len,
                               double dt_waypoint) {
  if (hist_len < 1) throw std::invalid_argument("history length must be >= 1");
  HistoryTrajectory hist;
  hist.dt_waypoint = dt_waypoint;
  hist.waypoints.reserve(static_cast<std::size_t>(hist_len));
  for (int k = hist_len; k >= 1; --k) {
    hist.waypoints.push_back(
        {-ego.speed * static_cast<double>(k) * dt_waypoint, 0.0, 0.0});
  }
  return hist;
}

}  // namespace dplan
