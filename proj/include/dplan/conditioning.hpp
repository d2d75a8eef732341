#pragma once

#include <cstdint>

#include "dplan/denoiser.hpp"
#include "dplan/scene.hpp"

namespace dplan {

// Deterministic stand-in for a learned scene encoder: fixed token layout of
// route samples, nearest agents, the navigation command and the ego status,
// projected to the token width by one seed-derived matrix.
struct SceneFeaturizerConfig {
  int route_samples = 8;
  int max_agents = 6;
  int token_dim = 64;     // D, must match the denoiser
  std::uint64_t seed = 9001;

  int tokens() const { return route_samples + max_agents + 2; }  // L
};

void validate(const SceneFeaturizerConfig& cfg);

// Raw feature width before projection: 4 type-indicator slots + 8 payload
// slots. Padding rows stay exactly zero.
inline constexpr int kRawFeatureDim = 12;

// Raw L x kRawFeatureDim token matrix, exposed for tests.
Mat raw_scene_features(const Scene& scene, NavCommand nav,
                       const EgoStatus& ego,
                       const SceneFeaturizerConfig& cfg);

Mat featurizer_projection(const SceneFeaturizerConfig& cfg);

ConditioningBundle embed_scene(const Scene& scene, NavCommand nav,
                               const EgoStatus& ego,
                               const HistoryTrajectory& hist,
                               const SceneFeaturizerConfig& cfg,
                               const NormalizationSpec& norm);

// Kinematic stand-in for the ego's past: H waypoints straight behind the
// current pose at the current speed, most recent last.
HistoryTrajectory make_history(const EgoStatus& ego, int hist_len,
                               double dt_waypoint);

}  // namespace dplan
