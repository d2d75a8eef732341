#pragma once

#include <string>

#include "dplan/scene.hpp"
#include "dplan/simulator.hpp"

namespace dplan {

// Scene overview: drivable area, route, agents, the planned trajectory and
// its rollout trace. Pure text output, stable across runs.
std::string scene_svg(const Scene& scene, const Trajectory* traj,
                      const RolloutResult* rollout_trace);

void write_scene_svg(const std::string& path, const Scene& scene,
                     const Trajectory* traj,
                     const RolloutResult* rollout_trace);

}  // namespace dplan
