#pragma once

#include <cstdint>
#include <memory>

#include "dplan/checkpoint.hpp"
#include "dplan/conditioning.hpp"
#include "dplan/corpus.hpp"
#include "dplan/scheduler.hpp"
#include "dplan/simulator.hpp"

namespace dplan {

// Everything fixed across a training or evaluation run.
struct PlannerSetup {
  DenoiserConfig denoiser;
  SceneFeaturizerConfig featurizer;
  NormalizationSpec norm;
  TrajectoryParams traj;
  NoiseSchedule schedule;
  SimConfig sim;
  int inference_steps = 5;
  double sampling_sigma_min = 0.02;
};

// Cross-field consistency: waypoint counts, token widths, history lengths and
// schedule horizon must agree between components.
void validate_setup(const PlannerSetup& setup);

PlannerSetup default_setup();

CheckpointMeta meta_of(const PlannerSetup& setup);
PlannerSetup setup_from_meta(const CheckpointMeta& meta);

// Featurize one scene with its kinematic history.
ConditioningBundle make_bundle(const Scene& scene, const PlannerSetup& setup);

// Normalized oracle action for a scene (side: +1 left detour, -1 right,
// 0 centerline; ignored for non-fork scenes).
Mat expert_action(const Scene& scene, int side, const PlannerSetup& setup);

// Sample one trajectory by denoising from Gaussian noise.
Trajectory plan_scene(const ParamStore& params, const Scene& scene,
                      const PlannerSetup& setup, RngStream& rng);

// Deterministic planner closure: the chain seed is derived from (seed,
// scene id), so evaluation reports are reproducible byte for byte.
Planner make_diffusion_planner(std::shared_ptr<const ParamStore> params,
                               const PlannerSetup& setup, std::uint64_t seed);

}  // namespace dplan
