#include "dplan/pipeline.hpp"

#include <stdexcept>

namespace dplan {

void validate_setup(const PlannerSetup& setup) {
  validate(setup.denoiser);
  validate(setup.featurizer);
  validate(setup.norm);
  if (setup.denoiser.n_waypoints != setup.traj.n_waypoints) {
    throw std::invalid_argument("waypoint counts disagree (denoiser vs traj)");
  }
  if (setup.denoiser.hist_len != setup.traj.hist_len) {
    throw std::invalid_argument("history lengths disagree (denoiser vs traj)");
  }
  if (setup.featurizer.token_dim != setup.denoiser.token_dim) {
    throw std::invalid_argument("token widths disagree (featurizer vs denoiser)");
  }
  if (setup.featurizer.tokens() != setup.denoiser.cond_tokens) {
    throw std::invalid_argument("token counts disagree (featurizer vs denoiser)");
  }
  if (setup.schedule.steps != setup.denoiser.max_timestep) {
    throw std::invalid_argument("schedule horizon disagrees with the denoiser");
  }
  if (setup.inference_steps < 1 ||
      setup.inference_steps > setup.schedule.steps) {
    throw std::invalid_argument("inference step count out of range");
  }
  if (setup.sampling_sigma_min < setup.schedule.sigma_min) {
    throw std::invalid_argument("sampling sigma floor below the schedule floor");
  }
  if (!(setup.traj.dt_waypoint > 0.0)) {
    throw std::invalid_argument("dt_waypoint must be positive");
  }
}

PlannerSetup default_setup() {
  PlannerSetup setup;
  setup.schedule = build_cosine_schedule(setup.denoiser.max_timestep, 0.02);
  validate_setup(setup);
  return setup;
}

CheckpointMeta meta_of(const PlannerSetup& setup) {
  CheckpointMeta meta;
  meta.denoiser = setup.denoiser;
  meta.featurizer = setup.featurizer;
  meta.norm = setup.norm;
  meta.traj = setup.traj;
  meta.schedule_steps = setup.schedule.steps;
  meta.schedule_sigma_min = setup.schedule.sigma_min;
  return meta;
}

PlannerSetup setup_from_meta(const CheckpointMeta& meta) {
  PlannerSetup setup;
  setup.denoiser = meta.denoiser;
  setup.featurizer = meta.featurizer;
  setup.norm = meta.norm;
  setup.traj = meta.traj;
  setup.schedule =
      build_cosine_schedule(meta.schedule_steps, meta.schedule_sigma_min);
  validate_setup(setup);
  return setup;
}

ConditioningBundle make_bundle(const Scene& scene, const PlannerSetup& setup) {
  const HistoryTrajectory hist = make_history(
      scene.ego_status, setup.traj.hist_len, setup.traj.dt_waypoint);
  return embed_scene(scene, scene.nav, scene.ego_status, hist,
                     setup.featurizer, setup.norm);
}

Mat expert_action(const Scene& scene, int side, const PlannerSetup& setup) {
  const Trajectory demo = oracle_expert_variant(
      scene, side, setup.traj.n_waypoints, setup.traj.dt_waypoint);
  return normalize(demo, setup.norm);
}

Trajectory plan_scene(const ParamStore& params, const Scene& scene,
                      const PlannerSetup& setup, RngStream& rng) {
  ConditioningBundle cond = make_bundle(scene, setup);
  const NoisePredictor predictor = [&](const Mat& x, int t) {
    cond.timestep = t;
    return predict_noise(params, x, cond, t, setup.denoiser);
  };
  const DiffusionChain chain = sample_chain(
      predictor, setup.traj.n_waypoints, setup.schedule,
      strided_timesteps(setup.schedule.steps, setup.inference_steps),
      setup.sampling_sigma_min, rng);
  return denormalize(chain.states.back(), setup.norm,
                     setup.traj.dt_waypoint);
}

Planner make_diffusion_planner(std::shared_ptr<const ParamStore> params,
                               const PlannerSetup& setup, std::uint64_t seed) {
  validate_setup(setup);
  return [params, setup, seed](const Scene& scene) {
    RngStream rng = derive_stream(seed, "plan.chain", fnv1a64(scene.id));
    return plan_scene(*params, scene, setup, rng);
  };
}

}  // namespace dplan
