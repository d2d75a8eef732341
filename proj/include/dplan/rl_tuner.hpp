#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dplan/pipeline.hpp"

namespace dplan {

struct RlConfig {
  int group_size = 8;              // G
  double gamma = 0.6;              // per-step discount, step 1 = final move
  double lambda_bc = 0.01;         // behavior-cloning weight
  double sampling_sigma_min = 0.02;
  double logprob_sigma_floor = 0.10;
  int chain_steps = 5;
  int epochs = 10;
  int batch_scenes = 16;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  double adv_epsilon = 1e-8;
};

void validate(const RlConfig& cfg);

struct RolloutGroup {
  int scene_index = 0;
  std::string scene_id;
  std::vector<DiffusionChain> chains;
  std::vector<double> rewards;     // PDMS of each denoised trajectory
  std::vector<double> advantages;  // filled by group_advantages
};

// G chains sampled under `params` with per-chain streams derived from
// rollout_key, each scored by the simulator; a scene failure on one chain
// gives that chain reward 0.
RolloutGroup sample_group(const ParamStore& params, const Scene& scene,
                          const ConditioningBundle& cond, const RlConfig& cfg,
                          const PlannerSetup& setup, std::uint64_t rollout_key);

// (r_i - mean) / sqrt(population var + adv_epsilon); an exactly
// zero-variance group maps to all-zero advantages.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double adv_epsilon);

// Isotropic Gaussian log density over all components with the std floored.
double step_logprob(const Mat& x_prev, const Mat& mean, double sigma,
                    double floor);

// Per-step log probabilities of a recorded chain with the means recomputed
// under `params` (which may differ from the sampling parameters).
std::vector<double> chain_logprob(const DiffusionChain& chain,
                                  const ParamStore& params,
                                  const ConditioningBundle& cond,
                                  double logprob_sigma_floor,
                                  const DenoiserConfig& cfg);
std::vector<Var> chain_logprob_tape(Tape& t, TapeParams& p,
                                    const DiffusionChain& chain,
                                    const ConditioningBundle& cond,
                                    double logprob_sigma_floor,
                                    const DenoiserConfig& cfg);

// Discounted policy-gradient loss minus the BC regularizer:
//   L = -(1/n_chains) sum_i (1/T) sum_t gamma^(t-1) logpi(x_{t-1}|x_t) A_i
//       - lambda (1/n_ref) (1/T) sum log pi(ref transitions),
// where step t=1 is the final (cleanest) denoising move. Advantages are
// constants.
Var rl_loss_tape(Tape& t, TapeParams& p, const std::vector<RolloutGroup>& groups,
                 const std::vector<const ConditioningBundle*>& group_conds,
                 const std::vector<DiffusionChain>& ref_chains,
                 const std::vector<const ConditioningBundle*>& ref_conds,
                 const RlConfig& cfg, const DenoiserConfig& dcfg);
double rl_loss(const ParamStore& params, const std::vector<RolloutGroup>& groups,
               const std::vector<const ConditioningBundle*>& group_conds,
               const std::vector<DiffusionChain>& ref_chains,
               const std::vector<const ConditioningBundle*>& ref_conds,
               const RlConfig& cfg, const DenoiserConfig& dcfg);

struct RlEpochRow {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double rl_loss = 0.0;
  double bc_loss = 0.0;
  double eval_pdms = -1.0;  // -1 when no eval corpus was given
};

struct RlResult {
  std::vector<RlEpochRow> curve;
  bool diverged = false;
};

// On-policy fine-tuning: one AdamW step per rollout batch, reference chains
// resampled from the frozen ref_params every iteration, cosine lr decay to 0.
// Deterministic given cfg.seed.
RlResult rl_update(ParamStore& params, const ParamStore& ref_params,
                   const std::vector<Scene>& scenes, const RlConfig& cfg,
                   const PlannerSetup& setup,
                   const std::vector<Scene>* eval_scenes = nullptr);

}  // namespace dplan
