#include "dplan/rl_tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "dplan/optim.hpp"

namespace dplan {

void validate(const RlConfig& cfg) {
  if (cfg.group_size < 2) throw std::invalid_argument("group size must be >= 2");
  if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  if (cfg.lambda_bc < 0.0) throw std::invalid_argument("bc weight must be >= 0");
  if (cfg.sampling_sigma_min > cfg.logprob_sigma_floor) {
    throw std::invalid_argument(
        "sampling sigma floor must not exceed the log-prob floor");
  }
  if (cfg.chain_steps < 1 || cfg.epochs < 1 || cfg.batch_scenes < 1) {
    throw std::invalid_argument("rl config counts must be positive");
  }
  if (!(cfg.lr >= 0.0) || cfg.adv_epsilon < 0.0 || cfg.weight_decay < 0.0) {
    throw std::invalid_argument("rl config rates invalid");
  }
}

RolloutGroup sample_group(const ParamStore& params, const Scene& scene,
                          const ConditioningBundle& cond, const RlConfig& cfg,
                          const PlannerSetup& setup,
                          std::uint64_t rollout_key) {
  RolloutGroup group;
  group.scene_id = scene.id;
  const std::vector<int> steps =
      strided_timesteps(setup.schedule.steps, cfg.chain_steps);
  for (int i = 0; i < cfg.group_size; ++i) {
    RngStream rng = derive_stream(rollout_key, "rl.chain",
                                  static_cast<std::uint64_t>(i));
    ConditioningBundle local = cond;
    const NoisePredictor predictor = [&](const Mat& x, int t) {
      local.timestep = t;
      return predict_noise(params, x, local, t, setup.denoiser);
    };
    DiffusionChain chain =
        sample_chain(predictor, setup.traj.n_waypoints, setup.schedule, steps,
                     cfg.sampling_sigma_min, rng);
    double reward = 0.0;
    try {
      const Trajectory traj = denormalize(chain.states.back(), setup.norm,
                                          setup.traj.dt_waypoint);
      reward = score_all(scene, traj, setup.sim).pdms;
    } catch (const std::exception&) {
      reward = 0.0;  // simulator rejection counts as a zero-reward rollout
    }
    group.chains.push_back(std::move(chain));
    group.rewards.push_back(reward);
  }
  return group;
}

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double adv_epsilon) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("advantages need at least 2 rewards");
  const double mean =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) /
      static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  std::vector<double> adv(n, 0.0);
  // adv_epsilon acts as a variance guard: groups at or below it carry no
  // usable signal and are zeroed outright, everything else divides by the
  // exact population std so standardization is shift/scale invariant.
  if (var <= adv_epsilon) return adv;
  const double denom = std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double step_logprob(const Mat& x_prev, const Mat& mean, double sigma,
                    double floor) {
  if (x_prev.rows() != mean.rows() || x_prev.cols() != mean.cols()) {
    throw std::invalid_argument("step_logprob shape mismatch");
  }
  const double s = std::max(sigma, floor);
  const double d = static_cast<double>(x_prev.size());
  return -d * std::log(s * std::sqrt(2.0 * std::numbers::pi)) -
         (x_prev - mean).squaredNorm() / (2.0 * s * s);
}

std::vector<Var> chain_logprob_tape(Tape& t, TapeParams& p,
                                    const DiffusionChain& chain,
                                    const ConditioningBundle& cond,
                                    double logprob_sigma_floor,
                                    const DenoiserConfig& cfg) {
  validate_chain(chain);
  std::vector<Var> terms;
  terms.reserve(chain.timesteps.size());
  ConditioningBundle local = cond;
  for (std::size_t i = 0; i < chain.timesteps.size(); ++i) {
    const int step_t = chain.timesteps[i];
    const Mat& x_t = chain.states[i];
    const Mat& x_prev = chain.states[i + 1];
    const double abt = chain.step_alpha_bars[i];
    const double abn = chain.next_alpha_bars[i];
    const double sigma_used = chain.step_sigmas[i];

    local.timestep = step_t;
    Var eps_hat = predict_noise_tape(t, p, x_t, local, step_t, cfg);

    // Mirror of the sampler's mean computation under the current parameters.
    const double sqrt_ab = std::sqrt(abt);
    const double sqrt_1mab = std::sqrt(1.0 - abt);
    Var x0_hat = t.clamp(
        t.add_const(t.scale(eps_hat, -sqrt_1mab / sqrt_ab), x_t / sqrt_ab),
        -1.0, 1.0);
    Var eps_c = t.add_const(t.scale(x0_hat, -sqrt_ab / sqrt_1mab),
                            x_t / sqrt_1mab);
    const double dir =
        std::sqrt(std::max(1.0 - abn - sigma_used * sigma_used, 0.0));
    Var mean = t.add(t.scale(x0_hat, std::sqrt(abn)), t.scale(eps_c, dir));

    const double s = std::max(sigma_used, logprob_sigma_floor);
    const double d = static_cast<double>(x_prev.size());
    Var diff = t.sub(t.constant(x_prev), mean);
    Var lp = t.add(
        t.scale(t.sum_sq(diff), -1.0 / (2.0 * s * s)),
        t.constant_scalar(-d * std::log(s * std::sqrt(2.0 * std::numbers::pi))));
    terms.push_back(lp);
  }
  return terms;
}

std::vector<double> chain_logprob(const DiffusionChain& chain,
                                  const ParamStore& params,
                                  const ConditioningBundle& cond,
                                  double logprob_sigma_floor,
                                  const DenoiserConfig& cfg) {
  Tape t;
  TapeParams p(t, params);
  const std::vector<Var> terms =
      chain_logprob_tape(t, p, chain, cond, logprob_sigma_floor, cfg);
  std::vector<double> out;
  out.reserve(terms.size());
  for (const Var& v : terms) out.push_back(v.value()(0, 0));
  return out;
}

namespace {

// gamma^(t-1) with step t=1 the final recorded move, i.e. the weight of the
// k-th transition in sampling order is gamma^(T-1-k).
double discount_weight(double gamma, std::size_t k, std::size_t total) {
  return std::pow(gamma, static_cast<double>(total - 1 - k));
}

}  // namespace

Var rl_loss_tape(Tape& t, TapeParams& p, const std::vector<RolloutGroup>& groups,
                 const std::vector<const ConditioningBundle*>& group_conds,
                 const std::vector<DiffusionChain>& ref_chains,
                 const std::vector<const ConditioningBundle*>& ref_conds,
                 const RlConfig& cfg, const DenoiserConfig& dcfg) {
  if (groups.empty()) throw std::invalid_argument("rl loss needs groups");
  if (groups.size() != group_conds.size() ||
      ref_chains.size() != ref_conds.size()) {
    throw std::invalid_argument("conditioning lists misaligned");
  }
  std::size_t n_chains = 0;
  for (const RolloutGroup& g : groups) {
    if (g.advantages.size() != g.chains.size()) {
      throw std::invalid_argument("group advantages not populated");
    }
    n_chains += g.chains.size();
  }

  Var loss = t.constant_scalar(0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const RolloutGroup& group = groups[gi];
    for (std::size_t ci = 0; ci < group.chains.size(); ++ci) {
      const double adv = group.advantages[ci];
      if (adv == 0.0) continue;  // exactly zero contribution
      const std::vector<Var> lps = chain_logprob_tape(
          t, p, group.chains[ci], *group_conds[gi],
          cfg.logprob_sigma_floor, dcfg);
      const std::size_t steps = lps.size();
      for (std::size_t k = 0; k < steps; ++k) {
        const double w = discount_weight(cfg.gamma, k, steps);
        loss = t.add(loss, t.scale(lps[k],
                                   -adv * w / (static_cast<double>(steps) *
                                               static_cast<double>(n_chains))));
      }
    }
  }
  if (cfg.lambda_bc > 0.0 && !ref_chains.empty()) {
    const double n_ref = static_cast<double>(ref_chains.size());
    for (std::size_t ri = 0; ri < ref_chains.size(); ++ri) {
      const std::vector<Var> lps = chain_logprob_tape(
          t, p, ref_chains[ri], *ref_conds[ri], cfg.logprob_sigma_floor, dcfg);
      for (const Var& lp : lps) {
        loss = t.add(loss, t.scale(lp, -cfg.lambda_bc /
                                           (static_cast<double>(lps.size()) *
                                            n_ref)));
      }
    }
  }
  return loss;
}

double rl_loss(const ParamStore& params, const std::vector<RolloutGroup>& groups,
               const std::vector<const ConditioningBundle*>& group_conds,
               const std::vector<DiffusionChain>& ref_chains,
               const std::vector<const ConditioningBundle*>& ref_conds,
               const RlConfig& cfg, const DenoiserConfig& dcfg) {
  Tape t;
  TapeParams p(t, params);
  return rl_loss_tape(t, p, groups, group_conds, ref_chains, ref_conds, cfg,
                      dcfg)
      .value()(0, 0);
}

namespace {

// Per-chain gradient accumulation keeps tape memory flat: the loss is a sum
// of independent chain terms.
struct ChainGradAccumulator {
  double rl_part = 0.0;
  double bc_part = 0.0;

  bool accumulate_policy(const ParamStore& params, const DiffusionChain& chain,
                         const ConditioningBundle& cond, double adv,
                         std::size_t n_chains, const RlConfig& cfg,
                         const DenoiserConfig& dcfg, GradStore& grads) {
    if (adv == 0.0) return true;
    GradStore local(params);
    const double value = gradient(
        params,
        [&](Tape& t, TapeParams& p) {
          const std::vector<Var> lps =
              chain_logprob_tape(t, p, chain, cond, cfg.logprob_sigma_floor,
                                 dcfg);
          Var acc = t.constant_scalar(0.0);
          for (std::size_t k = 0; k < lps.size(); ++k) {
            const double w = discount_weight(cfg.gamma, k, lps.size());
            acc = t.add(acc, t.scale(lps[k],
                                     -adv * w /
                                         (static_cast<double>(lps.size()) *
                                          static_cast<double>(n_chains))));
          }
          return acc;
        },
        local);
    if (!std::isfinite(value) || !local.all_finite()) return false;
    rl_part += value;
    grads.add(local);
    return true;
  }

  bool accumulate_bc(const ParamStore& params, const DiffusionChain& chain,
                     const ConditioningBundle& cond, std::size_t n_ref,
                     const RlConfig& cfg, const DenoiserConfig& dcfg,
                     GradStore& grads) {
    GradStore local(params);
    const double value = gradient(
        params,
        [&](Tape& t, TapeParams& p) {
          const std::vector<Var> lps =
              chain_logprob_tape(t, p, chain, cond, cfg.logprob_sigma_floor,
                                 dcfg);
          Var acc = t.constant_scalar(0.0);
          for (const Var& lp : lps) {
            acc = t.add(acc, t.scale(lp, -cfg.lambda_bc /
                                             (static_cast<double>(lps.size()) *
                                              static_cast<double>(n_ref))));
          }
          return acc;
        },
        local);
    if (!std::isfinite(value) || !local.all_finite()) return false;
    bc_part += value;
    grads.add(local);
    return true;
  }
};

}  // namespace

RlResult rl_update(ParamStore& params, const ParamStore& ref_params,
                   const std::vector<Scene>& scenes, const RlConfig& cfg,
                   const PlannerSetup& setup,
                   const std::vector<Scene>* eval_scenes) {
  validate(cfg);
  validate_setup(setup);
  if (scenes.empty()) throw std::invalid_argument("empty RL corpus");

  std::vector<ConditioningBundle> bundles;
  bundles.reserve(scenes.size());
  for (const Scene& scene : scenes) bundles.push_back(make_bundle(scene, setup));

  const std::vector<int> steps =
      strided_timesteps(setup.schedule.steps, cfg.chain_steps);
  const int n_scenes = static_cast<int>(scenes.size());
  const int iters_per_epoch =
      (n_scenes + cfg.batch_scenes - 1) / cfg.batch_scenes;
  const int total_iters = cfg.epochs * iters_per_epoch;

  AdamW opt(params, {.weight_decay = cfg.weight_decay});
  RlResult result;
  ParamStore last_good = params;

  int iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Deterministic shuffle of the scene order.
    std::vector<int> order(static_cast<std::size_t>(n_scenes));
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng = derive_stream(cfg.seed, "rl.order",
                                          static_cast<std::uint64_t>(epoch));
    for (int i = n_scenes - 1; i > 0; --i) {
      const int j = shuffle_rng.uniform_int(0, i);
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(j)]);
    }

    double epoch_reward = 0.0, epoch_absadv = 0.0;
    double epoch_rl_loss = 0.0, epoch_bc_loss = 0.0;
    std::size_t epoch_chains = 0;
    int epoch_iters = 0;
    bool diverged = false;

    for (int start = 0; start < n_scenes && !diverged;
         start += cfg.batch_scenes, ++iter, ++epoch_iters) {
      const int end = std::min(n_scenes, start + cfg.batch_scenes);

      std::vector<RolloutGroup> groups;
      std::vector<const ConditioningBundle*> group_conds;
      std::vector<DiffusionChain> ref_chains;
      std::vector<const ConditioningBundle*> ref_conds;
      for (int b = start; b < end; ++b) {
        const int si = order[static_cast<std::size_t>(b)];
        const Scene& scene = scenes[static_cast<std::size_t>(si)];
        const ConditioningBundle& cond =
            bundles[static_cast<std::size_t>(si)];
        RolloutGroup group = sample_group(
            params, scene, cond, cfg, setup,
            stream_key(cfg.seed, "rl.rollout",
                       static_cast<std::uint64_t>(iter),
                       static_cast<std::uint64_t>(si)));
        group.scene_index = si;
        group.advantages = group_advantages(group.rewards, cfg.adv_epsilon);
        for (std::size_t i = 0; i < group.rewards.size(); ++i) {
          epoch_reward += group.rewards[i];
          epoch_absadv += std::abs(group.advantages[i]);
        }
        epoch_chains += group.rewards.size();
        group_conds.push_back(&cond);
        groups.push_back(std::move(group));
      }

      // Fresh reference chains for the BC anchor: G per iteration, cycling
      // through the batch's scenes for their conditioning.
      for (int i = 0; i < cfg.group_size; ++i) {
        const int si = order[static_cast<std::size_t>(
            start + (i % (end - start)))];
        const ConditioningBundle& cond = bundles[static_cast<std::size_t>(si)];
        ConditioningBundle local = cond;
        RngStream rng = derive_stream(
            stream_key(cfg.seed, "rl.ref", static_cast<std::uint64_t>(iter)),
            "rl.chain", static_cast<std::uint64_t>(i));
        const NoisePredictor predictor = [&](const Mat& x, int t) {
          local.timestep = t;
          return predict_noise(ref_params, x, local, t, setup.denoiser);
        };
        ref_chains.push_back(sample_chain(predictor, setup.traj.n_waypoints,
                                          setup.schedule, steps,
                                          cfg.sampling_sigma_min, rng));
        ref_conds.push_back(&cond);
      }

      std::size_t n_chains = 0;
      for (const RolloutGroup& g : groups) n_chains += g.chains.size();

      GradStore grads(params);
      ChainGradAccumulator acc;
      bool ok = true;
      for (std::size_t gi = 0; gi < groups.size() && ok; ++gi) {
        for (std::size_t ci = 0; ci < groups[gi].chains.size() && ok; ++ci) {
          ok = acc.accumulate_policy(params, groups[gi].chains[ci],
                                     *group_conds[gi],
                                     groups[gi].advantages[ci], n_chains, cfg,
                                     setup.denoiser, grads);
        }
      }
      if (ok && cfg.lambda_bc > 0.0) {
        for (std::size_t ri = 0; ri < ref_chains.size() && ok; ++ri) {
          ok = acc.accumulate_bc(params, ref_chains[ri], *ref_conds[ri],
                                 ref_chains.size(), cfg, setup.denoiser,
                                 grads);
        }
      }
      if (!ok) {
        params = last_good;
        result.diverged = true;
        diverged = true;
        break;
      }
      epoch_rl_loss += acc.rl_part;
      epoch_bc_loss += acc.bc_part;

      const double lr = lr_schedule(iter, total_iters, 0.0, cfg.lr, 0.0);
      opt.step(params, grads, lr);
    }

    RlEpochRow row;
    row.epoch = epoch;
    row.mean_reward =
        epoch_chains ? epoch_reward / static_cast<double>(epoch_chains) : 0.0;
    row.mean_abs_advantage =
        epoch_chains ? epoch_absadv / static_cast<double>(epoch_chains) : 0.0;
    row.rl_loss = epoch_iters ? epoch_rl_loss / epoch_iters : 0.0;
    row.bc_loss = epoch_iters ? epoch_bc_loss / epoch_iters : 0.0;
    if (eval_scenes && !eval_scenes->empty()) {
      auto snapshot = std::make_shared<const ParamStore>(params);
      const Planner planner = make_diffusion_planner(
          snapshot, setup, stream_key(cfg.seed, "rl.eval"));
      row.eval_pdms = evaluate(planner, *eval_scenes, setup.sim).mean_pdms;
    }
    result.curve.push_back(row);
    if (result.diverged) break;
    last_good = params;
  }
  return result;
}

}  // namespace dplan
