#include "dplan/il_trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "dplan/optim.hpp"

namespace dplan {

void validate(const IlConfig& cfg) {
  if (cfg.epochs < 1 || cfg.steps_per_epoch < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("il config counts must be positive");
  }
  if (!(cfg.lr_peak > 0.0) || cfg.lr_floor < 0.0 || cfg.warmup_frac < 0.0 ||
      cfg.warmup_frac >= 1.0 || cfg.weight_decay < 0.0) {
    throw std::invalid_argument("il config rates invalid");
  }
}

Var il_loss_tape(Tape& t, TapeParams& p, const IlBatch& batch,
                 const NoiseSchedule& sched, const DenoiserConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("empty IL batch");
  Var acc = t.constant_scalar(0.0);
  long total = 0;
  for (const IlItem& item : batch) {
    if (!item.cond) throw std::invalid_argument("IL item missing conditioning");
    const Mat x_t = forward_noise_to(item.x0, item.t, item.eps, sched);
    Var eps_hat = predict_noise_tape(t, p, x_t, *item.cond, item.t, cfg);
    Var diff = t.sub(eps_hat, t.constant(item.eps));
    acc = t.add(acc, t.sum_sq(diff));
    total += item.eps.size();
  }
  return t.scale(acc, 1.0 / static_cast<double>(total));
}

double il_loss(const ParamStore& params, const IlBatch& batch,
               const NoiseSchedule& sched, const DenoiserConfig& cfg) {
  Tape t;
  TapeParams p(t, params);
  return il_loss_tape(t, p, batch, sched, cfg).value()(0, 0);
}

TrainingSet::TrainingSet(const std::vector<Scene>& scenes,
                         const PlannerSetup& setup) {
  if (scenes.empty()) throw std::invalid_argument("empty training corpus");
  bundles_.reserve(scenes.size());
  experts_.reserve(scenes.size());
  forks_.reserve(scenes.size());
  for (const Scene& scene : scenes) {
    bundles_.push_back(make_bundle(scene, setup));
    if (scene.fork) {
      experts_.push_back({expert_action(scene, 1, setup),
                          expert_action(scene, -1, setup)});
      forks_.push_back(true);
    } else {
      experts_.push_back({expert_action(scene, 0, setup)});
      forks_.push_back(false);
    }
  }
}

const Mat& TrainingSet::expert(std::size_t i, int side) const {
  const std::vector<Mat>& variants = experts_[i];
  if (variants.size() == 1) return variants[0];
  return side >= 0 ? variants[0] : variants[1];
}

IlBatch TrainingSet::sample_batch(int batch_size, const NoiseSchedule& sched,
                                  RngStream& rng) const {
  IlBatch batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(size()) - 1));
    const int side = rng.uniform01() < 0.5 ? 1 : -1;
    IlItem item;
    item.x0 = expert(i, forks_[i] ? side : 0);
    item.cond = &bundles_[i];
    item.t = rng.uniform_int(1, sched.steps);
    Mat eps(item.x0.rows(), item.x0.cols());
    for (Eigen::Index r = 0; r < eps.rows(); ++r) {
      for (Eigen::Index c = 0; c < eps.cols(); ++c) eps(r, c) = rng.normal();
    }
    item.eps = std::move(eps);
    batch.push_back(std::move(item));
  }
  return batch;
}

IlResult train_il(ParamStore& params, const std::vector<Scene>& scenes,
                  const IlConfig& cfg, const PlannerSetup& setup) {
  validate(cfg);
  validate_setup(setup);
  const TrainingSet train_set(scenes, setup);

  AdamW opt(params, {.weight_decay = cfg.weight_decay});
  const int total_steps = cfg.epochs * cfg.steps_per_epoch;
  IlResult result;
  result.curve.reserve(static_cast<std::size_t>(total_steps));

  ParamStore last_good = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int k = 0; k < cfg.steps_per_epoch; ++k) {
      const int step = epoch * cfg.steps_per_epoch + k;
      RngStream rng = derive_stream(cfg.seed, "il.batch",
                                    static_cast<std::uint64_t>(step));
      const IlBatch batch =
          train_set.sample_batch(cfg.batch_size, setup.schedule, rng);
      GradStore grads(params);
      const double loss = gradient(
          params,
          [&](Tape& t, TapeParams& p) {
            return il_loss_tape(t, p, batch, setup.schedule, setup.denoiser);
          },
          grads);
      if (!std::isfinite(loss) || !grads.all_finite()) {
        params = last_good;
        result.diverged = true;
        return result;
      }
      const double lr = lr_schedule(step, total_steps, cfg.warmup_frac,
                                    cfg.lr_peak, cfg.lr_floor);
      opt.step(params, grads, lr);
      result.curve.push_back({step, loss, lr});
      epoch_loss += loss;
    }
    result.epoch_mean_loss.push_back(epoch_loss / cfg.steps_per_epoch);
    last_good = params;
  }
  return result;
}

}  // namespace dplan
