#pragma once

#include <cstdint>
#include <vector>

#include "dplan/pipeline.hpp"

namespace dplan {

struct IlConfig {
  int epochs = 40;
  int steps_per_epoch = 50;
  int batch_size = 64;
  double lr_peak = 1e-3;
  double lr_floor = 1e-6;
  double warmup_frac = 0.05;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
};

void validate(const IlConfig& cfg);

// One training sample: a normalized expert action, its scene conditioning,
// a uniformly drawn timestep and the Gaussian noise to predict.
struct IlItem {
  Mat x0;
  const ConditioningBundle* cond = nullptr;
  int t = 1;
  Mat eps;
};
using IlBatch = std::vector<IlItem>;

// Mean over samples, waypoints and components of
// (eps - predict_noise(x_t, t, cond))^2 with x_t from the closed-form
// forward jump.
double il_loss(const ParamStore& params, const IlBatch& batch,
               const NoiseSchedule& sched, const DenoiserConfig& cfg);
Var il_loss_tape(Tape& t, TapeParams& p, const IlBatch& batch,
                 const NoiseSchedule& sched, const DenoiserConfig& cfg);

// Precomputed per-scene conditioning bundles and expert actions.
class TrainingSet {
 public:
  TrainingSet(const std::vector<Scene>& scenes, const PlannerSetup& setup);
  std::size_t size() const { return bundles_.size(); }
  const ConditioningBundle& bundle(std::size_t i) const { return bundles_[i]; }
  // side +1/-1 picks a fork detour; non-fork scenes ignore it.
  const Mat& expert(std::size_t i, int side) const;
  bool is_fork(std::size_t i) const { return forks_[i]; }

  // Scene index, fork side, timestep and noise drawn from the stream.
  IlBatch sample_batch(int batch_size, const NoiseSchedule& sched,
                       RngStream& rng) const;

 private:
  std::vector<ConditioningBundle> bundles_;
  std::vector<std::vector<Mat>> experts_;  // [i] -> {center} or {left, right}
  std::vector<bool> forks_;
};

struct IlCurveRow {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct IlResult {
  std::vector<IlCurveRow> curve;
  std::vector<double> epoch_mean_loss;
  bool diverged = false;
};

// Mini-batch AdamW on the noise-prediction loss; deterministic given
// cfg.seed. On a non-finite loss the last epoch-boundary parameters are
// restored and the run is flagged diverged.
IlResult train_il(ParamStore& params, const std::vector<Scene>& scenes,
                  const IlConfig& cfg, const PlannerSetup& setup);

}  // namespace dplan
