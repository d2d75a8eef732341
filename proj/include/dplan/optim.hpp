#pragma once

#include "dplan/denoiser.hpp"

namespace dplan {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay. The learning rate is passed per step so
// schedules stay outside; lr = 0 leaves parameters bitwise unchanged.
class AdamW {
 public:
  AdamW(const ParamStore& shapes, AdamWConfig cfg);
  void step(ParamStore& params, const GradStore& grads, double lr);
  int steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  GradStore m_;
  GradStore v_;
  int t_ = 0;
};

// Linear warmup to `peak`, then cosine decay to `floor` over the remaining
// steps. `step` is 0-based; total must be >= 1.
double lr_schedule(int step, int total, double warmup_frac, double peak,
                   double floor);

}  // namespace dplan
