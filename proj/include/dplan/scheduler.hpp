#pragma once

#include <functional>
#include <vector>

#include "dplan/rng.hpp"
#include "dplan/tape.hpp"

namespace dplan {

// DDPM-style schedule in the sigma parameterization: the forward kernel is
// x_t = sqrt(1 - sigma_t^2) * x_{t-1} + sigma_t * eps, so alpha_t = 1 -
// sigma_t^2 and alpha_bar_t is their running product.
struct NoiseSchedule {
  int steps = 0;                    // T
  double sigma_min = 0.0;
  std::vector<double> sigmas;       // sigma_1..sigma_T
  std::vector<double> alpha_bars;   // alpha_bar_0..alpha_bar_T

  double sigma(int t) const;        // t in 1..T
  double alpha_bar(int t) const;    // t in 0..T
};

// Squared-cosine alpha_bar profile with s = 0.008; per-step sigmas are floored
// at sigma_min (and capped just below 1 where the raw profile collapses), then
// alpha_bar is recomputed from the adjusted sigmas so the schedule stays
// self-consistent.
NoiseSchedule build_cosine_schedule(int steps, double sigma_min);

struct ClipConfig {
  double x0_clip = 1.0;
  double noise_clip = 3.0;
};

// Single forward kernel application.
Mat forward_noise_step(const Mat& x_prev, double sigma_t, const Mat& eps);

// Closed-form jump to step t: x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
Mat forward_noise_to(const Mat& x0, int t, const Mat& eps,
                     const NoiseSchedule& sched);

struct ReverseStepResult {
  Mat x_prev;
  Mat mean;
  double sigma_used = 0.0;
};

// One denoising move from alpha_bar_t down to alpha_bar_next:
//   x0_hat = clamp((x_t - sqrt(1-ab_t) eps_hat) / sqrt(ab_t), +-x0_clip)
//   eps'   = (x_t - sqrt(ab_t) x0_hat) / sqrt(1-ab_t)
//   sigma  = max(posterior sigma for the ab_t -> ab_next stride, sigma_floor)
//   mean   = sqrt(ab_next) x0_hat + sqrt(max(1-ab_next-sigma^2, 0)) eps'
//   x_prev = mean + sigma * clamp(z, +-noise_clip), no noise on the final move.
ReverseStepResult reverse_step_between(const Mat& x_t, const Mat& eps_hat,
                                       double alpha_bar_t,
                                       double alpha_bar_next,
                                       double sigma_floor, const Mat& z,
                                       bool final_step,
                                       const ClipConfig& clip = {});

// Full-schedule step t -> t-1; the final step (t=1) adds no noise.
ReverseStepResult reverse_step(const Mat& x_t, const Mat& eps_hat, int t,
                               const Mat& z, const NoiseSchedule& sched,
                               const ClipConfig& clip = {});

// Posterior std of the stride from alpha_bar_t down to alpha_bar_next.
double stride_sigma(double alpha_bar_t, double alpha_bar_next);

// Recorded denoising chain: states x_T..x_0 plus per-step Gaussian means and
// stds, enough to re-evaluate the chain density under any parameters.
struct DiffusionChain {
  std::vector<int> timesteps;            // descending
  std::vector<Mat> states;               // timesteps.size() + 1 entries
  std::vector<Mat> means;
  std::vector<double> step_sigmas;       // floored sigma actually used
  std::vector<double> step_alpha_bars;   // alpha_bar at each timestep
  std::vector<double> next_alpha_bars;   // alpha_bar at the move target
};

void validate_chain(const DiffusionChain& chain);

// Evenly strided descending timesteps, e.g. (100, 5) -> 100,80,60,40,20.
std::vector<int> strided_timesteps(int total, int count);

using NoisePredictor = std::function<Mat(const Mat& x_t, int t)>;

// Sample a chain from x_T ~ N(0, I) (clamped) through the given timesteps,
// flooring every step sigma at sampling_sigma_min and recording every state,
// mean and sigma. Deterministic given the rng stream.
DiffusionChain sample_chain(const NoisePredictor& predict, int n_waypoints,
                            const NoiseSchedule& sched,
                            const std::vector<int>& steps,
                            double sampling_sigma_min, RngStream& rng,
                            const ClipConfig& clip = {});

}  // namespace dplan
