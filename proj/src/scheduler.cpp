#include "dplan/scheduler.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dplan {

namespace {
constexpr double kCosineOffset = 0.008;
constexpr double kSigmaCap = 0.999;
}  // namespace

double NoiseSchedule::sigma(int t) const {
  if (t < 1 || t > steps) throw std::invalid_argument("sigma(t): t out of range");
  return sigmas[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps) {
    throw std::invalid_argument("alpha_bar(t): t out of range");
  }
  return alpha_bars[static_cast<std::size_t>(t)];
}

NoiseSchedule build_cosine_schedule(int steps, double sigma_min) {
  if (steps < 1) throw std::invalid_argument("schedule needs steps >= 1");
  if (!(sigma_min > 0.0) || sigma_min >= 1.0) {
    throw std::invalid_argument("sigma_min must lie in (0, 1)");
  }

  auto f = [steps](int t) {
    const double u = (static_cast<double>(t) / steps + kCosineOffset) /
                     (1.0 + kCosineOffset);
    const double c = std::cos(u * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0);

  NoiseSchedule sched;
  sched.steps = steps;
  sched.sigma_min = sigma_min;
  sched.sigmas.reserve(static_cast<std::size_t>(steps));
  double prev_raw = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double raw = f(t) / f0;
    double s = std::sqrt(std::max(1.0 - raw / prev_raw, 0.0));
    s = std::min(std::max(s, sigma_min), kSigmaCap);
    sched.sigmas.push_back(s);
    prev_raw = raw;
  }
  sched.alpha_bars.reserve(static_cast<std::size_t>(steps) + 1);
  sched.alpha_bars.push_back(1.0);
  for (double s : sched.sigmas) {
    sched.alpha_bars.push_back(sched.alpha_bars.back() * (1.0 - s * s));
  }
  return sched;
}

Mat forward_noise_step(const Mat& x_prev, double sigma_t, const Mat& eps) {
  if (!(sigma_t > 0.0) || sigma_t >= 1.0) {
    throw std::invalid_argument("sigma_t must lie in (0, 1)");
  }
  if (x_prev.rows() != eps.rows() || x_prev.cols() != eps.cols()) {
    throw std::invalid_argument("forward_noise_step shape mismatch");
  }
  return std::sqrt(1.0 - sigma_t * sigma_t) * x_prev + sigma_t * eps;
}

Mat forward_noise_to(const Mat& x0, int t, const Mat& eps,
                     const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps) {
    throw std::invalid_argument("forward_noise_to: t out of range");
  }
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw std::invalid_argument("forward_noise_to shape mismatch");
  }
  const double ab = sched.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

double stride_sigma(double alpha_bar_t, double alpha_bar_next) {
  const double var = (1.0 - alpha_bar_next) / (1.0 - alpha_bar_t) *
                     (1.0 - alpha_bar_t / alpha_bar_next);
  return std::sqrt(std::max(var, 0.0));
}

ReverseStepResult reverse_step_between(const Mat& x_t, const Mat& eps_hat,
                                       double alpha_bar_t,
                                       double alpha_bar_next,
                                       double sigma_floor, const Mat& z,
                                       bool final_step,
                                       const ClipConfig& clip) {
  if (!eps_hat.allFinite()) {
    throw std::runtime_error("reverse step received non-finite noise "
                             "prediction (diverged network)");
  }
  if (x_t.rows() != eps_hat.rows() || x_t.cols() != eps_hat.cols()) {
    throw std::invalid_argument("reverse step shape mismatch");
  }
  if (!(alpha_bar_t > 0.0) || alpha_bar_t >= 1.0 ||
      alpha_bar_next <= alpha_bar_t || alpha_bar_next > 1.0) {
    throw std::invalid_argument("reverse step alpha_bar ordering invalid");
  }

  const double sqrt_ab = std::sqrt(alpha_bar_t);
  const double sqrt_1mab = std::sqrt(1.0 - alpha_bar_t);
  Mat x0_hat = ((x_t - sqrt_1mab * eps_hat) / sqrt_ab)
                   .cwiseMax(-clip.x0_clip)
                   .cwiseMin(clip.x0_clip);
  Mat eps_c = (x_t - sqrt_ab * x0_hat) / sqrt_1mab;

  ReverseStepResult out;
  out.sigma_used = std::max(stride_sigma(alpha_bar_t, alpha_bar_next),
                            sigma_floor);
  const double dir = std::sqrt(
      std::max(1.0 - alpha_bar_next - out.sigma_used * out.sigma_used, 0.0));
  out.mean = std::sqrt(alpha_bar_next) * x0_hat + dir * eps_c;
  if (final_step) {
    out.x_prev = out.mean;
  } else {
    if (z.rows() != x_t.rows() || z.cols() != x_t.cols()) {
      throw std::invalid_argument("reverse step z shape mismatch");
    }
    out.x_prev = out.mean + out.sigma_used * z.cwiseMax(-clip.noise_clip)
                                                .cwiseMin(clip.noise_clip);
  }
  return out;
}

ReverseStepResult reverse_step(const Mat& x_t, const Mat& eps_hat, int t,
                               const Mat& z, const NoiseSchedule& sched,
                               const ClipConfig& clip) {
  if (t < 1 || t > sched.steps) {
    throw std::invalid_argument("reverse_step: t out of range");
  }
  return reverse_step_between(x_t, eps_hat, sched.alpha_bar(t),
                              sched.alpha_bar(t - 1), sched.sigma_min, z,
                              /*final_step=*/t == 1, clip);
}

void validate_chain(const DiffusionChain& chain) {
  const std::size_t n = chain.timesteps.size();
  if (n == 0) throw std::invalid_argument("chain has no steps");
  if (chain.states.size() != n + 1 || chain.means.size() != n ||
      chain.step_sigmas.size() != n || chain.step_alpha_bars.size() != n ||
      chain.next_alpha_bars.size() != n) {
    throw std::invalid_argument("chain field lengths inconsistent");
  }
  for (const Mat& s : chain.states) {
    if (!s.allFinite()) throw std::invalid_argument("chain state non-finite");
  }
}

std::vector<int> strided_timesteps(int total, int count) {
  if (total < 1 || count < 1 || count > total) {
    throw std::invalid_argument("invalid stride request");
  }
  // Evenly spaced from T down to 1 inclusive, so the chain always ends with
  // the fine denoising moves.
  std::vector<int> steps;
  steps.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    steps.push_back(total);
    return steps;
  }
  const double spacing =
      static_cast<double>(total - 1) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) {
    int t = static_cast<int>(std::lround(total - spacing * i));
    t = std::clamp(t, 1, total);
    if (!steps.empty() && t >= steps.back()) t = steps.back() - 1;
    if (t < 1) throw std::invalid_argument("stride collapsed below t=1");
    steps.push_back(t);
  }
  return steps;
}

DiffusionChain sample_chain(const NoisePredictor& predict, int n_waypoints,
                            const NoiseSchedule& sched,
                            const std::vector<int>& steps,
                            double sampling_sigma_min, RngStream& rng,
                            const ClipConfig& clip) {
  if (steps.empty()) throw std::invalid_argument("steps list is empty");
  if (sampling_sigma_min < sched.sigma_min) {
    throw std::invalid_argument(
        "sampling_sigma_min must be >= the schedule floor");
  }
  int prev = sched.steps + 1;
  for (int t : steps) {
    if (t < 1 || t > sched.steps || t >= prev) {
      throw std::invalid_argument("steps must be a descending subset of 1..T");
    }
    prev = t;
  }

  auto draw = [&](Eigen::Index rows) {
    Mat m(rows, 3);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < 3; ++c) m(r, c) = rng.normal();
    }
    return m;
  };

  DiffusionChain chain;
  Mat x = draw(n_waypoints).cwiseMax(-clip.noise_clip).cwiseMin(clip.noise_clip);
  chain.states.push_back(x);

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const bool final_step = (i + 1 == steps.size());
    const int t_next = final_step ? 0 : steps[i + 1];
    Mat z = final_step ? Mat::Zero(n_waypoints, 3) : draw(n_waypoints);
    const Mat eps_hat = predict(x, t);
    ReverseStepResult step = reverse_step_between(
        x, eps_hat, sched.alpha_bar(t), sched.alpha_bar(t_next),
        sampling_sigma_min, z, final_step, clip);
    chain.timesteps.push_back(t);
    chain.means.push_back(step.mean);
    chain.step_sigmas.push_back(step.sigma_used);
    chain.step_alpha_bars.push_back(sched.alpha_bar(t));
    chain.next_alpha_bars.push_back(sched.alpha_bar(t_next));
    x = step.x_prev;
    chain.states.push_back(x);
  }
  validate_chain(chain);
  return chain;
}

}  // namespace dplan
