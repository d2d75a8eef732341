#include "dplan/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dplan {

AdamW::AdamW(const ParamStore& shapes, AdamWConfig cfg)
    : cfg_(cfg), m_(shapes), v_(shapes) {}

void AdamW::step(ParamStore& params, const GradStore& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (const std::string& name : m_.names()) {
    Mat& p = params.at(name);
    const Mat& g = grads.at(name);
    Mat& m = m_.at(name);
    Mat& v = v_.at(name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    p -= lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
    p -= (lr * cfg_.weight_decay) * p;
  }
}

double lr_schedule(int step, int total, double warmup_frac, double peak,
                   double floor) {
  if (total < 1) throw std::invalid_argument("schedule needs total >= 1");
  const int warmup = static_cast<int>(warmup_frac * total);
  if (warmup > 0 && step < warmup) {
    return peak * static_cast<double>(step + 1) / warmup;
  }
  const int rest = std::max(1, total - warmup);
  const double u =
      std::min(1.0, static_cast<double>(step - warmup) / rest);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * u));
}

}  // namespace dplan
