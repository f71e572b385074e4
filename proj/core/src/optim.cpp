#include "posekit/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace posekit {

AdamW::AdamW(std::size_t parameter_count, AdamWConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0) || !(cfg_.eps > 0.0) || cfg_.weight_decay < 0.0 ||
      !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
    throw std::invalid_argument("AdamW: invalid hyperparameters");
  }
  m_.assign(parameter_count, 0.0);
  v_.assign(parameter_count, 0.0);
}

void AdamW::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != m_.size()) {
    throw std::invalid_argument("AdamW::step: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw std::invalid_argument("AdamW::step: non-finite gradient");
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] = params[i] * decay - cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void OneCycleSchedule::validate() const {
  if (total_steps == 0) {
    throw std::invalid_argument("OneCycleSchedule: total_steps must be positive");
  }
  if (!(max_lr > 0.0)) {
    throw std::invalid_argument("OneCycleSchedule: max_lr must be positive");
  }
  if (!(pct_start > 0.0 && pct_start < 1.0)) {
    throw std::invalid_argument("OneCycleSchedule: pct_start must be in (0, 1)");
  }
  if (!(div_factor > 1.0) || !(final_div_factor > 1.0)) {
    throw std::invalid_argument("OneCycleSchedule: div factors must be > 1");
  }
}

std::size_t OneCycleSchedule::peak_step() const {
  auto peak = static_cast<std::size_t>(std::llround(pct_start * static_cast<double>(total_steps)));
  if (peak == 0) {
    peak = 1;
  }
  if (peak >= total_steps) {
    peak = total_steps - 1;
  }
  return peak;
}

double OneCycleSchedule::lr_at(std::size_t step) const {
  validate();
  if (step > total_steps) {
    throw std::out_of_range("OneCycleSchedule: step beyond total_steps");
  }
  const std::size_t peak = peak_step();
  // Convex-combination form: the cosine weight is exactly 1 and 0 at the
  // segment ends, so lr(0), lr(peak) and lr(total) hit their targets exactly.
  if (step <= peak) {
    const double progress = static_cast<double>(step) / static_cast<double>(peak);
    const double w = (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
    return initial_lr() * w + max_lr * (1.0 - w);
  }
  const double progress =
      static_cast<double>(step - peak) / static_cast<double>(total_steps - peak);
  const double w = (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
  return max_lr * w + final_lr() * (1.0 - w);
}

}  // namespace posekit
