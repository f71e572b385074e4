#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace posekit {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay: the decay p *= (1 - lr * wd) is applied
/// independently of the bias-corrected adaptive step, so a zero gradient
/// still decays the parameter and leaves the moments untouched.
class AdamW {
 public:
  explicit AdamW(std::size_t parameter_count, AdamWConfig cfg = {});

  void step(std::span<double> params, std::span<const double> grads);

  void set_learning_rate(double lr) { cfg_.lr = lr; }
  double learning_rate() const { return cfg_.lr; }
  std::size_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t step_ = 0;
};

/// 1cycle learning-rate schedule with cosine segments: warmup from
/// max_lr/div_factor up to max_lr over pct_start of the run, then anneal
/// down to max_lr/(div_factor*final_div_factor). Endpoint values are exact.
struct OneCycleSchedule {
  std::size_t total_steps = 0;
  double max_lr = 4e-3;
  double div_factor = 25.0;
  double final_div_factor = 100.0;
  double pct_start = 0.3;

  double initial_lr() const { return max_lr / div_factor; }
  double final_lr() const { return max_lr / (div_factor * final_div_factor); }
  std::size_t peak_step() const;
  double lr_at(std::size_t step) const;  // throws when step > total_steps
  void validate() const;
};

}  // namespace posekit
