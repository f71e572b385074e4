#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace posekit {

/// One probe of the exponential learning-rate sweep.
struct LrProbe {
  double lr = 0.0;
  double loss = 0.0;
  double smoothed = 0.0;
};

enum class LrSuggestionStatus {
  Ok,
  NoDescent,           // smoothed loss never went down
  DivergedImmediately, // loss blew past the divergence bound before any descent
};

struct LrRangeResult {
  std::vector<LrProbe> curve;
  std::optional<double> suggested_lr;
  LrSuggestionStatus status = LrSuggestionStatus::Ok;
  bool diverged = false;
  std::size_t steps_run = 0;
};

/// Smoothing factor of the bias-corrected EMA applied to the raw losses.
inline constexpr double kLrFinderEmaFactor = 0.98;
/// The sweep stops once the smoothed loss exceeds this multiple of the best
/// smoothed loss seen so far.
inline constexpr double kLrFinderDivergenceFactor = 4.0;

/// Pick the learning rate at the steepest negative slope of a smoothed loss
/// curve. Returns nullopt when no negative slope exists.
std::optional<double> suggest_from_curve(std::span<const double> lrs,
                                         std::span<const double> smoothed_losses);

/// Exponential sweep from lr_lo to lr_hi over `steps` training steps.
/// `train_step(lr)` must run one optimization step at that rate and return
/// the batch loss. Requires lr_lo < lr_hi and steps >= 10.
LrRangeResult lr_range_test(const std::function<double(double)>& train_step, double lr_lo,
                            double lr_hi, std::size_t steps);

}  // namespace posekit
