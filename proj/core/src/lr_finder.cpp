#include "posekit/lr_finder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace posekit {

std::optional<double> suggest_from_curve(std::span<const double> lrs,
                                         std::span<const double> smoothed_losses) {
  if (lrs.size() != smoothed_losses.size()) {
    throw std::invalid_argument("suggest_from_curve: length mismatch");
  }
  if (lrs.size() < 2) {
    return std::nullopt;
  }
  double best_slope = 0.0;
  std::size_t best_index = 0;
  bool found = false;
  for (std::size_t i = 0; i + 1 < lrs.size(); ++i) {
    const double slope = smoothed_losses[i + 1] - smoothed_losses[i];
    if (slope < best_slope) {
      best_slope = slope;
      best_index = i;
      found = true;
    }
  }
  if (!found) {
    return std::nullopt;
  }
  return lrs[best_index];
}

LrRangeResult lr_range_test(const std::function<double(double)>& train_step, double lr_lo,
                            double lr_hi, std::size_t steps) {
  if (!(lr_lo > 0.0) || !(lr_lo < lr_hi)) {
    throw std::invalid_argument("lr_range_test: need 0 < lr_lo < lr_hi");
  }
  if (steps < 10) {
    throw std::invalid_argument("lr_range_test: need at least 10 steps");
  }

  LrRangeResult result;
  result.curve.reserve(steps);
  const double ratio = lr_hi / lr_lo;
  double ema = 0.0;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const double lr = lr_lo * std::pow(ratio, t);
    const double loss = train_step(lr);
    ++result.steps_run;

    if (!std::isfinite(loss)) {
      result.diverged = true;
      break;
    }
    ema = kLrFinderEmaFactor * ema + (1.0 - kLrFinderEmaFactor) * loss;
    const double smoothed = ema / (1.0 - std::pow(kLrFinderEmaFactor, static_cast<double>(i + 1)));
    result.curve.push_back({lr, loss, smoothed});

    if (smoothed < best) {
      best = smoothed;
    } else if (smoothed > kLrFinderDivergenceFactor * best) {
      result.diverged = true;
      break;
    }
  }

  std::vector<double> lrs;
  std::vector<double> smoothed;
  lrs.reserve(result.curve.size());
  smoothed.reserve(result.curve.size());
  for (const LrProbe& p : result.curve) {
    lrs.push_back(p.lr);
    smoothed.push_back(p.smoothed);
  }
  result.suggested_lr = suggest_from_curve(lrs, smoothed);
  if (!result.suggested_lr) {
    result.status = result.diverged && result.curve.size() < 3
                        ? LrSuggestionStatus::DivergedImmediately
                        : LrSuggestionStatus::NoDescent;
  }
  return result;
}

}  // namespace posekit
