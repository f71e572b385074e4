#include "posekit/losses.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace posekit {

namespace {

bool has_label(const LabelMask& m, LabelKind key) {
  switch (key) {
    case LabelKind::Pose2D: return m.has_pose2d;
    case LabelKind::Pose3D: return m.has_pose3d;
    case LabelKind::BodyPhi: return m.has_body_phi;
    case LabelKind::BodyTheta: return m.has_body_theta;
    case LabelKind::HeadPhi: return m.has_head_phi;
    case LabelKind::HeadTheta: return m.has_head_theta;
    case LabelKind::Visibility: return m.has_visibility;
  }
  return false;
}

void check_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": pred/target length mismatch");
  }
}

void check_unit(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
      throw std::invalid_argument(std::string(op) + ": values must be in [0, 1]");
    }
  }
}

}  // namespace

std::vector<std::size_t> select_samples(std::span<const LabelMask> batch, LabelKind key) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (has_label(batch[i], key)) {
      out.push_back(i);
    }
  }
  return out;
}

std::optional<LossTerm> masked_l1(std::span<const double> pred, std::span<const double> target,
                                  std::span<const std::size_t> selection) {
  check_lengths(pred.size(), target.size(), "masked_l1");
  if (selection.empty()) {
    return std::nullopt;
  }
  LossTerm term;
  term.grad.assign(pred.size(), 0.0);
  term.count = selection.size();
  const double inv_n = 1.0 / static_cast<double>(selection.size());
  for (std::size_t i : selection) {
    if (i >= pred.size()) {
      throw std::out_of_range("masked_l1: selection index out of range");
    }
    const double d = pred[i] - target[i];
    term.value += std::abs(d);
    term.grad[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
  }
  term.value *= inv_n;
  return term;
}

std::optional<LossTerm> masked_l1(std::span<const double> pred, std::span<const double> target) {
  std::vector<std::size_t> all(pred.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return masked_l1(pred, target, all);
}

std::optional<LossTerm> loss_phi(std::span<const double> pred, std::span<const double> target) {
  check_lengths(pred.size(), target.size(), "loss_phi");
  check_unit(pred, "loss_phi");
  check_unit(target, "loss_phi");
  if (pred.empty()) {
    return std::nullopt;
  }
  LossTerm term;
  term.grad.resize(pred.size());
  term.count = pred.size();
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double ad = std::abs(d);
    if (ad <= 0.5) {
      // direct branch; also chosen at the ad == 0.5 kink
      term.value += ad;
      term.grad[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    } else {
      term.value += 1.0 - ad;
      term.grad[i] = (d > 0.0 ? -1.0 : 1.0) * inv_n;
    }
  }
  term.value *= inv_n;
  return term;
}

std::optional<LossTerm> loss_theta(std::span<const double> pred, std::span<const double> target) {
  check_lengths(pred.size(), target.size(), "loss_theta");
  check_unit(pred, "loss_theta");
  check_unit(target, "loss_theta");
  if (pred.empty()) {
    return std::nullopt;
  }
  return masked_l1(pred, target);
}

std::optional<double> loss_orientation(std::optional<double> lphi, std::optional<double> ltheta) {
  if (lphi && ltheta) {
    return (*lphi + *ltheta) / 2.0;
  }
  if (lphi) {
    return *lphi;
  }
  if (ltheta) {
    return *ltheta;
  }
  return std::nullopt;
}

std::optional<LossTerm> bce_visibility(std::span<const double> pred_prob,
                                       std::span<const std::uint8_t> target) {
  check_lengths(pred_prob.size(), target.size(), "bce_visibility");
  if (pred_prob.empty()) {
    return std::nullopt;
  }
  LossTerm term;
  term.grad.resize(pred_prob.size());
  term.count = pred_prob.size();
  const double inv_n = 1.0 / static_cast<double>(pred_prob.size());
  for (std::size_t i = 0; i < pred_prob.size(); ++i) {
    if (!std::isfinite(pred_prob[i])) {
      throw std::invalid_argument("bce_visibility: non-finite probability");
    }
    const double p = std::clamp(pred_prob[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double t = target[i] ? 1.0 : 0.0;
    term.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    // zero gradient where the clamp is active
    if (pred_prob[i] > kBceEpsilon && pred_prob[i] < 1.0 - kBceEpsilon) {
      term.grad[i] = (p - t) / (p * (1.0 - p)) * inv_n;
    }
  }
  term.value *= inv_n;
  return term;
}

TotalLoss uncertainty_total(const LossBundle& bundle, const SigmaParams& sigmas) {
  const std::array<double, 4> losses = {bundle.l_p2d, bundle.l_p3d, bundle.l_o, bundle.l_conf};
  const std::array<std::size_t, 4> counts = {bundle.n_p2d, bundle.n_p3d, bundle.n_o,
                                             bundle.n_conf};

  TotalLoss out;
  double sigma_product = 1.0;
  bool any = false;
  for (int i = 0; i < 4; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (counts[idx] == 0) {
      continue;
    }
    if (!(losses[idx] >= 0.0) || !std::isfinite(losses[idx])) {
      throw std::invalid_argument("uncertainty_total: losses must be finite and non-negative");
    }
    any = true;
    out.included[idx] = true;
    const double s = sigmas.sigma(i);
    // the confidence term carries 1/s^2 where the others carry 1/(2 s^2)
    const double coeff = (i == 3) ? 1.0 / (s * s) : 1.0 / (2.0 * s * s);
    out.value += coeff * losses[idx];
    out.d_loss[idx] = coeff;
    out.d_u[idx] = -2.0 * coeff * losses[idx];
    sigma_product *= s;
  }
  if (!any) {
    throw std::invalid_argument("uncertainty_total: every task is excluded");
  }
  out.value += std::log1p(sigma_product);
  const double d_log = sigma_product / (1.0 + sigma_product);
  for (int i = 0; i < 4; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (out.included[idx]) {
      out.d_u[idx] += d_log;
    }
  }
  return out;
}

}  // namespace posekit
