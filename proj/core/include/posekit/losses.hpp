#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace posekit {

/// Per-sample supervision availability. Datasets carry heterogeneous labels,
/// so every task loss runs a selection step over these flags first.
struct LabelMask {
  bool has_pose2d = false;
  bool has_pose3d = false;
  bool has_body_phi = false;
  bool has_body_theta = false;
  bool has_head_phi = false;
  bool has_head_theta = false;
  bool has_visibility = false;
};

enum class LabelKind {
  Pose2D,
  Pose3D,
  BodyPhi,
  BodyTheta,
  HeadPhi,
  HeadTheta,
  Visibility,
};

/// Indices of samples whose mask carries the requested label, in batch order.
std::vector<std::size_t> select_samples(std::span<const LabelMask> batch, LabelKind key);

/// One evaluated task loss: value, gradient w.r.t. the predictions, and the
/// number of contributing entries. Functions below return std::nullopt when
/// nothing was selected -- "no contribution" is a distinct signal, never a
/// silent zero, so the uncertainty weighting can drop the term entirely.
struct LossTerm {
  double value = 0.0;
  std::vector<double> grad;
  std::size_t count = 0;
};

/// Mean absolute error over the selected entries of pred/target.
std::optional<LossTerm> masked_l1(std::span<const double> pred, std::span<const double> target,
                                  std::span<const std::size_t> selection);
std::optional<LossTerm> masked_l1(std::span<const double> pred, std::span<const double> target);

/// Mean circular L1 for unit azimuths: min(1 - |p-t|, |p-t|) per entry.
/// At the |p-t| = 0.5 kink the non-wrapped branch's subgradient is used.
std::optional<LossTerm> loss_phi(std::span<const double> pred, std::span<const double> target);

/// Mean L1 for unit polar angles; no wraparound.
std::optional<LossTerm> loss_theta(std::span<const double> pred, std::span<const double> target);

/// Orientation loss: mean of the available components. With only phi
/// labeled the phi loss passes through unchanged. Both absent -> nullopt.
std::optional<double> loss_orientation(std::optional<double> lphi, std::optional<double> ltheta);

/// Mean binary cross-entropy over per-joint visibility probabilities.
/// Probabilities are clamped to [kBceEpsilon, 1 - kBceEpsilon].
inline constexpr double kBceEpsilon = 1e-7;
std::optional<LossTerm> bce_visibility(std::span<const double> pred_prob,
                                       std::span<const std::uint8_t> target);

/// The four task losses with their contributing counts. A count of zero
/// means the task is excluded from the total, which is different from a
/// zero-valued loss (an included zero still keeps its sigma in the product).
struct LossBundle {
  double l_p2d = 0.0;
  double l_p3d = 0.0;
  double l_o = 0.0;
  double l_conf = 0.0;
  std::size_t n_p2d = 0;
  std::size_t n_p3d = 0;
  std::size_t n_o = 0;
  std::size_t n_conf = 0;
};

/// Learnable per-task scale parameters. Stored as unconstrained u with
/// sigma_i = exp(u_i), so positivity holds by construction.
struct SigmaParams {
  std::array<double, 4> u{0.0, 0.0, 0.0, 0.0};

  double sigma(int i) const { return std::exp(u[static_cast<std::size_t>(i)]); }
};

/// Uncertainty-weighted total over the included tasks:
///   L = L_p2d/(2 s1^2) + L_p3d/(2 s2^2) + L_o/(2 s3^2) + L_conf/s4^2
///       + ln(1 + prod s_i)
/// The confidence term carries 1/s4^2, not 1/(2 s4^2). Excluded tasks drop
/// both their weighted term and their sigma from the product. d_loss[i] and
/// d_u[i] are zero for excluded tasks.
struct TotalLoss {
  double value = 0.0;
  std::array<double, 4> d_loss{};
  std::array<double, 4> d_u{};
  std::array<bool, 4> included{};
};

TotalLoss uncertainty_total(const LossBundle& bundle, const SigmaParams& sigmas);

}  // namespace posekit
