#include "posekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace posekit {

namespace {

// Mean distance over joints scored on both sides; nullopt when none are.
std::optional<double> sample_mpjpe_mm(const Pose3D& pred, const Pose3D& gt,
                                      double half_range_mm) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("mpjpe: pred/gt skeleton size mismatch");
  }
  const std::vector<Vec3> pred_mm = denormalize_pose3d(pred, half_range_mm);
  const std::vector<Vec3> gt_mm = denormalize_pose3d(gt, half_range_mm);
  double sum = 0.0;
  std::size_t joints = 0;
  for (std::size_t j = 0; j < pred_mm.size(); ++j) {
    if (pred.score[j] <= 0.0 || gt.score[j] <= 0.0) {
      continue;
    }
    const double dx = pred_mm[j].x - gt_mm[j].x;
    const double dy = pred_mm[j].y - gt_mm[j].y;
    const double dz = pred_mm[j].z - gt_mm[j].z;
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
    ++joints;
  }
  if (joints == 0) {
    return std::nullopt;
  }
  return sum / static_cast<double>(joints);
}

void check_angles(std::span<const double> preds, std::span<const double> gts, const char* op) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument(std::string(op) + ": pred/gt length mismatch");
  }
  if (preds.empty()) {
    throw std::invalid_argument(std::string(op) + ": empty input");
  }
}

double angle_error_deg(double pred, double gt, AngleKind kind) {
  if (kind == AngleKind::Azimuthal) {
    return circular_distance_deg(pred, gt);
  }
  if (!std::isfinite(pred) || !std::isfinite(gt)) {
    throw std::invalid_argument("orientation metric: non-finite angle");
  }
  return std::abs(pred - gt);
}

}  // namespace

double mpjpe(std::span<const Pose3D> pred, std::span<const Pose3D> gt, double half_range_mm) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("mpjpe: pred/gt sample count mismatch");
  }
  if (pred.empty()) {
    throw std::invalid_argument("mpjpe: empty input");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto sample = sample_mpjpe_mm(pred[i], gt[i], half_range_mm);
    if (!sample) {
      throw std::invalid_argument("mpjpe: sample " + std::to_string(i) + " has no common joints");
    }
    sum += *sample;
  }
  return sum / static_cast<double>(pred.size());
}

ActionBreakdown mpjpe_by_action(std::span<const Pose3D> pred, std::span<const Pose3D> gt,
                                std::span<const std::string> actions, double half_range_mm) {
  if (pred.size() != gt.size() || pred.size() != actions.size()) {
    throw std::invalid_argument("mpjpe_by_action: input length mismatch");
  }
  if (pred.empty()) {
    throw std::invalid_argument("mpjpe_by_action: empty input");
  }
  struct Group {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (actions[i].empty()) {
      throw std::invalid_argument("mpjpe_by_action: record " + std::to_string(i) +
                                  " has no action tag");
    }
    const auto sample = sample_mpjpe_mm(pred[i], gt[i], half_range_mm);
    auto& g = groups[actions[i]];
    if (sample) {
      g.sum += *sample;
      ++g.n;
    }
  }

  ActionBreakdown out;
  double total = 0.0;
  for (const auto& [action, g] : groups) {
    if (g.n == 0) {
      out.skipped.push_back(action);
      continue;
    }
    const double mean = g.sum / static_cast<double>(g.n);
    out.per_action.emplace_back(action, mean);
    total += mean;
  }
  if (out.per_action.empty()) {
    throw std::invalid_argument("mpjpe_by_action: every action group is empty");
  }
  out.average = total / static_cast<double>(out.per_action.size());
  return out;
}

namespace {

template <typename PoseT>
PoseT flip_average_impl(const PoseT& pred, const PoseT& flipped, const SkeletonDef& def) {
  if (pred.size() != flipped.size()) {
    throw std::invalid_argument("flip_average: skeleton mismatch");
  }
  const PoseT unflipped = flip_pose(flipped, def);
  PoseT out = pred;
  for (std::size_t j = 0; j < out.coords.size(); ++j) {
    out.coords[j].x = (pred.coords[j].x + unflipped.coords[j].x) / 2.0;
    out.coords[j].y = (pred.coords[j].y + unflipped.coords[j].y) / 2.0;
    if constexpr (requires { out.coords[j].z; }) {
      out.coords[j].z = (pred.coords[j].z + unflipped.coords[j].z) / 2.0;
    }
    out.score[j] = (pred.score[j] + unflipped.score[j]) / 2.0;
  }
  return out;
}

}  // namespace

Pose2D flip_average(const Pose2D& pred, const Pose2D& pred_flipped_input,
                    const SkeletonDef& def) {
  return flip_average_impl(pred, pred_flipped_input, def);
}
Pose3D flip_average(const Pose3D& pred, const Pose3D& pred_flipped_input,
                    const SkeletonDef& def) {
  return flip_average_impl(pred, pred_flipped_input, def);
}

double orientation_accuracy(std::span<const double> preds_deg, std::span<const double> gts_deg,
                            double threshold_deg, AngleKind kind) {
  check_angles(preds_deg, gts_deg, "orientation_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds_deg.size(); ++i) {
    if (angle_error_deg(preds_deg[i], gts_deg[i], kind) <= threshold_deg) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(preds_deg.size());
}

double orientation_mae(std::span<const double> preds_deg, std::span<const double> gts_deg,
                       AngleKind kind) {
  check_angles(preds_deg, gts_deg, "orientation_mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds_deg.size(); ++i) {
    sum += angle_error_deg(preds_deg[i], gts_deg[i], kind);
  }
  return sum / static_cast<double>(preds_deg.size());
}

OrientationMetrics orientation_report(std::span<const double> preds_deg,
                                      std::span<const double> gts_deg, AngleKind kind) {
  OrientationMetrics m;
  m.acc_22_5 = orientation_accuracy(preds_deg, gts_deg, 22.5, kind);
  m.acc_45 = orientation_accuracy(preds_deg, gts_deg, 45.0, kind);
  m.mae_deg = orientation_mae(preds_deg, gts_deg, kind);
  m.count = preds_deg.size();
  return m;
}

void RunningStats::add(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("RunningStats: non-finite value");
  }
  if (n_ == 0) {
    min_ = max_ = value;
  } else {
    min_ = std::min(min_, value);
    max_ = std::max(max_, value);
  }
  ++n_;
  const double delta = value - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (value - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n_ == 0) {
    return;
  }
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double total = na + nb;
  mean_ += delta * nb / total;
  m2_ += other.m2_ + delta * delta * na * nb / total;
  min_ = std::min(min_, other.min_);
  max_ = std::max(max_, other.max_);
  n_ += other.n_;
}

double RunningStats::mean() const {
  if (n_ == 0) {
    throw std::logic_error("RunningStats: empty");
  }
  return mean_;
}

double RunningStats::stddev() const {
  if (n_ == 0) {
    throw std::logic_error("RunningStats: empty");
  }
  return std::sqrt(m2_ / static_cast<double>(n_));
}

double RunningStats::min() const {
  if (n_ == 0) {
    throw std::logic_error("RunningStats: empty");
  }
  return min_;
}

double RunningStats::max() const {
  if (n_ == 0) {
    throw std::logic_error("RunningStats: empty");
  }
  return max_;
}

namespace {

std::optional<FieldStats> to_field_stats(const RunningStats& rs) {
  if (rs.count() == 0) {
    return std::nullopt;
  }
  return FieldStats{rs.count(), rs.mean(), rs.stddev(), rs.min(), rs.max()};
}

}  // namespace

DatasetStats dataset_stats(std::span<const StatsSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("dataset_stats: empty record set");
  }
  RunningStats b2d;
  RunningStats b3d;
  RunningStats dist;
  for (const StatsSample& s : samples) {
    if (s.b2d_px) b2d.add(*s.b2d_px);
    if (s.b3d_mm) b3d.add(*s.b3d_mm);
    if (s.dist_px) dist.add(*s.dist_px);
  }
  DatasetStats out;
  out.n = samples.size();
  out.b2d_px = to_field_stats(b2d);
  out.b3d_mm = to_field_stats(b3d);
  out.dist_px = to_field_stats(dist);
  return out;
}

std::vector<std::size_t> orientation_histogram(std::span<const double> angles_deg,
                                               std::size_t n_bins) {
  if (n_bins < 1) {
    throw std::invalid_argument("orientation_histogram: need at least one bin");
  }
  std::vector<std::size_t> counts(n_bins, 0);
  for (double a : angles_deg) {
    const double wrapped = wrap_degrees(a);
    auto idx = static_cast<std::size_t>(wrapped * static_cast<double>(n_bins) / 360.0);
    if (idx >= n_bins) {
      idx = n_bins - 1;
    }
    ++counts[idx];
  }
  return counts;
}

}  // namespace posekit
