#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "posekit/orientation.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

/// Mean per joint position error in millimeters. Both pose sets are
/// root-relative normalized coordinates; they are denormalized with
/// half_range_mm before distances are taken. A joint contributes when its
/// score is positive on both sides; each sample's mean over common joints
/// is averaged over samples.
double mpjpe(std::span<const Pose3D> pred, std::span<const Pose3D> gt, double half_range_mm);

/// Per-action MPJPE table. The overall average is the unweighted mean of
/// the per-action means, regardless of group sizes. Groups whose samples
/// admit no common joints are excluded and listed in `skipped`.
struct ActionBreakdown {
  std::vector<std::pair<std::string, double>> per_action;  // sorted by action name
  double average = 0.0;
  std::vector<std::string> skipped;
};

ActionBreakdown mpjpe_by_action(std::span<const Pose3D> pred, std::span<const Pose3D> gt,
                                std::span<const std::string> actions, double half_range_mm);

/// Test-time flip averaging: the second argument is the prediction made on
/// a mirrored input; it is un-mirrored with flip_pose and the coordinates
/// are averaged. Scores are averaged too; visibility comes from `pred`.
Pose2D flip_average(const Pose2D& pred, const Pose2D& pred_flipped_input, const SkeletonDef& def);
Pose3D flip_average(const Pose3D& pred, const Pose3D& pred_flipped_input, const SkeletonDef& def);

/// Fraction of predictions whose angular error is <= threshold_deg
/// (inclusive). Azimuthal errors are circular, polar errors absolute.
double orientation_accuracy(std::span<const double> preds_deg, std::span<const double> gts_deg,
                            double threshold_deg, AngleKind kind);

/// Mean angular error in degrees, circular for azimuths.
double orientation_mae(std::span<const double> preds_deg, std::span<const double> gts_deg,
                       AngleKind kind);

/// Acc(22.5) / Acc(45) / MAE block, the standard orientation report.
struct OrientationMetrics {
  double acc_22_5 = 0.0;
  double acc_45 = 0.0;
  double mae_deg = 0.0;
  std::size_t count = 0;
};

OrientationMetrics orientation_report(std::span<const double> preds_deg,
                                      std::span<const double> gts_deg, AngleKind kind);

/// Running mean/std/min/max with an associative merge, so record sets can
/// be partitioned and partials combined. Variance is the population
/// variance, accumulated with the pairwise-merge update.
class RunningStats {
 public:
  void add(double value);
  void merge(const RunningStats& other);

  std::size_t count() const { return n_; }
  double mean() const;
  double stddev() const;  // population
  double min() const;
  double max() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = 0.0;
  double max_ = 0.0;
};

struct FieldStats {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Raw per-record statistics inputs: 2D bbox diagonal in pixels, 3D bbox
/// diagonal in millimeters, camera distance in pixels. Absent fields stay
/// absent in the output, mirroring datasets that carry no 3D annotations.
struct StatsSample {
  std::optional<double> b2d_px;
  std::optional<double> b3d_mm;
  std::optional<double> dist_px;
};

struct DatasetStats {
  std::size_t n = 0;
  std::optional<FieldStats> b2d_px;
  std::optional<FieldStats> b3d_mm;
  std::optional<FieldStats> dist_px;
};

DatasetStats dataset_stats(std::span<const StatsSample> samples);

/// Histogram of azimuth angles over [0, 360): bin i covers
/// [i*360/n_bins, (i+1)*360/n_bins). Inputs are wrapped mod 360 first.
std::vector<std::size_t> orientation_histogram(std::span<const double> angles_deg,
                                               std::size_t n_bins);

/// Combined evaluation output as produced by the CLI commands.
struct MetricReport {
  std::optional<double> mpjpe_mm;
  std::vector<std::pair<std::string, double>> mpjpe_per_action;
  std::optional<double> mpjpe_action_avg;
  std::optional<OrientationMetrics> orientation;
  std::size_t pose_samples = 0;
};

}  // namespace posekit
