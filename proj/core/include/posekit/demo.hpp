#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posekit/lr_finder.hpp"

namespace posekit {

/// Synthetic end-to-end training setup: a small multilayer regressor maps
/// noisy linear embeddings of ground-truth labels back to those labels
/// through the differentiable heads (1D softargmax coordinate decoding, a
/// bilinearly sampled sigmoid depth map, 1D orientation heatmaps and a
/// sigmoid visibility head), trained with the uncertainty-weighted total
/// loss, AdamW and the 1cycle schedule.
struct DemoConfig {
  // model
  std::vector<int> hidden_sizes = {256};
  int feature_dim = 96;

  // task heads
  int joints = 5;
  int coord_bins = 16;
  int orient_bins = 36;
  int depth_map_size = 4;

  // data
  double noise_level = 0.005;
  double missing_label_fraction = 0.0;
  int batch_size = 48;
  int eval_samples = 256;

  // training
  int steps = 3000;
  std::uint64_t seed = 7;
  double max_lr = 4e-3;
  double div_factor = 25.0;
  double final_div_factor = 100.0;
  double pct_start = 0.3;
  double weight_decay = 1e-2;

  // staged-training switches: a disabled task contributes no loss term and
  // its sigma leaves the uncertainty product
  bool enable_p2d = true;
  bool enable_p3d = true;
  bool enable_orient = true;
  bool enable_conf = true;

  void validate() const;
};

DemoConfig demo_config_from_json_text(const std::string& text);
std::string demo_config_to_json_text(const DemoConfig& cfg);

/// One row of the training curve. Task losses are absent when the task had
/// no contributing samples (or is disabled), never reported as zero.
struct CurvePoint {
  std::size_t step = 0;
  double lr = 0.0;
  double total = 0.0;
  std::optional<double> p2d;
  std::optional<double> p3d;
  std::optional<double> orient;
  std::optional<double> conf;
};

struct DemoMetrics {
  double mae_phi_deg = 0.0;    // circular, body+head pooled
  double mae_theta_deg = 0.0;  // absolute, body+head pooled
  double mpjpe_norm = 0.0;     // mean per-joint distance in normalized units
  double pose2d_mae = 0.0;
  double visibility_accuracy = 0.0;
};

struct DemoReport {
  DemoConfig config;
  bool diverged = false;
  double initial_smoothed_loss = 0.0;
  double final_smoothed_loss = 0.0;
  DemoMetrics holdout;
  std::array<double, 4> sigma{};
  double wall_seconds = 0.0;
  std::vector<CurvePoint> curve;
};

DemoReport train_demo(const DemoConfig& cfg);

/// LR range test over the same model, data stream and optimizer as the demo.
LrRangeResult demo_lr_range_test(const DemoConfig& cfg, double lr_lo, double lr_hi,
                                 std::size_t steps);

/// step,lr,loss_total,loss_p2d,loss_p3d,loss_o,loss_conf - absent task
/// losses become empty cells.
void write_loss_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);

/// Self-contained run report: config echo, held-out metrics, reference to
/// the loss curve file, seed and wall-clock time.
void write_run_report_json(const std::filesystem::path& path, const DemoReport& report,
                           const std::string& loss_curve_ref);

}  // namespace posekit
