#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "posekit/demo.hpp"
#include "posekit/gradcheck.hpp"
#include "posekit/losses.hpp"
#include "posekit/metrics.hpp"
#include "posekit/orientation.hpp"
#include "posekit/records.hpp"
#include "posekit/skeleton.hpp"

namespace {

namespace fs = std::filesystem;
using namespace posekit;

// documented exit codes
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNumeric = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path) {
  if (!fs::exists(path) || !fs::is_regular_file(path)) {
    throw IoError("no such file: " + path.string());
  }
}

std::vector<SampleRecord> load_records(const fs::path& path) {
  require_file(path);
  try {
    return read_records(path);
  } catch (const RecordParseError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Pair pred and gt records by id; both files must cover the same id set.
std::vector<std::pair<const SampleRecord*, const SampleRecord*>> match_by_id(
    const std::vector<SampleRecord>& pred, const std::vector<SampleRecord>& gt) {
  std::unordered_map<std::string, const SampleRecord*> pred_index;
  for (const SampleRecord& r : pred) {
    if (!pred_index.emplace(r.id, &r).second) {
      throw SchemaError("duplicate id in prediction file: " + r.id);
    }
  }
  std::vector<std::pair<const SampleRecord*, const SampleRecord*>> pairs;
  pairs.reserve(gt.size());
  for (const SampleRecord& g : gt) {
    const auto it = pred_index.find(g.id);
    if (it == pred_index.end()) {
      throw SchemaError("id missing from prediction file: " + g.id);
    }
    pairs.emplace_back(it->second, &g);
  }
  if (pred.size() != gt.size()) {
    throw SchemaError("prediction file has ids not present in the ground truth file");
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int run_stats(const fs::path& records_path) {
  const auto records = load_records(records_path);
  if (records.empty()) {
    throw SchemaError("record file is empty: " + records_path.string());
  }
  std::map<std::string, std::vector<StatsSample>> by_dataset;
  for (const SampleRecord& r : records) {
    by_dataset[r.dataset].push_back(r.stats_sample());
  }
  std::map<std::string, DatasetStats> stats;
  for (const auto& [name, samples] : by_dataset) {
    stats.emplace(name, dataset_stats(samples));
  }

  std::cout << std::left << std::setw(16) << "";
  for (const auto& [name, s] : stats) {
    std::cout << std::setw(14) << name;
  }
  std::cout << '\n';

  auto row = [&](const std::string& label,
                 const std::function<std::optional<double>(const DatasetStats&)>& getter) {
    std::cout << std::left << std::setw(16) << label;
    for (const auto& [name, s] : stats) {
      std::ostringstream cell;
      if (const auto v = getter(s)) {
        cell << std::fixed << std::setprecision(1) << *v;
      }
      std::cout << std::setw(14) << cell.str();
    }
    std::cout << '\n';
  };

  row("n", [](const DatasetStats& s) {
    return std::optional<double>(static_cast<double>(s.n));
  });
  struct FieldRow {
    const char* label;
    const std::optional<FieldStats> DatasetStats::* field;
  };
  const FieldRow fields[] = {{"b2d [px]", &DatasetStats::b2d_px},
                             {"b3d [mm]", &DatasetStats::b3d_mm},
                             {"d [px]", &DatasetStats::dist_px}};
  for (const FieldRow& f : fields) {
    auto pick = [&f](double (*proj)(const FieldStats&)) {
      return [field = f.field, proj](const DatasetStats& s) -> std::optional<double> {
        const auto& fv = s.*field;
        if (!fv) return std::nullopt;
        return proj(*fv);
      };
    };
    row(std::string(f.label) + " mean", pick([](const FieldStats& v) { return v.mean; }));
    row(std::string(f.label) + " std", pick([](const FieldStats& v) { return v.stddev; }));
    row(std::string(f.label) + " min", pick([](const FieldStats& v) { return v.min; }));
    row(std::string(f.label) + " max", pick([](const FieldStats& v) { return v.max; }));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-pose
// ---------------------------------------------------------------------------

int run_eval_pose(const fs::path& pred_path, const fs::path& gt_path, bool flip_test,
                  const std::optional<fs::path>& pred_flipped_path,
                  const std::optional<fs::path>& skeleton_path, bool by_action,
                  double half_range_mm) {
  const auto pred_records = load_records(pred_path);
  const auto gt_records = load_records(gt_path);
  const auto pairs = match_by_id(pred_records, gt_records);

  std::optional<SkeletonDef> skeleton;
  if (skeleton_path) {
    require_file(*skeleton_path);
    try {
      skeleton = load_skeleton(*skeleton_path);
    } catch (const std::exception& e) {
      throw SchemaError(e.what());
    }
  }

  std::unordered_map<std::string, const SampleRecord*> flipped_index;
  std::vector<SampleRecord> flipped_records;
  if (flip_test) {
    if (!pred_flipped_path) {
      throw SchemaError("--flip-test needs --pred-flipped (predictions on mirrored inputs)");
    }
    if (!skeleton) {
      throw SchemaError("--flip-test needs --skeleton for the left/right pairing");
    }
    flipped_records = load_records(*pred_flipped_path);
    for (const SampleRecord& r : flipped_records) {
      flipped_index.emplace(r.id, &r);
    }
  }

  std::vector<Pose3D> pred;
  std::vector<Pose3D> gt;
  std::vector<std::string> actions;
  for (const auto& [p, g] : pairs) {
    if (!p->pose3d || !g->pose3d) {
      throw SchemaError("record " + g->id + " lacks a pose3d field");
    }
    Pose3D pose = *p->pose3d;
    if (flip_test) {
      const auto it = flipped_index.find(g->id);
      if (it == flipped_index.end() || !it->second->pose3d) {
        throw SchemaError("mirrored prediction missing for id " + g->id);
      }
      try {
        pose = flip_average(pose, *it->second->pose3d, *skeleton);
      } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
      }
    }
    pred.push_back(std::move(pose));
    gt.push_back(*g->pose3d);
    if (by_action) {
      if (!g->action) {
        throw SchemaError("record " + g->id + " lacks an action tag (needed by --by-action)");
      }
      actions.push_back(*g->action);
    }
  }

  double overall = 0.0;
  try {
    overall = mpjpe(pred, gt, half_range_mm);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  if (!std::isfinite(overall)) {
    throw NumericError("MPJPE is not finite");
  }
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "samples: " << pred.size() << '\n';
  std::cout << "mpjpe_mm: " << overall << '\n';
  if (by_action) {
    const ActionBreakdown breakdown = mpjpe_by_action(pred, gt, actions, half_range_mm);
    for (const auto& [action, value] : breakdown.per_action) {
      std::cout << "  " << std::left << std::setw(16) << action << value << '\n';
    }
    for (const std::string& skipped : breakdown.skipped) {
      std::cerr << "warning: action group '" << skipped << "' had no valid samples\n";
    }
    std::cout << "mpjpe_action_avg: " << breakdown.average << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-orient
// ---------------------------------------------------------------------------

int run_eval_orient(const fs::path& pred_path, const fs::path& gt_path,
                    const std::string& target, const std::string& angle) {
  const auto pred_records = load_records(pred_path);
  const auto gt_records = load_records(gt_path);
  const auto pairs = match_by_id(pred_records, gt_records);

  const bool body = target == "body";
  const bool phi = angle == "phi";
  auto pick = [&](const SampleRecord& r) -> const std::optional<double>& {
    if (body) {
      return phi ? r.body_phi_deg : r.body_theta_deg;
    }
    return phi ? r.head_phi_deg : r.head_theta_deg;
  };

  std::vector<double> preds;
  std::vector<double> gts;
  for (const auto& [p, g] : pairs) {
    const auto& gt_angle = pick(*g);
    if (!gt_angle) {
      continue;  // the ground truth defines the evaluation set
    }
    const auto& pred_angle = pick(*p);
    if (!pred_angle) {
      throw SchemaError("record " + g->id + " lacks the predicted " + target + " " + angle);
    }
    preds.push_back(*pred_angle);
    gts.push_back(*gt_angle);
  }
  if (preds.empty()) {
    throw SchemaError("no ground-truth records carry " + target + " " + angle);
  }

  const AngleKind kind = phi ? AngleKind::Azimuthal : AngleKind::Polar;
  const OrientationMetrics m = orientation_report(preds, gts, kind);
  if (!std::isfinite(m.mae_deg)) {
    throw NumericError("MAE is not finite");
  }
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "samples: " << m.count << '\n';
  std::cout << "acc_22.5: " << m.acc_22_5 << '\n';
  std::cout << "acc_45: " << m.acc_45 << '\n';
  std::cout << std::setprecision(3) << "mae_deg: " << m.mae_deg << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// hist
// ---------------------------------------------------------------------------

int run_hist(const fs::path& records_path, const std::string& target, std::size_t bins,
             const fs::path& out_path) {
  const auto records = load_records(records_path);
  std::vector<double> angles;
  for (const SampleRecord& r : records) {
    const auto& phi = target == "body" ? r.body_phi_deg : r.head_phi_deg;
    if (phi) {
      angles.push_back(*phi);
    }
  }
  const std::vector<std::size_t> counts = orientation_histogram(angles, bins);

  std::ofstream out(out_path);
  if (!out) {
    throw IoError("cannot open output file: " + out_path.string());
  }
  out << "bin_start_deg,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << (static_cast<double>(i) * 360.0 / static_cast<double>(bins)) << ',' << counts[i]
        << '\n';
  }
  std::cout << "histogrammed " << angles.size() << " " << target << " azimuths into " << bins
            << " bins -> " << out_path.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-demo / lr-find
// ---------------------------------------------------------------------------

DemoConfig load_demo_config(const std::optional<fs::path>& config_path) {
  if (!config_path) {
    return DemoConfig{};
  }
  const std::string text = read_text_file(*config_path);
  try {
    return demo_config_from_json_text(text);
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
}

int run_train_demo(const std::optional<fs::path>& config_path, const fs::path& out_dir) {
  const DemoConfig cfg = load_demo_config(config_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }

  const DemoReport report = train_demo(cfg);
  write_loss_curve_csv(out_dir / "loss_curve.csv", report.curve);
  write_run_report_json(out_dir / "report.json", report, "loss_curve.csv");

  std::cout << std::scientific << std::setprecision(3);
  std::cout << "steps: " << report.curve.size() << '\n';
  std::cout << "smoothed loss: " << report.initial_smoothed_loss << " -> "
            << report.final_smoothed_loss << '\n';
  if (report.diverged) {
    throw NumericError("training diverged (non-finite loss)");
  }
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "holdout mae_phi_deg: " << report.holdout.mae_phi_deg << '\n';
  std::cout << "holdout mae_theta_deg: " << report.holdout.mae_theta_deg << '\n';
  std::cout << "holdout mpjpe_norm: " << report.holdout.mpjpe_norm << '\n';
  std::cout << "holdout pose2d_mae: " << report.holdout.pose2d_mae << '\n';
  std::cout << "holdout visibility_accuracy: " << report.holdout.visibility_accuracy << '\n';
  std::cout << "report: " << (out_dir / "report.json").string() << '\n';
  return kExitOk;
}

int run_lr_find(const std::optional<fs::path>& config_path, double lr_lo, double lr_hi,
                std::size_t steps, const std::optional<fs::path>& out_path) {
  const DemoConfig cfg = load_demo_config(config_path);
  const LrRangeResult result = demo_lr_range_test(cfg, lr_lo, lr_hi, steps);

  if (out_path) {
    std::ofstream out(*out_path);
    if (!out) {
      throw IoError("cannot open output file: " + out_path->string());
    }
    out << "lr,loss,smoothed\n";
    out.precision(17);
    for (const LrProbe& p : result.curve) {
      out << p.lr << ',' << p.loss << ',' << p.smoothed << '\n';
    }
  }

  std::cout << "probes: " << result.steps_run
            << (result.diverged ? " (stopped: divergence)" : "") << '\n';
  if (!result.suggested_lr) {
    throw NumericError(result.status == LrSuggestionStatus::DivergedImmediately
                           ? "loss diverged immediately, no usable range"
                           : "no descending region in the loss curve");
  }
  std::cout << std::scientific << std::setprecision(3);
  std::cout << "suggested_lr: " << *result.suggested_lr << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int run_gradcheck(int trials, double eps) {
  constexpr double kTolerance = 1e-6;
  const auto entries = run_gradcheck_suite(trials, eps, kTolerance, /*seed=*/20241);
  bool all_pass = true;
  std::cout << std::left << std::setw(26) << "op" << std::setw(14) << "max_rel_err"
            << "status\n";
  for (const GradSuiteEntry& e : entries) {
    std::cout << std::left << std::setw(26) << e.name << std::scientific
              << std::setprecision(3) << std::setw(14) << e.max_rel_err
              << (e.pass ? "ok" : "FAIL") << '\n';
    all_pass = all_pass && e.pass;
  }
  if (!all_pass) {
    throw NumericError("gradient check failed (tolerance 1e-6)");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose / orientation decoding heads, multitask losses and evaluation metrics"};
  app.require_subcommand(1);

  // stats
  std::string stats_records;
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics table from a record file");
  stats_cmd->add_option("records", stats_records, "record file (one JSON object per line)")
      ->required();

  // eval-pose
  std::string ep_pred, ep_gt;
  std::string ep_pred_flipped, ep_skeleton;
  bool ep_flip_test = false;
  bool ep_by_action = false;
  double ep_half_range = kDefaultHalfRangeMm;
  auto* ep_cmd = app.add_subcommand("eval-pose", "MPJPE report for 3D pose predictions");
  ep_cmd->add_option("--pred", ep_pred, "prediction record file")->required();
  ep_cmd->add_option("--gt", ep_gt, "ground truth record file")->required();
  ep_cmd->add_flag("--flip-test", ep_flip_test, "average with un-mirrored flipped predictions");
  ep_cmd->add_option("--pred-flipped", ep_pred_flipped,
                     "predictions computed on mirrored inputs (required with --flip-test)");
  ep_cmd->add_option("--skeleton", ep_skeleton, "skeleton definition file");
  ep_cmd->add_flag("--by-action", ep_by_action, "per-action breakdown and unweighted average");
  ep_cmd->add_option("--half-range-mm", ep_half_range, "half range of the normalized cube [mm]");

  // eval-orient
  std::string eo_pred, eo_gt, eo_target, eo_angle;
  auto* eo_cmd = app.add_subcommand("eval-orient", "orientation accuracy and MAE report");
  eo_cmd->add_option("--pred", eo_pred, "prediction record file")->required();
  eo_cmd->add_option("--gt", eo_gt, "ground truth record file")->required();
  eo_cmd->add_option("--target", eo_target, "body or head")
      ->required()
      ->check(CLI::IsMember({"body", "head"}));
  eo_cmd->add_option("--angle", eo_angle, "phi or theta")
      ->required()
      ->check(CLI::IsMember({"phi", "theta"}));

  // hist
  std::string hist_records, hist_target = "body", hist_out;
  std::size_t hist_bins = 36;
  auto* hist_cmd = app.add_subcommand("hist", "azimuth histogram CSV over [0, 360)");
  hist_cmd->add_option("records", hist_records, "record file")->required();
  hist_cmd->add_option("--target", hist_target, "body or head")
      ->check(CLI::IsMember({"body", "head"}));
  hist_cmd->add_option("--bins", hist_bins, "number of bins")->check(CLI::PositiveNumber);
  hist_cmd->add_option("--out", hist_out, "output CSV path")->required();

  // train-demo
  std::string td_config, td_out;
  auto* td_cmd = app.add_subcommand("train-demo", "synthetic end-to-end training demo");
  td_cmd->add_option("--config", td_config, "demo config JSON (defaults when omitted)");
  td_cmd->add_option("--out", td_out, "output directory for report.json and loss_curve.csv")
      ->required();

  // lr-find
  std::string lf_config, lf_out;
  double lf_lo = 1e-6;
  double lf_hi = 1.0;
  std::size_t lf_steps = 100;
  auto* lf_cmd = app.add_subcommand("lr-find", "learning rate range test on the demo problem");
  lf_cmd->add_option("--config", lf_config, "demo config JSON (defaults when omitted)");
  lf_cmd->add_option("--lo", lf_lo, "sweep start learning rate");
  lf_cmd->add_option("--hi", lf_hi, "sweep end learning rate");
  lf_cmd->add_option("--steps", lf_steps, "sweep steps");
  lf_cmd->add_option("--out", lf_out, "write the sweep curve CSV here");

  // gradcheck
  int gc_trials = 100;
  double gc_eps = 1e-5;
  auto* gc_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  gc_cmd->add_option("--trials", gc_trials, "random trials per op")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--eps", gc_eps, "finite difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (stats_cmd->parsed()) {
      return run_stats(stats_records);
    }
    if (ep_cmd->parsed()) {
      return run_eval_pose(
          ep_pred, ep_gt, ep_flip_test,
          ep_pred_flipped.empty() ? std::nullopt : std::optional<fs::path>(ep_pred_flipped),
          ep_skeleton.empty() ? std::nullopt : std::optional<fs::path>(ep_skeleton),
          ep_by_action, ep_half_range);
    }
    if (eo_cmd->parsed()) {
      return run_eval_orient(eo_pred, eo_gt, eo_target, eo_angle);
    }
    if (hist_cmd->parsed()) {
      return run_hist(hist_records, hist_target, hist_bins, hist_out);
    }
    if (td_cmd->parsed()) {
      return run_train_demo(
          td_config.empty() ? std::nullopt : std::optional<fs::path>(td_config), td_out);
    }
    if (lf_cmd->parsed()) {
      return run_lr_find(lf_config.empty() ? std::nullopt : std::optional<fs::path>(lf_config),
                         lf_lo, lf_hi, lf_steps,
                         lf_out.empty() ? std::nullopt : std::optional<fs::path>(lf_out));
    }
    if (gc_cmd->parsed()) {
      return run_gradcheck(gc_trials, gc_eps);
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const RecordParseError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
