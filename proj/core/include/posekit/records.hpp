#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "posekit/losses.hpp"
#include "posekit/metrics.hpp"
#include "posekit/orientation.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

/// One person instance with whatever labels its dataset provides. Angles are
/// stored in degrees; poses in normalized coordinates. `mask` is derived
/// from the present fields on load and kept consistent by construction.
struct SampleRecord {
  std::string id;
  std::string dataset;
  std::optional<std::string> action;
  std::optional<BBox> bbox;
  std::optional<double> camera_distance_px;
  std::optional<double> bbox3d_diag_mm;
  std::optional<Pose2D> pose2d;
  std::optional<Pose3D> pose3d;
  std::optional<double> body_theta_deg;
  std::optional<double> body_phi_deg;
  std::optional<double> head_theta_deg;
  std::optional<double> head_phi_deg;
  /// True when the pose arrays carried explicit per-joint visibility flags.
  bool has_visibility_labels = false;

  LabelMask mask() const;
  StatsSample stats_sample() const;
};

/// Parse failure with the 1-based line number of the offending record.
class RecordParseError : public std::runtime_error {
 public:
  RecordParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// Stream records from a line-delimited file (one JSON object per line).
/// Blank lines are skipped. Throws RecordParseError with the line number on
/// malformed input and enforces mask/field consistency when an explicit
/// `mask` object is present.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(SampleRecord&&)>& fn);

std::vector<SampleRecord> read_records(const std::filesystem::path& path);

void write_records(const std::filesystem::path& path, std::span<const SampleRecord> records);

std::string record_to_line(const SampleRecord& record);
SampleRecord record_from_line(const std::string& line, int line_no = 0);

}  // namespace posekit
