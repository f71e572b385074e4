#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace posekit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Named joint set with left/right pairing, limb connectivity and the index
/// of the hip-center root joint. Joint names must be unique and all indices
/// in range; validate() enforces this.
struct SkeletonDef {
  std::vector<std::string> joints;
  std::vector<std::pair<int, int>> left_right_pairs;
  std::vector<std::pair<int, int>> limbs;
  int root_index = 0;

  int joint_count() const { return static_cast<int>(joints.size()); }
  int index_of(const std::string& name) const;  // -1 if absent
  void validate() const;
};

/// Per-joint confidence and visibility ride alongside the coordinates.
/// `score` is label confidence (0 marks an absent joint, e.g. after a
/// skeleton mapping); `visible` is the visibility attribute used as the
/// classification target, independent of presence.
struct Pose2D {
  std::vector<Vec2> coords;
  std::vector<double> score;
  std::vector<std::uint8_t> visible;

  std::size_t size() const { return coords.size(); }
};

struct Pose3D {
  std::vector<Vec3> coords;
  std::vector<double> score;
  std::vector<std::uint8_t> visible;

  std::size_t size() const { return coords.size(); }
};

/// Pixel-space bounding box; width and height must be positive.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  BBox() = default;
  BBox(double x_, double y_, double w_, double h_);

  double diagonal() const;
};

Pose2D make_pose2d(std::vector<Vec2> coords);
Pose3D make_pose3d(std::vector<Vec3> coords);

/// Result of mapping pixel points into bbox-normalized coordinates.
/// Points outside the box keep their out-of-range values and are flagged,
/// never clamped.
struct BBoxNormalized {
  std::vector<Vec2> coords;
  std::vector<std::uint8_t> out_of_box;

  std::size_t out_of_box_count() const;
};

BBoxNormalized bbox_normalize_2d(std::span<const Vec2> points_px, const BBox& box);

/// Hip-relative normalization of 3D joints given in millimeters:
/// v' = clamp((v - root) / (2 * half_range_mm) + 0.5, 0, 1) per axis.
/// The root joint always lands on (0.5, 0.5, 0.5). Axis values that had to
/// be clamped are counted in `clamped_axes`.
struct Pose3DNormalized {
  Pose3D pose;
  std::size_t clamped_axes = 0;
};

Pose3DNormalized normalize_pose3d(std::span<const Vec3> world_mm, int root_index,
                                  double half_range_mm);

/// Inverse of normalize_pose3d on non-clamped joints: hip-relative mm.
std::vector<Vec3> denormalize_pose3d(const Pose3D& pose, double half_range_mm);

/// Left/right mirror in normalized coordinates: x -> 1 - x on every joint,
/// then paired joints are swapped. y (and z) stay. Involution.
Pose2D flip_pose(const Pose2D& pose, const SkeletonDef& def);
Pose3D flip_pose(const Pose3D& pose, const SkeletonDef& def);

/// Result of re-expressing a pose over another skeleton. Joints are matched
/// by exact name; unmatched target joints are marked absent (score 0,
/// visible false) and `present[j]` is false. No interpolation.
template <typename PoseT>
struct MappedPose {
  PoseT pose;
  std::vector<std::uint8_t> present;
};

MappedPose<Pose2D> skeleton_map(const Pose2D& pose, const SkeletonDef& from,
                                const SkeletonDef& to);
MappedPose<Pose3D> skeleton_map(const Pose3D& pose, const SkeletonDef& from,
                                const SkeletonDef& to);

/// Per-target-joint source index (-1 when the target joint has no match).
std::vector<int> skeleton_joint_mapping(const SkeletonDef& from, const SkeletonDef& to);

/// Parse a skeleton definition file. Line-based format, `#` comments:
///   joint <name>
///   pair <left-name> <right-name>
///   limb <name-a> <name-b>
///   root <name>
SkeletonDef load_skeleton(const std::filesystem::path& path);

inline constexpr double kDefaultHalfRangeMm = 1000.0;

}  // namespace posekit
