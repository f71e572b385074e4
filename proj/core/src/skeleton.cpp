#include "posekit/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace posekit {

int SkeletonDef::index_of(const std::string& name) const {
  auto it = std::find(joints.begin(), joints.end(), name);
  return it == joints.end() ? -1 : static_cast<int>(it - joints.begin());
}

void SkeletonDef::validate() const {
  if (joints.empty()) {
    throw std::invalid_argument("SkeletonDef: no joints");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : joints) {
    if (!seen.insert(name).second) {
      throw std::invalid_argument("SkeletonDef: duplicate joint name '" + name + "'");
    }
  }
  const int n = joint_count();
  auto check_pair = [&](const std::pair<int, int>& p, const char* what) {
    if (p.first < 0 || p.first >= n || p.second < 0 || p.second >= n) {
      throw std::invalid_argument(std::string("SkeletonDef: ") + what + " index out of range");
    }
  };
  for (const auto& p : left_right_pairs) check_pair(p, "left/right pair");
  for (const auto& p : limbs) check_pair(p, "limb");
  if (root_index < 0 || root_index >= n) {
    throw std::invalid_argument("SkeletonDef: root index out of range");
  }
}

BBox::BBox(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("BBox: width and height must be positive");
  }
}

double BBox::diagonal() const { return std::hypot(w, h); }

Pose2D make_pose2d(std::vector<Vec2> coords) {
  Pose2D p;
  p.score.assign(coords.size(), 1.0);
  p.visible.assign(coords.size(), 1);
  p.coords = std::move(coords);
  return p;
}

Pose3D make_pose3d(std::vector<Vec3> coords) {
  Pose3D p;
  p.score.assign(coords.size(), 1.0);
  p.visible.assign(coords.size(), 1);
  p.coords = std::move(coords);
  return p;
}

std::size_t BBoxNormalized::out_of_box_count() const {
  return static_cast<std::size_t>(std::count(out_of_box.begin(), out_of_box.end(), 1));
}

BBoxNormalized bbox_normalize_2d(std::span<const Vec2> points_px, const BBox& box) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw std::invalid_argument("bbox_normalize_2d: degenerate bbox");
  }
  BBoxNormalized out;
  out.coords.reserve(points_px.size());
  out.out_of_box.reserve(points_px.size());
  for (const Vec2& p : points_px) {
    const double nx = (p.x - box.x) / box.w;
    const double ny = (p.y - box.y) / box.h;
    out.coords.push_back({nx, ny});
    const bool inside = nx >= 0.0 && nx <= 1.0 && ny >= 0.0 && ny <= 1.0;
    out.out_of_box.push_back(inside ? 0 : 1);
  }
  return out;
}

Pose3DNormalized normalize_pose3d(std::span<const Vec3> world_mm, int root_index,
                                  double half_range_mm) {
  if (root_index < 0 || root_index >= static_cast<int>(world_mm.size())) {
    throw std::invalid_argument("normalize_pose3d: root joint missing");
  }
  if (!(half_range_mm > 0.0)) {
    throw std::invalid_argument("normalize_pose3d: half_range_mm must be positive");
  }
  const Vec3 root = world_mm[static_cast<std::size_t>(root_index)];
  const double scale = 2.0 * half_range_mm;

  Pose3DNormalized out;
  std::vector<Vec3> coords;
  coords.reserve(world_mm.size());
  auto norm_axis = [&](double v, double r) {
    double u = (v - r) / scale + 0.5;
    if (u < 0.0) {
      u = 0.0;
      ++out.clamped_axes;
    } else if (u > 1.0) {
      u = 1.0;
      ++out.clamped_axes;
    }
    return u;
  };
  for (const Vec3& v : world_mm) {
    coords.push_back({norm_axis(v.x, root.x), norm_axis(v.y, root.y), norm_axis(v.z, root.z)});
  }
  out.pose = make_pose3d(std::move(coords));
  return out;
}

std::vector<Vec3> denormalize_pose3d(const Pose3D& pose, double half_range_mm) {
  const double scale = 2.0 * half_range_mm;
  std::vector<Vec3> mm;
  mm.reserve(pose.coords.size());
  for (const Vec3& v : pose.coords) {
    mm.push_back({(v.x - 0.5) * scale, (v.y - 0.5) * scale, (v.z - 0.5) * scale});
  }
  return mm;
}

namespace {

template <typename PoseT>
void check_conformance(const PoseT& pose, const SkeletonDef& def, const char* op) {
  if (pose.coords.size() != static_cast<std::size_t>(def.joint_count()) ||
      pose.score.size() != pose.coords.size() || pose.visible.size() != pose.coords.size()) {
    throw std::invalid_argument(std::string(op) + ": pose/skeleton length mismatch");
  }
}

template <typename PoseT>
PoseT flip_impl(const PoseT& pose, const SkeletonDef& def) {
  check_conformance(pose, def, "flip_pose");
  PoseT out = pose;
  for (auto& c : out.coords) {
    c.x = 1.0 - c.x;
  }
  for (const auto& [l, r] : def.left_right_pairs) {
    std::swap(out.coords[static_cast<std::size_t>(l)], out.coords[static_cast<std::size_t>(r)]);
    std::swap(out.score[static_cast<std::size_t>(l)], out.score[static_cast<std::size_t>(r)]);
    std::swap(out.visible[static_cast<std::size_t>(l)], out.visible[static_cast<std::size_t>(r)]);
  }
  return out;
}

template <typename PoseT>
MappedPose<PoseT> map_impl(const PoseT& pose, const SkeletonDef& from, const SkeletonDef& to) {
  check_conformance(pose, from, "skeleton_map");
  const std::vector<int> mapping = skeleton_joint_mapping(from, to);
  MappedPose<PoseT> out;
  const std::size_t n = static_cast<std::size_t>(to.joint_count());
  out.pose.coords.resize(n);
  out.pose.score.assign(n, 0.0);
  out.pose.visible.assign(n, 0);
  out.present.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const int src = mapping[j];
    if (src < 0) {
      continue;
    }
    out.pose.coords[j] = pose.coords[static_cast<std::size_t>(src)];
    out.pose.score[j] = pose.score[static_cast<std::size_t>(src)];
    out.pose.visible[j] = pose.visible[static_cast<std::size_t>(src)];
    out.present[j] = 1;
  }
  return out;
}

}  // namespace

Pose2D flip_pose(const Pose2D& pose, const SkeletonDef& def) { return flip_impl(pose, def); }
Pose3D flip_pose(const Pose3D& pose, const SkeletonDef& def) { return flip_impl(pose, def); }

std::vector<int> skeleton_joint_mapping(const SkeletonDef& from, const SkeletonDef& to) {
  std::vector<int> mapping(static_cast<std::size_t>(to.joint_count()), -1);
  for (int j = 0; j < to.joint_count(); ++j) {
    mapping[static_cast<std::size_t>(j)] = from.index_of(to.joints[static_cast<std::size_t>(j)]);
  }
  return mapping;
}

MappedPose<Pose2D> skeleton_map(const Pose2D& pose, const SkeletonDef& from,
                                const SkeletonDef& to) {
  return map_impl(pose, from, to);
}
MappedPose<Pose3D> skeleton_map(const Pose3D& pose, const SkeletonDef& from,
                                const SkeletonDef& to) {
  return map_impl(pose, from, to);
}

SkeletonDef load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_skeleton: cannot open " + path.string());
  }
  SkeletonDef def;
  std::string root_name;
  std::vector<std::pair<std::string, std::string>> pair_names;
  std::vector<std::pair<std::string, std::string>> limb_names;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream ss(line);
    std::string kw;
    if (!(ss >> kw)) {
      continue;
    }
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (kw == "joint") {
      std::string name;
      if (!(ss >> name)) fail("joint needs a name");
      def.joints.push_back(name);
    } else if (kw == "pair") {
      std::string a, b;
      if (!(ss >> a >> b)) fail("pair needs two joint names");
      pair_names.emplace_back(a, b);
    } else if (kw == "limb") {
      std::string a, b;
      if (!(ss >> a >> b)) fail("limb needs two joint names");
      limb_names.emplace_back(a, b);
    } else if (kw == "root") {
      if (!(ss >> root_name)) fail("root needs a joint name");
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }

  auto resolve = [&](const std::string& name) {
    const int idx = def.index_of(name);
    if (idx < 0) {
      throw std::runtime_error(path.string() + ": unknown joint '" + name + "'");
    }
    return idx;
  };
  for (const auto& [a, b] : pair_names) {
    def.left_right_pairs.emplace_back(resolve(a), resolve(b));
  }
  for (const auto& [a, b] : limb_names) {
    def.limbs.emplace_back(resolve(a), resolve(b));
  }
  if (root_name.empty()) {
    throw std::runtime_error(path.string() + ": missing 'root' entry");
  }
  def.root_index = resolve(root_name);
  def.validate();
  return def;
}

}  // namespace posekit
