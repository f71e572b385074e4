#include "posekit/records.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace posekit {

using nlohmann::json;

LabelMask SampleRecord::mask() const {
  LabelMask m;
  m.has_pose2d = pose2d.has_value();
  m.has_pose3d = pose3d.has_value();
  m.has_body_phi = body_phi_deg.has_value();
  m.has_body_theta = body_theta_deg.has_value();
  m.has_head_phi = head_phi_deg.has_value();
  m.has_head_theta = head_theta_deg.has_value();
  m.has_visibility = has_visibility_labels;
  return m;
}

StatsSample SampleRecord::stats_sample() const {
  StatsSample s;
  if (bbox) {
    s.b2d_px = bbox->diagonal();
  }
  s.b3d_mm = bbox3d_diag_mm;
  s.dist_px = camera_distance_px;
  return s;
}

namespace {

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw RecordParseError(line_no, msg);
}

double get_number(const json& j, const char* field, int line_no) {
  if (!j.is_number()) {
    fail(line_no, std::string(field) + ": expected a number");
  }
  return j.get<double>();
}

// Pose entries are [x, y(, z), score, vis]; score and vis are optional but
// every entry of one pose must have the same arity. Records whose entries
// carry the vis column are the ones with visibility supervision.
template <typename PoseT, std::size_t Dims>
PoseT parse_pose(const json& arr, int line_no, const char* field, bool& saw_visibility) {
  if (!arr.is_array()) {
    fail(line_no, std::string(field) + ": expected an array of joint entries");
  }
  PoseT pose;
  std::size_t arity = 0;
  for (const json& entry : arr) {
    if (!entry.is_array() || entry.size() < Dims || entry.size() > Dims + 2) {
      fail(line_no, std::string(field) + ": joint entry must have " + std::to_string(Dims) +
                        " coordinates plus optional score and vis");
    }
    if (arity == 0) {
      arity = entry.size();
    } else if (entry.size() != arity) {
      fail(line_no, std::string(field) + ": mixed joint entry arity");
    }
    std::array<double, Dims> c{};
    for (std::size_t d = 0; d < Dims; ++d) {
      c[d] = get_number(entry[d], field, line_no);
      if (!std::isfinite(c[d])) {
        fail(line_no, std::string(field) + ": non-finite coordinate");
      }
    }
    if constexpr (Dims == 2) {
      pose.coords.push_back({c[0], c[1]});
    } else {
      pose.coords.push_back({c[0], c[1], c[2]});
    }
    pose.score.push_back(entry.size() > Dims ? get_number(entry[Dims], field, line_no) : 1.0);
    pose.visible.push_back(entry.size() > Dims + 1
                               ? (get_number(entry[Dims + 1], field, line_no) != 0.0 ? 1 : 0)
                               : 1);
  }
  if (pose.coords.empty()) {
    fail(line_no, std::string(field) + ": empty pose");
  }
  if (arity == Dims + 2) {
    saw_visibility = true;
  }
  return pose;
}

json pose2d_to_json(const Pose2D& p, bool with_visibility) {
  json arr = json::array();
  for (std::size_t j = 0; j < p.size(); ++j) {
    json e = {p.coords[j].x, p.coords[j].y, p.score[j]};
    if (with_visibility) {
      e.push_back(p.visible[j] ? 1 : 0);
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

json pose3d_to_json(const Pose3D& p, bool with_visibility) {
  json arr = json::array();
  for (std::size_t j = 0; j < p.size(); ++j) {
    json e = {p.coords[j].x, p.coords[j].y, p.coords[j].z, p.score[j]};
    if (with_visibility) {
      e.push_back(p.visible[j] ? 1 : 0);
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

std::optional<double> parse_angle(const json& obj, const char* key, int line_no, bool polar) {
  if (!obj.contains(key)) {
    return std::nullopt;
  }
  const double v = get_number(obj.at(key), key, line_no);
  if (polar && (v < 0.0 || v > 180.0)) {
    fail(line_no, std::string(key) + ": polar angle out of [0, 180]");
  }
  if (!polar && !std::isfinite(v)) {
    fail(line_no, std::string(key) + ": non-finite azimuth");
  }
  return polar ? v : wrap_degrees(v);
}

void check_mask_consistency(const json& mask_obj, const LabelMask& derived, int line_no) {
  const std::pair<const char*, bool> fields[] = {
      {"pose2d", derived.has_pose2d},       {"pose3d", derived.has_pose3d},
      {"body_phi", derived.has_body_phi},   {"body_theta", derived.has_body_theta},
      {"head_phi", derived.has_head_phi},   {"head_theta", derived.has_head_theta},
      {"visibility", derived.has_visibility}};
  for (const auto& [key, actual] : fields) {
    if (!mask_obj.contains(key)) {
      continue;
    }
    if (!mask_obj.at(key).is_boolean()) {
      fail(line_no, std::string("mask.") + key + ": expected a boolean");
    }
    if (mask_obj.at(key).get<bool>() != actual) {
      fail(line_no, std::string("mask.") + key + " contradicts the present fields");
    }
  }
}

}  // namespace

SampleRecord record_from_line(const std::string& line, int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    fail(line_no, "record must be a JSON object");
  }

  SampleRecord r;
  if (!j.contains("id") || !j.at("id").is_string()) {
    fail(line_no, "missing string field 'id'");
  }
  r.id = j.at("id").get<std::string>();
  if (!j.contains("dataset") || !j.at("dataset").is_string()) {
    fail(line_no, "missing string field 'dataset'");
  }
  r.dataset = j.at("dataset").get<std::string>();
  if (j.contains("action")) {
    if (!j.at("action").is_string()) {
      fail(line_no, "action: expected a string");
    }
    r.action = j.at("action").get<std::string>();
  }
  if (j.contains("bbox")) {
    const json& b = j.at("bbox");
    if (!b.is_object() || !b.contains("x") || !b.contains("y") || !b.contains("w") ||
        !b.contains("h")) {
      fail(line_no, "bbox: expected an object with x, y, w, h");
    }
    try {
      r.bbox = BBox(get_number(b.at("x"), "bbox.x", line_no),
                    get_number(b.at("y"), "bbox.y", line_no),
                    get_number(b.at("w"), "bbox.w", line_no),
                    get_number(b.at("h"), "bbox.h", line_no));
    } catch (const std::invalid_argument& e) {
      fail(line_no, e.what());
    }
  }
  if (j.contains("dist_px")) {
    r.camera_distance_px = get_number(j.at("dist_px"), "dist_px", line_no);
  }
  if (j.contains("b3d_mm")) {
    r.bbox3d_diag_mm = get_number(j.at("b3d_mm"), "b3d_mm", line_no);
  }
  if (j.contains("pose2d")) {
    r.pose2d = parse_pose<Pose2D, 2>(j.at("pose2d"), line_no, "pose2d", r.has_visibility_labels);
  }
  if (j.contains("pose3d")) {
    r.pose3d = parse_pose<Pose3D, 3>(j.at("pose3d"), line_no, "pose3d", r.has_visibility_labels);
  }
  for (const char* target : {"body", "head"}) {
    if (!j.contains(target)) {
      continue;
    }
    const json& o = j.at(target);
    if (!o.is_object()) {
      fail(line_no, std::string(target) + ": expected an object");
    }
    try {
      auto theta = parse_angle(o, "theta_deg", line_no, /*polar=*/true);
      auto phi = parse_angle(o, "phi_deg", line_no, /*polar=*/false);
      if (std::string(target) == "body") {
        r.body_theta_deg = theta;
        r.body_phi_deg = phi;
      } else {
        r.head_theta_deg = theta;
        r.head_phi_deg = phi;
      }
    } catch (const std::invalid_argument& e) {
      fail(line_no, e.what());
    }
  }
  if (j.contains("mask")) {
    if (!j.at("mask").is_object()) {
      fail(line_no, "mask: expected an object");
    }
    check_mask_consistency(j.at("mask"), r.mask(), line_no);
  }
  return r;
}

std::string record_to_line(const SampleRecord& record) {
  json j;
  j["id"] = record.id;
  j["dataset"] = record.dataset;
  if (record.action) {
    j["action"] = *record.action;
  }
  if (record.bbox) {
    j["bbox"] = {{"x", record.bbox->x},
                 {"y", record.bbox->y},
                 {"w", record.bbox->w},
                 {"h", record.bbox->h}};
  }
  if (record.camera_distance_px) {
    j["dist_px"] = *record.camera_distance_px;
  }
  if (record.bbox3d_diag_mm) {
    j["b3d_mm"] = *record.bbox3d_diag_mm;
  }
  if (record.pose2d) {
    j["pose2d"] = pose2d_to_json(*record.pose2d, record.has_visibility_labels);
  }
  if (record.pose3d) {
    j["pose3d"] = pose3d_to_json(*record.pose3d, record.has_visibility_labels);
  }
  auto angles = [&](const std::optional<double>& theta, const std::optional<double>& phi)
      -> std::optional<json> {
    if (!theta && !phi) {
      return std::nullopt;
    }
    json o = json::object();
    if (theta) o["theta_deg"] = *theta;
    if (phi) o["phi_deg"] = *phi;
    return o;
  };
  if (auto body = angles(record.body_theta_deg, record.body_phi_deg)) {
    j["body"] = *body;
  }
  if (auto head = angles(record.head_theta_deg, record.head_phi_deg)) {
    j["head"] = *head;
  }
  return j.dump();
}

void for_each_record(const std::filesystem::path& path,
                     const std::function<void(SampleRecord&&)>& fn) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open record file: " + path.string());
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      continue;
    }
    fn(record_from_line(line, line_no));
  }
}

std::vector<SampleRecord> read_records(const std::filesystem::path& path) {
  std::vector<SampleRecord> out;
  for_each_record(path, [&](SampleRecord&& r) { out.push_back(std::move(r)); });
  return out;
}

void write_records(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open record file for writing: " + path.string());
  }
  for (const SampleRecord& r : records) {
    out << record_to_line(r) << '\n';
  }
}

}  // namespace posekit
