#include "dqtrack/camera.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dqtrack/errors.hpp"

namespace dqtrack {

void CameraModel::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(fx)) throw ConfigError("camera.fx", "must be positive");
  if (!positive(fy)) throw ConfigError("camera.fy", "must be positive");
  if (!std::isfinite(cx)) throw ConfigError("camera.cx", "must be finite");
  if (!std::isfinite(cy)) throw ConfigError("camera.cy", "must be finite");
  if (!std::isfinite(pixel_sigma) || pixel_sigma < 0.0) {
    throw ConfigError("camera.pixel_sigma", "must be non-negative");
  }
  if (!positive(width)) throw ConfigError("camera.width", "must be positive");
  if (!positive(height)) throw ConfigError("camera.height", "must be positive");
  if (!positive(depth_tol)) throw ConfigError("camera.depth_tol", "must be positive");
}

Mat3 CameraModel::intrinsics() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Vec3 marker_position_camera(const DualPose& rel_pose, const Vec3& marker) {
  return transform_point(rel_pose, marker);
}

Vec3 unit_vector_measure(const DualPose& rel_pose, const Vec3& marker, double depth_tol) {
  const Vec3 r = marker_position_camera(rel_pose, marker);
  const double n = r.norm();
  if (!(n > depth_tol)) throw PositiveDepthError("marker range below depth tolerance");
  return r / n;
}

std::optional<Vec2> project_point(const CameraModel& cam, const Vec3& p) {
  if (!(p.z() > cam.depth_tol)) return std::nullopt;
  const Vec2 px(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
  if (cam.clip_to_image &&
      (px.x() < 0.0 || px.y() < 0.0 || px.x() > cam.width || px.y() > cam.height)) {
    return std::nullopt;
  }
  return px;
}

std::optional<Vec2> project(const CameraModel& cam, const DualPose& rel_pose, const Vec3& marker,
                            Rng* rng) {
  std::optional<Vec2> px = project_point(cam, marker_position_camera(rel_pose, marker));
  if (px && rng) *px += cam.pixel_sigma * Vec2(rng->normal(), rng->normal());
  return px;
}

Vec3 back_project(const CameraModel& cam, const Vec2& pixel) {
  return Vec3((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0).normalized();
}

OcclusionSchedule OcclusionSchedule::flyby_default() {
  return OcclusionSchedule({{0.0, 1.0, {0, 1, 2, 3}},
                            {1.0, 2.0, {0, 1, 2}},
                            {2.0, 3.0, {0, 1}},
                            {3.0, 4.0, {0, 1, 2}},
                            {4.0, 5.0, {0, 1, 2, 3}}});
}

OcclusionSchedule OcclusionSchedule::all_visible(double duration, int marker_count) {
  OcclusionSegment s{0.0, duration, {}};
  for (int i = 0; i < marker_count; ++i) s.visible.push_back(i);
  return OcclusionSchedule({s});
}

int OcclusionSchedule::segment_at(double t) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const OcclusionSegment& s = segments_[i];
    const bool last = i + 1 == segments_.size();
    if (t >= s.t_start && (t < s.t_end || (last && t <= s.t_end))) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> OcclusionSchedule::visible_at(double t) const {
  const int i = segment_at(t);
  return i < 0 ? std::vector<int>{} : segments_[i].visible;
}

void OcclusionSchedule::validate(double duration, int marker_count) const {
  if (segments_.empty()) throw ConfigError("schedule", "at least one segment required");
  const double tol = 1e-9;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const OcclusionSegment& s = segments_[i];
    const std::string path = "schedule[" + std::to_string(i) + "]";
    if (!std::isfinite(s.t_start) || !std::isfinite(s.t_end) || !(s.t_end > s.t_start)) {
      throw ConfigError(path + ".end", "segment must have end > start");
    }
    if (i == 0 && std::abs(s.t_start) > tol) {
      throw ConfigError(path + ".start", "schedule must start at 0");
    }
    if (i > 0) {
      const double prev = segments_[i - 1].t_end;
      if (s.t_start > prev + tol) throw ConfigError(path + ".start", "gap after previous segment");
      if (s.t_start < prev - tol) throw ConfigError(path + ".start", "overlaps previous segment");
    }
    for (std::size_t k = 0; k < s.visible.size(); ++k) {
      if (s.visible[k] < 0 || s.visible[k] >= marker_count) {
        throw ConfigError(path + ".visible[" + std::to_string(k) + "]", "unknown marker id");
      }
    }
  }
  if (segments_.back().t_end < duration - tol) {
    throw ConfigError("schedule[" + std::to_string(segments_.size() - 1) + "].end",
                      "schedule ends before the scenario duration");
  }
}

std::string to_string(MeasurementMode mode) {
  switch (mode) {
    case MeasurementMode::Pixels: return "pixels";
    case MeasurementMode::Positions: return "positions";
    case MeasurementMode::UnitVectors: return "unit_vectors";
  }
  return "pixels";
}

std::optional<MeasurementMode> parse_measurement_mode(const std::string& s) {
  if (s == "pixels") return MeasurementMode::Pixels;
  if (s == "positions") return MeasurementMode::Positions;
  if (s == "unit_vectors") return MeasurementMode::UnitVectors;
  return std::nullopt;
}

VecX MeasurementFrame::stacked() const {
  VecX y(dim() * static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) y.segment(dim() * i, dim()) = values[i];
  return y;
}

MeasurementFrame measure_frame(const CameraModel& cam, const DualPose& rel_pose,
                               std::span<const Vec3> markers, const OcclusionSchedule& schedule,
                               double t, Rng* rng, MeasurementMode mode) {
  MeasurementFrame f;
  f.t = t;
  f.mode = mode;
  std::vector<Vec2> noise(markers.size(), Vec2::Zero());
  if (mode == MeasurementMode::Pixels && rng) {
    for (Vec2& n : noise) n = cam.pixel_sigma * Vec2(rng->normal(), rng->normal());
  }
  std::vector<int> visible = schedule.visible_at(t);
  std::sort(visible.begin(), visible.end());
  for (int id : visible) {
    if (id < 0 || static_cast<std::size_t>(id) >= markers.size()) {
      throw std::out_of_range("schedule references an unknown marker id");
    }
    const Vec3 p = marker_position_camera(rel_pose, markers[id]);
    if (!(p.z() > cam.depth_tol)) continue;
    switch (mode) {
      case MeasurementMode::Pixels: {
        const std::optional<Vec2> px = project_point(cam, p);
        if (!px) continue;
        f.values.emplace_back(*px + noise[id]);
        break;
      }
      case MeasurementMode::Positions: f.values.emplace_back(p); break;
      case MeasurementMode::UnitVectors: f.values.emplace_back(p.normalized()); break;
    }
    f.ids.push_back(id);
  }
  return f;
}

void write_frames_csv(std::ostream& os, std::span<const MeasurementFrame> frames) {
  os << "t,marker_id,u,v\n" << std::setprecision(17);
  for (const MeasurementFrame& f : frames) {
    if (f.mode != MeasurementMode::Pixels) continue;
    for (std::size_t i = 0; i < f.ids.size(); ++i) {
      os << f.t << ',' << f.ids[i] << ',' << f.values[i][0] << ',' << f.values[i][1] << '\n';
    }
  }
}

}  // namespace dqtrack
