#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dqtrack/dualquat.hpp"
#include "dqtrack/rng.hpp"

namespace dqtrack {

/// Ideal pinhole camera, +Z forward, no distortion.
struct CameraModel {
  double fx = 800.0;
  double fy = 800.0;
  double cx = 640.0;
  double cy = 512.0;
  double pixel_sigma = 2.0;  // px
  bool clip_to_image = false;
  double width = 1280.0;
  double height = 1024.0;
  double depth_tol = 1e-6;  // m

  // Throws ConfigError with a "camera.*" field path.
  void validate() const;
  Mat3 intrinsics() const;
};

// R m + t for the target pose in the camera frame.
Vec3 marker_position_camera(const DualPose& rel_pose, const Vec3& marker);
// Throws PositiveDepthError if the range is at or below depth_tol.
Vec3 unit_vector_measure(const DualPose& rel_pose, const Vec3& marker, double depth_tol = 1e-6);

// Noise-free projection of a camera-frame point; empty when behind the
// camera (z <= depth_tol) or, with clipping on, outside the image.
std::optional<Vec2> project_point(const CameraModel& cam, const Vec3& p_cam);
// Projection with N(0, sigma^2) pixel noise when `rng` is given.
std::optional<Vec2> project(const CameraModel& cam, const DualPose& rel_pose, const Vec3& marker,
                            Rng* rng = nullptr);
// Back-projection direction K^-1 [u, v, 1], normalized.
Vec3 back_project(const CameraModel& cam, const Vec2& pixel);

struct OcclusionSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<int> visible;
};

/// Ordered segments [t_start, t_end); the last one also contains t_end.
class OcclusionSchedule {
 public:
  OcclusionSchedule() = default;
  explicit OcclusionSchedule(std::vector<OcclusionSegment> segments)
      : segments_(std::move(segments)) {}

  // Four markers, then three, two, three, four, one second each.
  static OcclusionSchedule flyby_default();
  static OcclusionSchedule all_visible(double duration, int marker_count);

  const std::vector<OcclusionSegment>& segments() const { return segments_; }
  // Index of the segment containing t, or -1.
  int segment_at(double t) const;
  // Empty when t is outside the schedule.
  std::vector<int> visible_at(double t) const;
  // Contiguous, non-overlapping cover of [0, duration] with valid ids.
  // Throws ConfigError with a "schedule[i].*" field path.
  void validate(double duration, int marker_count) const;

 private:
  std::vector<OcclusionSegment> segments_;
};

enum class MeasurementMode { Pixels, Positions, UnitVectors };

std::string to_string(MeasurementMode mode);
// Accepts "pixels", "positions", "unit_vectors".
std::optional<MeasurementMode> parse_measurement_mode(const std::string& s);

struct MeasurementFrame {
  double t = 0.0;
  MeasurementMode mode = MeasurementMode::Pixels;
  std::vector<int> ids;
  // Per visible marker: 2 values (pixels) or 3 (positions, unit vectors).
  std::vector<VecX> values;

  bool empty() const { return ids.empty(); }
  int dim() const { return mode == MeasurementMode::Pixels ? 2 : 3; }
  VecX stacked() const;
};

// Scheduled-visible markers with positive depth. In pixel mode two noise
// samples are drawn for every marker in id order, visible or not, so the
// noise stream does not depend on the schedule.
MeasurementFrame measure_frame(const CameraModel& cam, const DualPose& rel_pose,
                               std::span<const Vec3> markers, const OcclusionSchedule& schedule,
                               double t, Rng* rng, MeasurementMode mode = MeasurementMode::Pixels);

// Columns t, marker_id, u, v (pixel frames only).
void write_frames_csv(std::ostream& os, std::span<const MeasurementFrame> frames);

}  // namespace dqtrack
