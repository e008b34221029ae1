#pragma once

// Memoryless perspective-n-point baseline for coplanar marker layouts.

#include <span>

#include "dqtrack/camera.hpp"
#include "dqtrack/dualquat.hpp"

namespace dqtrack {

struct PnpOptions {
  int max_iterations = 50;
  double step_tol = 1e-10;
  // Solve exactly three correspondences (up to four mirror solutions,
  // resolved by reprojection error and frontality) instead of rejecting them.
  bool allow_three_point = false;
  double collinear_tol = 1e-9;  // m^2, on |(p2 - p1) x (p3 - p1)|
  double coplanar_tol = 1e-9;   // relative, smallest / largest singular value
};

struct PnpSolution {
  DualPose pose;  // target w.r.t. camera
  double rms = 0.0;  // px
  int iterations = 0;
  bool converged = false;
};

// Throws InsufficientMarkersError below 4 points (3 with allow_three_point),
// DegenerateConfigurationError for collinear or non-coplanar markers, and
// std::invalid_argument for mismatched spans.
PnpSolution solve_pnp(const CameraModel& cam, std::span<const Vec3> points,
                      std::span<const Vec2> pixels, const PnpOptions& opts = {});

// Gauss-Newton reprojection refinement from (R, t); exposed for tests.
PnpSolution refine_pose(const CameraModel& cam, std::span<const Vec3> points,
                        std::span<const Vec2> pixels, const Mat3& R, const Vec3& t,
                        const PnpOptions& opts = {});

double reprojection_rms(const CameraModel& cam, std::span<const Vec3> points,
                        std::span<const Vec2> pixels, const Mat3& R, const Vec3& t);

}  // namespace dqtrack
