#pragma once

// Scenario configuration: YAML in, validated struct out.
//
// Every validation failure is a ConfigError whose field() is the dotted key
// path, e.g. "bodies.camera.mass" or "schedule[2].start".

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dqtrack/camera.hpp"
#include "dqtrack/dynamics.hpp"
#include "dqtrack/pnp.hpp"
#include "dqtrack/ukf.hpp"

namespace dqtrack {

struct BodyConfig {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
  Vec3 force = Vec3::Zero();   // body frame, N
  Vec3 torque = Vec3::Zero();  // body frame, N m
  Vec3 position = Vec3::Zero();  // inertial, m
  UnitQuaternion attitude;       // body w.r.t. inertial
  Vec3 omega = Vec3::Zero();     // body frame, rad/s
  Vec3 velocity = Vec3::Zero();  // body frame, m/s

  MassMatrix mass_matrix() const { return {mass, inertia}; }
  Wrench wrench() const { return make_wrench(force, torque); }
  BodyState initial_state() const;
};

// Standard deviations of the 12-dim error state, grouped by block.
struct ErrorSigmas {
  double phi = 0.0;    // rad
  double r = 0.0;      // m
  double omega = 0.0;  // rad/s
  double v = 0.0;      // m/s

  Vec12 variances() const;
};

struct ScenarioConfig {
  double duration = 5.0;  // s
  double rate_hz = 30.0;
  std::uint64_t seed = 1;
  int truth_substeps = 10;
  MeasurementMode mode = MeasurementMode::Pixels;

  CameraModel camera;
  std::vector<Vec3> markers;
  OcclusionSchedule schedule;
  BodyConfig camera_body;
  BodyConfig target_body;

  ErrorSigmas process_noise;  // Q = dt blkdiag(sigma^2 I)
  ErrorSigmas initial_sigma;  // P0 and the velocity initialization draw
  // Pixel noise the filter assumes; the simulated noise is camera.pixel_sigma.
  double filter_pixel_sigma = 2.0;
  // Start the filter at the true state instead of PnP plus a velocity draw.
  bool init_at_truth = false;

  UkfParams ukf;
  PnpOptions pnp;
  std::filesystem::path output_dir = "results";

  double dt() const { return 1.0 / rate_hz; }
  int steps() const;

  // The simulated scenario described in the README.
  static ScenarioConfig flyby_default();
  void validate() const;
};

// Missing keys keep their flyby_default() values.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& yaml_text);

}  // namespace dqtrack
