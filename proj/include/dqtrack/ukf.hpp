#pragma once

// Unscented Kalman filter on unit dual quaternion poses and dual velocities.
//
// The error state is [phi, r, omega, v] (12), expressed as follows: phi and
// r are the rotation vector and translation of the pose error
// conj(q_hat) q (right-multiplicative, so invariant to a common left
// factor); omega and v are componentwise camera-frame differences of the
// angular and linear velocity, with v = dual(w) + omega x r.

#include <array>
#include <functional>

#include "dqtrack/dynamics.hpp"

namespace dqtrack {

constexpr int kErrorDim = 12;
constexpr int kSigmaCount = 2 * kErrorDim + 1;

using SigmaSet = Eigen::Matrix<double, kErrorDim, kSigmaCount>;

struct FilterState {
  DualPose pose;       // target w.r.t. camera
  DualVelocity vel;    // target w.r.t. camera, camera coordinates
  Mat12 P{Mat12::Identity()};

  BodyState manifold() const { return {pose, vel}; }
};

struct UkfParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
  // Flip q_delta to the positive-scalar hemisphere before the log map in
  // lift. Off reproduces the two-argument arctangent branch literally.
  bool canonicalize_error_quat = false;

  double lambda() const { return alpha * alpha * (kErrorDim + kappa) - kErrorDim; }
  // Throws std::invalid_argument unless alpha > 0 and n + lambda > 0.
  void validate() const;
};

struct SigmaWeights {
  std::array<double, kSigmaCount> wm{};
  std::array<double, kSigmaCount> wc{};
  double lambda = 0.0;

  static SigmaWeights from(const UkfParams& p);
};

// Unit real part, dual part made orthogonal to it, velocity scalar parts
// dropped. Throws DegenerateStateError if the real part vanishes.
BodyState normalize(const DualQuaternion& pose, const DualQuaternion& vel);
BodyState normalize(const RawBodyState& raw);

BodyState retract(const BodyState& x, const Vec12& dx);
Vec12 lift(const BodyState& x, const BodyState& x_plus, bool canonicalize = false);

// Rotation vector of a unit quaternion: 2 atan2(|v|, s) v / |v|, zero for
// |v| < 1e-12.
Vec3 rotation_log(const Quaternion& q);
// cos(|phi| / 2) + sin(|phi| / 2) phi / |phi|.
UnitQuaternion rotation_exp(const Vec3& phi);

// Columns 0..24: 0, then +/- columns of the lower Cholesky factor of
// (n + lambda) P. Inflates the diagonal once by 1e-9 trace(P) / 12 before
// giving up with CovarianceConditioningError.
SigmaSet sigma_points(const Mat12& P, double lambda);

// Maps a retracted sigma point to its propagated, unnormalized state.
using ProcessModel = std::function<RawBodyState(const BodyState&)>;
using MeasurementModel = std::function<VecX(const BodyState&)>;

struct UpdateInfo {
  bool applied = false;
  VecX innovation;
  MatX S;
  double nis = 0.0;
  Vec12 correction{Vec12::Zero()};
};

class DualQuaternionUkf {
 public:
  DualQuaternionUkf(const FilterState& x0, const UkfParams& params = {});

  const FilterState& state() const { return x_; }
  const UkfParams& params() const { return params_; }
  const SigmaWeights& weights() const { return w_; }

  // Mean = propagated zero-perturbation point; P = sum wc dx dx^T + Q.
  void predict(const ProcessModel& f, const Mat12& Q);
  // Empty y is a no-op. Throws InnovationConditioningError when S is not
  // positive definite.
  UpdateInfo update(const VecX& y, const MeasurementModel& h, const MatX& R);

 private:
  FilterState x_;
  UkfParams params_;
  SigmaWeights w_;
};

// (P + P^T) / 2
Mat12 symmetrize(const Mat12& P);

/// Filter process model for the camera-relative target state.
///
/// Camera dual velocity and acceleration (camera coordinates) and the
/// target's inertial acceleration are held constant over the step; the
/// target acceleration is evaluated per sigma point from its implied
/// inertial velocity. One RK4 step of the relative equations of motion.
struct RelativeMotionModel {
  MassMatrix target_mass{1.0, Mat3::Identity()};
  Wrench target_wrench;
  DualVelocity camera_vel;
  DualVector camera_accel;
  double dt = 1.0 / 30.0;

  RawBodyState operator()(const BodyState& x) const;
};

// Target inertial dual velocity in target coordinates from a relative state
// and the camera's inertial dual velocity.
DualVelocity target_inertial_velocity(const BodyState& rel, const DualVelocity& camera_vel);

}  // namespace dqtrack
