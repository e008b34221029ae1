#pragma once

#include <functional>

#include "dqtrack/dualquat.hpp"

namespace dqtrack {

/// Mass/inertia operator acting on dual velocities.
///
/// The 8x8 form is [[0, diag(1, m I)], [diag(1, J), 0]], so M (w + eps v)
/// = m v + eps J w. J must be symmetric positive definite and m > 0.
class MassMatrix {
 public:
  MassMatrix(double mass, const Mat3& inertia);

  double mass() const { return mass_; }
  const Mat3& inertia() const { return inertia_; }
  Mat8 matrix() const;

  DualVector apply(const DualVector& w) const;
  DualVector solve(const DualVector& w) const;

 private:
  double mass_;
  Mat3 inertia_;
  Mat3 inertia_inv_;
};

// Force + eps torque, both in body coordinates.
using Wrench = DualVector;
inline Wrench make_wrench(const Vec3& force, const Vec3& torque) { return {force, torque}; }

struct BodyState {
  DualPose pose;
  DualVelocity vel;
};

// M^{-1} (F - w x M w) for a body-frame dual velocity.
DualVector inertial_accel(const DualVelocity& w_body, const MassMatrix& mass, const Wrench& wrench);

// Rate of the target-relative-to-camera dual velocity in camera coordinates:
//   p a_T p* + w_rel x w_C - a_C
// with p the target pose in the camera frame, a_T the target's inertial
// acceleration in target coordinates, w_C / a_C the camera's inertial dual
// velocity / acceleration in camera coordinates. The pose may be
// off-manifold (intermediate integration stages).
DualVector relative_accel(const DualQuaternion& rel_pose, const DualVelocity& rel_vel,
                          const DualVector& target_accel, const DualVelocity& camera_vel,
                          const DualVector& camera_accel);
DualVector relative_accel(const BodyState& rel, const DualVector& target_accel,
                          const DualVelocity& camera_vel, const DualVector& camera_accel);

// Which side of the pose the velocity multiplies in the kinematics.
enum class VelocityFrame {
  Body,    // dq/dt = 1/2 q w   (inertial body states)
  Parent,  // dq/dt = 1/2 w q   (relative state, velocity in camera frame)
};

// Pose/velocity pair that is allowed to leave the manifold between
// integration stages.
struct RawBodyState {
  DualQuaternion pose;
  DualVector vel;

  RawBodyState& operator+=(const RawBodyState& o) {
    pose += o.pose;
    vel += o.vel;
    return *this;
  }
  RawBodyState& operator*=(double k) {
    pose *= k;
    vel *= k;
    return *this;
  }
};
inline RawBodyState operator+(RawBodyState a, const RawBodyState& b) { return a += b; }
inline RawBodyState operator*(double k, RawBodyState a) { return a *= k; }

template <class State, class Deriv>
State rk4(const State& x, double t, double h, Deriv&& f) {
  const State k1 = f(t, x);
  const State k2 = f(t + 0.5 * h, x + (0.5 * h) * k1);
  const State k3 = f(t + 0.5 * h, x + (0.5 * h) * k2);
  const State k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

using AccelFn =
    std::function<DualVector(double t, const DualQuaternion& pose, const DualVector& vel)>;

// One classical RK4 step of the pose kinematics plus `accel`, without the
// final projection onto the unit dual quaternions.
RawBodyState rk4_step_raw(const BodyState& s, double t, double dt, const AccelFn& accel,
                          VelocityFrame frame);
// rk4_step_raw followed by normalization.
BodyState rk4_step(const BodyState& s, double t, double dt, const AccelFn& accel,
                   VelocityFrame frame);

// Inertial propagation under a constant body-frame wrench.
BodyState propagate_body(const BodyState& s, const MassMatrix& mass, const Wrench& wrench,
                         double dt, int substeps);

}  // namespace dqtrack
