#pragma once

// Dual quaternions q_r + eps q_d with eps^2 = 0.
//
// Layout for the 8x1 and 8x8 matrix forms is [real; dual], each block in
// scalar-first quaternion order.

#include "dqtrack/quat.hpp"

namespace dqtrack {

class DualQuaternion {
 public:
  DualQuaternion() = default;
  DualQuaternion(const Quaternion& real, const Quaternion& dual) : real_(real), dual_(dual) {}

  static DualQuaternion from_coeffs(const Vec8& c) {
    return {Quaternion::from_coeffs(c.head<4>()), Quaternion::from_coeffs(c.tail<4>())};
  }
  static DualQuaternion zero() { return {}; }
  static DualQuaternion one() { return {Quaternion::one(), Quaternion::zero()}; }

  const Quaternion& real() const { return real_; }
  const Quaternion& dual() const { return dual_; }
  Vec8 coeffs() const;

  DualQuaternion operator-() const { return {-real_, -dual_}; }
  DualQuaternion& operator+=(const DualQuaternion& o);
  DualQuaternion& operator-=(const DualQuaternion& o);
  DualQuaternion& operator*=(double k);

 private:
  Quaternion real_;
  Quaternion dual_;
};

inline DualQuaternion operator+(DualQuaternion a, const DualQuaternion& b) { return a += b; }
inline DualQuaternion operator-(DualQuaternion a, const DualQuaternion& b) { return a -= b; }
inline DualQuaternion operator*(DualQuaternion a, double k) { return a *= k; }
inline DualQuaternion operator*(double k, DualQuaternion a) { return a *= k; }

DualQuaternion dq_mul(const DualQuaternion& a, const DualQuaternion& b);
inline DualQuaternion operator*(const DualQuaternion& a, const DualQuaternion& b) {
  return dq_mul(a, b);
}
DualQuaternion dq_conj(const DualQuaternion& a);
DualQuaternion dq_dot(const DualQuaternion& a, const DualQuaternion& b);
DualQuaternion dq_cross(const DualQuaternion& a, const DualQuaternion& b);
double dq_norm(const DualQuaternion& a);

Mat8 dq_left_matrix(const DualQuaternion& q);
Mat8 dq_right_matrix(const DualQuaternion& q);
Mat8 dq_cross_matrix(const DualQuaternion& q);
Mat8 dq_conj_matrix();

/// Vector dual quaternion: both scalar parts are exactly zero.
///
/// Used for dual velocities w + eps (v + w x r), wrenches f + eps tau and
/// their time derivatives.
class DualVector {
 public:
  DualVector() = default;
  DualVector(const Vec3& real, const Vec3& dual) : real_(real), dual_(dual) {}
  // Throws std::domain_error if either scalar part exceeds 1e-9.
  explicit DualVector(const DualQuaternion& dq);
  // Drops the scalar parts unconditionally.
  static DualVector vector_part(const DualQuaternion& dq) {
    return {dq.real().v(), dq.dual().v()};
  }

  const Vec3& real() const { return real_; }
  const Vec3& dual() const { return dual_; }
  DualQuaternion dq() const { return {Quaternion::pure(real_), Quaternion::pure(dual_)}; }

  DualVector operator-() const { return {-real_, -dual_}; }
  DualVector& operator+=(const DualVector& o) {
    real_ += o.real_;
    dual_ += o.dual_;
    return *this;
  }
  DualVector& operator-=(const DualVector& o) {
    real_ -= o.real_;
    dual_ -= o.dual_;
    return *this;
  }
  DualVector& operator*=(double k) {
    real_ *= k;
    dual_ *= k;
    return *this;
  }

 private:
  Vec3 real_{Vec3::Zero()};
  Vec3 dual_{Vec3::Zero()};
};

inline DualVector operator+(DualVector a, const DualVector& b) { return a += b; }
inline DualVector operator-(DualVector a, const DualVector& b) { return a -= b; }
inline DualVector operator*(DualVector a, double k) { return a *= k; }
inline DualVector operator*(double k, DualVector a) { return a *= k; }

// Dual cross product restricted to vector dual quaternions.
DualVector cross(const DualVector& a, const DualVector& b);

using DualVelocity = DualVector;

/// Unit dual quaternion q + eps 1/2 r q encoding a rigid transform.
///
/// Invariants: |q_r| = 1 and q_r . q_d = 0, both to 1e-9. Construction
/// from a raw dual quaternion within 1e-6 of the constraint set normalizes
/// it; anything further is rejected with std::domain_error.
class DualPose {
 public:
  static constexpr double kRenormalizeTolerance = 1e-6;

  DualPose() : dq_(DualQuaternion::one()) {}
  explicit DualPose(const DualQuaternion& dq);

  static DualPose identity() { return {}; }

  const DualQuaternion& dq() const { return dq_; }
  const Quaternion& real() const { return dq_.real(); }
  const Quaternion& dual() const { return dq_.dual(); }

 private:
  struct Normalized {};
  DualPose(const DualQuaternion& dq, Normalized) : dq_(dq) {}
  friend DualPose normalize_pose(const DualQuaternion& dq);

  DualQuaternion dq_;
};

// Projects onto the unit dual quaternions: q_r /= |q_r|, then
// q_d -= q_r (q_d . q_r). Throws DegenerateStateError if |q_r| < 1e-12.
DualPose normalize_pose(const DualQuaternion& dq);

DualPose operator*(const DualPose& a, const DualPose& b);
DualPose conj(const DualPose& p);

// q + eps 1/2 r q, with r the child origin in parent coordinates.
DualPose pose_from(const UnitQuaternion& q, const Vec3& r_parent);
// q + eps 1/2 q r, with r the child origin in child coordinates.
DualPose pose_from_body(const UnitQuaternion& q, const Vec3& r_body);

UnitQuaternion pose_rotation(const DualPose& p);
Vec3 pose_translation_parent(const DualPose& p);
Vec3 pose_translation_body(const DualPose& p);

// Pose of x w.r.t. y from the poses of y and x w.r.t. a common frame z.
DualPose chain(const DualPose& p_yz, const DualPose& p_xz);

/// Dual velocity w + eps (v + w x r_offset).
///
/// `r_offset` is the position of the expressing frame relative to the moving
/// frame; for the relative state of a target seen from a camera, expressed in
/// camera coordinates, it is -r_{T/C}.
DualVelocity velocity_from(const Vec3& omega, const Vec3& v, const Vec3& r_offset);
Vec3 velocity_omega(const DualVelocity& w);
Vec3 velocity_v(const DualVelocity& w, const Vec3& r_offset);

// Frame change of a vector dual quaternion: p w p*. With p = pose of x
// w.r.t. y this maps x-coordinates to y-coordinates.
DualVector transform(const DualPose& p, const DualVector& w);
// Maps a point in child coordinates to parent coordinates (R x + t).
Vec3 transform_point(const DualPose& p, const Vec3& point);

// 1/2 w p with w expressed in the parent frame.
DualQuaternion pose_derivative(const DualPose& p, const DualVelocity& w_parent);
// 1/2 p w with w expressed in the body frame.
DualQuaternion pose_derivative_body(const DualPose& p, const DualVelocity& w_body);

}  // namespace dqtrack
