#pragma once

// Quaternion algebra in scalar-first layout (s, v1, v2, v3).
//
// Products, conjugates, dot and cross products follow the usual
// Hamilton conventions; the cross product is the "quaternion cross"
//   a x b = [0, s_a v_b + s_b v_a + v_a x v_b]
// which reduces to the 3-vector cross product for vector quaternions.

#include <iosfwd>

#include "dqtrack/linalg.hpp"

namespace dqtrack {

class Quaternion {
 public:
  Quaternion() = default;
  // Throws std::invalid_argument for non-finite coefficients.
  Quaternion(double s, const Vec3& v);
  Quaternion(double s, double x, double y, double z) : Quaternion(s, Vec3(x, y, z)) {}

  static Quaternion from_coeffs(const Vec4& c) { return {c[0], c.tail<3>()}; }
  static Quaternion pure(const Vec3& v) { return {0.0, v}; }
  static Quaternion zero() { return {}; }
  static Quaternion one() { return {1.0, Vec3::Zero()}; }

  double s() const { return s_; }
  const Vec3& v() const { return v_; }
  Vec4 coeffs() const { return {s_, v_[0], v_[1], v_[2]}; }

  Quaternion operator-() const { return {-s_, -v_}; }
  Quaternion& operator+=(const Quaternion& o);
  Quaternion& operator-=(const Quaternion& o);
  Quaternion& operator*=(double k);

 private:
  double s_{0.0};
  Vec3 v_{Vec3::Zero()};
};

inline Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
inline Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
inline Quaternion operator*(Quaternion a, double k) { return a *= k; }
inline Quaternion operator*(double k, Quaternion a) { return a *= k; }

Quaternion mul(const Quaternion& a, const Quaternion& b);
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) { return mul(a, b); }

Quaternion conj(const Quaternion& a);
// Returns a scalar quaternion [a.b, 0].
Quaternion dot(const Quaternion& a, const Quaternion& b);
Quaternion cross(const Quaternion& a, const Quaternion& b);
double norm(const Quaternion& a);

Mat3 skew(const Vec3& v);
Mat4 left_matrix(const Quaternion& q);
Mat4 right_matrix(const Quaternion& q);
Mat4 cross_matrix(const Quaternion& q);
Mat4 conj_matrix();

std::ostream& operator<<(std::ostream& os, const Quaternion& q);

/// Unit quaternion (element of SO(3) up to sign).
///
/// Inputs within 1e-6 of unit norm are renormalized on construction;
/// anything further away is rejected with std::domain_error. Both q and -q
/// are accepted; no hemisphere is enforced here.
class UnitQuaternion {
 public:
  static constexpr double kUnitTolerance = 1e-9;
  static constexpr double kRenormalizeTolerance = 1e-6;

  UnitQuaternion() : q_(Quaternion::one()) {}
  explicit UnitQuaternion(const Quaternion& q);

  static UnitQuaternion identity() { return {}; }

  const Quaternion& quat() const { return q_; }
  operator const Quaternion&() const { return q_; }  // NOLINT(google-explicit-constructor)
  double s() const { return q_.s(); }
  const Vec3& v() const { return q_.v(); }

 private:
  Quaternion q_;
};

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);
UnitQuaternion conj(const UnitQuaternion& q);

/// Pure vector quaternion: scalar part is exactly zero.
class VectorQuaternion {
 public:
  VectorQuaternion() = default;
  explicit VectorQuaternion(const Vec3& v);
  // Accepts |s| <= 1e-9 and zeroes it; throws std::domain_error otherwise.
  explicit VectorQuaternion(const Quaternion& q);

  const Vec3& vec() const { return v_; }
  Quaternion quat() const { return Quaternion::pure(v_); }

 private:
  Vec3 v_{Vec3::Zero()};
};

// Axis must be unit within 1e-9 (std::invalid_argument otherwise).
UnitQuaternion from_axis_angle(const Vec3& axis, double angle);

// q v q*
VectorQuaternion rotate_vector(const UnitQuaternion& q, const VectorQuaternion& v);
Vec3 rotate_vector(const UnitQuaternion& q, const Vec3& v);

// Conversion helpers.
Mat3 to_rotation_matrix(const UnitQuaternion& q);
UnitQuaternion from_rotation_matrix(const Mat3& R);

}  // namespace dqtrack
