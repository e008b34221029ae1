#include "dqtrack/quat.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace dqtrack {

Quaternion::Quaternion(double s, const Vec3& v) : s_(s), v_(v) {
  if (!std::isfinite(s) || !v.allFinite()) {
    throw std::invalid_argument("quaternion coefficients must be finite");
  }
}

Quaternion& Quaternion::operator+=(const Quaternion& o) {
  s_ += o.s_;
  v_ += o.v_;
  return *this;
}

Quaternion& Quaternion::operator-=(const Quaternion& o) {
  s_ -= o.s_;
  v_ -= o.v_;
  return *this;
}

Quaternion& Quaternion::operator*=(double k) {
  s_ *= k;
  v_ *= k;
  return *this;
}

Quaternion mul(const Quaternion& a, const Quaternion& b) {
  return {a.s() * b.s() - a.v().dot(b.v()), a.s() * b.v() + b.s() * a.v() + a.v().cross(b.v())};
}

Quaternion conj(const Quaternion& a) { return {a.s(), -a.v()}; }

Quaternion dot(const Quaternion& a, const Quaternion& b) {
  return {a.s() * b.s() + a.v().dot(b.v()), Vec3::Zero()};
}

Quaternion cross(const Quaternion& a, const Quaternion& b) {
  return {0.0, a.s() * b.v() + b.s() * a.v() + a.v().cross(b.v())};
}

double norm(const Quaternion& a) { return std::sqrt(a.s() * a.s() + a.v().squaredNorm()); }

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat4 left_matrix(const Quaternion& q) {
  Mat4 m = q.s() * Mat4::Identity();
  m.block<1, 3>(0, 1) -= q.v().transpose();
  m.block<3, 1>(1, 0) += q.v();
  m.block<3, 3>(1, 1) += skew(q.v());
  return m;
}

Mat4 right_matrix(const Quaternion& q) {
  Mat4 m = q.s() * Mat4::Identity();
  m.block<1, 3>(0, 1) -= q.v().transpose();
  m.block<3, 1>(1, 0) += q.v();
  m.block<3, 3>(1, 1) -= skew(q.v());
  return m;
}

Mat4 cross_matrix(const Quaternion& q) {
  Mat4 m = Mat4::Zero();
  m.block<3, 1>(1, 0) = q.v();
  m.block<3, 3>(1, 1) = q.s() * Mat3::Identity() + skew(q.v());
  return m;
}

Mat4 conj_matrix() { return Vec4(1.0, -1.0, -1.0, -1.0).asDiagonal(); }

std::ostream& operator<<(std::ostream& os, const Quaternion& q) {
  return os << '[' << q.s() << ", " << q.v().x() << ", " << q.v().y() << ", " << q.v().z() << ']';
}

UnitQuaternion::UnitQuaternion(const Quaternion& q) : q_(q) {
  const double n = norm(q);
  if (std::abs(n - 1.0) > kRenormalizeTolerance) {
    throw std::domain_error("quaternion is not unit norm");
  }
  q_ *= 1.0 / n;
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return UnitQuaternion(mul(a.quat(), b.quat()));
}

UnitQuaternion conj(const UnitQuaternion& q) { return UnitQuaternion(conj(q.quat())); }

VectorQuaternion::VectorQuaternion(const Vec3& v) : v_(v) {
  if (!v.allFinite()) throw std::invalid_argument("vector quaternion must be finite");
}

VectorQuaternion::VectorQuaternion(const Quaternion& q) : v_(q.v()) {
  if (std::abs(q.s()) > UnitQuaternion::kUnitTolerance) {
    throw std::domain_error("quaternion has a non-zero scalar part");
  }
}

UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > UnitQuaternion::kUnitTolerance) {
    throw std::invalid_argument("rotation axis must be a unit vector");
  }
  return UnitQuaternion(Quaternion(std::cos(0.5 * angle), std::sin(0.5 * angle) * axis));
}

VectorQuaternion rotate_vector(const UnitQuaternion& q, const VectorQuaternion& v) {
  const Quaternion r = q.quat() * v.quat() * conj(q.quat());
  return VectorQuaternion(r.v());
}

Vec3 rotate_vector(const UnitQuaternion& q, const Vec3& v) {
  return rotate_vector(q, VectorQuaternion(v)).vec();
}

Mat3 to_rotation_matrix(const UnitQuaternion& q) {
  // R = (s^2 - v.v) I + 2 v v^T + 2 s [v]x
  const double s = q.s();
  const Vec3& v = q.v();
  return (s * s - v.squaredNorm()) * Mat3::Identity() + 2.0 * v * v.transpose() + 2.0 * s * skew(v);
}

UnitQuaternion from_rotation_matrix(const Mat3& R) {
  // Shepperd's method, largest pivot first.
  const double tr = R.trace();
  double s, x, y, z;
  if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
    const double t = std::sqrt(1.0 + tr) * 2.0;
    s = 0.25 * t;
    x = (R(2, 1) - R(1, 2)) / t;
    y = (R(0, 2) - R(2, 0)) / t;
    z = (R(1, 0) - R(0, 1)) / t;
  } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
    const double t = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    s = (R(2, 1) - R(1, 2)) / t;
    x = 0.25 * t;
    y = (R(0, 1) + R(1, 0)) / t;
    z = (R(0, 2) + R(2, 0)) / t;
  } else if (R(1, 1) >= R(2, 2)) {
    const double t = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    s = (R(0, 2) - R(2, 0)) / t;
    x = (R(0, 1) + R(1, 0)) / t;
    y = 0.25 * t;
    z = (R(1, 2) + R(2, 1)) / t;
  } else {
    const double t = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    s = (R(1, 0) - R(0, 1)) / t;
    x = (R(0, 2) + R(2, 0)) / t;
    y = (R(1, 2) + R(2, 1)) / t;
    z = 0.25 * t;
  }
  const Quaternion q(s, x, y, z);
  return UnitQuaternion(q * (1.0 / norm(q)));
}

}  // namespace dqtrack
