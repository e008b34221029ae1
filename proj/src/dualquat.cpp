#include "dqtrack/dualquat.hpp"

#include <cmath>
#include <stdexcept>

#include "dqtrack/errors.hpp"

namespace dqtrack {

Vec8 DualQuaternion::coeffs() const {
  Vec8 c;
  c << real_.coeffs(), dual_.coeffs();
  return c;
}

DualQuaternion& DualQuaternion::operator+=(const DualQuaternion& o) {
  real_ += o.real_;
  dual_ += o.dual_;
  return *this;
}

DualQuaternion& DualQuaternion::operator-=(const DualQuaternion& o) {
  real_ -= o.real_;
  dual_ -= o.dual_;
  return *this;
}

DualQuaternion& DualQuaternion::operator*=(double k) {
  real_ *= k;
  dual_ *= k;
  return *this;
}

DualQuaternion dq_mul(const DualQuaternion& a, const DualQuaternion& b) {
  return {a.real() * b.real(), a.dual() * b.real() + a.real() * b.dual()};
}

DualQuaternion dq_conj(const DualQuaternion& a) { return {conj(a.real()), conj(a.dual())}; }

DualQuaternion dq_dot(const DualQuaternion& a, const DualQuaternion& b) {
  return {dot(a.real(), b.real()), dot(a.dual(), b.real()) + dot(a.real(), b.dual())};
}

DualQuaternion dq_cross(const DualQuaternion& a, const DualQuaternion& b) {
  return {cross(a.real(), b.real()), cross(a.dual(), b.real()) + cross(a.real(), b.dual())};
}

double dq_norm(const DualQuaternion& a) {
  return std::sqrt(a.real().coeffs().squaredNorm() + a.dual().coeffs().squaredNorm());
}

namespace {

Mat8 lower_block(const Mat4& diag, const Mat4& lower) {
  Mat8 m = Mat8::Zero();
  m.topLeftCorner<4, 4>() = diag;
  m.bottomRightCorner<4, 4>() = diag;
  m.bottomLeftCorner<4, 4>() = lower;
  return m;
}

}  // namespace

Mat8 dq_left_matrix(const DualQuaternion& q) {
  return lower_block(left_matrix(q.real()), left_matrix(q.dual()));
}

Mat8 dq_right_matrix(const DualQuaternion& q) {
  return lower_block(right_matrix(q.real()), right_matrix(q.dual()));
}

Mat8 dq_cross_matrix(const DualQuaternion& q) {
  return lower_block(cross_matrix(q.real()), cross_matrix(q.dual()));
}

Mat8 dq_conj_matrix() { return lower_block(conj_matrix(), Mat4::Zero()); }

DualVector::DualVector(const DualQuaternion& dq) : real_(dq.real().v()), dual_(dq.dual().v()) {
  if (std::abs(dq.real().s()) > 1e-9 || std::abs(dq.dual().s()) > 1e-9) {
    throw std::domain_error("dual quaternion is not a vector dual quaternion");
  }
}

DualVector cross(const DualVector& a, const DualVector& b) {
  return {a.real().cross(b.real()), a.dual().cross(b.real()) + a.real().cross(b.dual())};
}

DualPose::DualPose(const DualQuaternion& dq) {
  const double n = norm(dq.real());
  const double orth = dot(dq.real(), dq.dual()).s();
  if (std::abs(n - 1.0) > kRenormalizeTolerance || std::abs(orth) > kRenormalizeTolerance) {
    throw std::domain_error("dual quaternion is not a unit dual quaternion");
  }
  dq_ = normalize_pose(dq).dq();
}

DualPose normalize_pose(const DualQuaternion& dq) {
  const double n = norm(dq.real());
  if (n < 1e-12) throw DegenerateStateError("pose real part has vanished");
  const Quaternion real = dq.real() * (1.0 / n);
  const Quaternion dual = dq.dual() - real * dot(dq.dual(), real).s();
  return DualPose({real, dual}, DualPose::Normalized{});
}

DualPose operator*(const DualPose& a, const DualPose& b) { return DualPose(a.dq() * b.dq()); }

DualPose conj(const DualPose& p) { return DualPose(dq_conj(p.dq())); }

DualPose pose_from(const UnitQuaternion& q, const Vec3& r_parent) {
  return DualPose({q.quat(), 0.5 * (Quaternion::pure(r_parent) * q.quat())});
}

DualPose pose_from_body(const UnitQuaternion& q, const Vec3& r_body) {
  return DualPose({q.quat(), 0.5 * (q.quat() * Quaternion::pure(r_body))});
}

UnitQuaternion pose_rotation(const DualPose& p) { return UnitQuaternion(p.real()); }

Vec3 pose_translation_parent(const DualPose& p) { return 2.0 * (p.dual() * conj(p.real())).v(); }

Vec3 pose_translation_body(const DualPose& p) { return 2.0 * (conj(p.real()) * p.dual()).v(); }

DualPose chain(const DualPose& p_yz, const DualPose& p_xz) { return conj(p_yz) * p_xz; }

DualVelocity velocity_from(const Vec3& omega, const Vec3& v, const Vec3& r_offset) {
  return {omega, v + omega.cross(r_offset)};
}

Vec3 velocity_omega(const DualVelocity& w) { return w.real(); }

Vec3 velocity_v(const DualVelocity& w, const Vec3& r_offset) {
  return w.dual() - w.real().cross(r_offset);
}

DualVector transform(const DualPose& p, const DualVector& w) {
  return DualVector::vector_part(p.dq() * w.dq() * dq_conj(p.dq()));
}

Vec3 transform_point(const DualPose& p, const Vec3& point) {
  return pose_translation_parent(p * pose_from(UnitQuaternion::identity(), point));
}

DualQuaternion pose_derivative(const DualPose& p, const DualVelocity& w_parent) {
  return 0.5 * (w_parent.dq() * p.dq());
}

DualQuaternion pose_derivative_body(const DualPose& p, const DualVelocity& w_body) {
  return 0.5 * (p.dq() * w_body.dq());
}

}  // namespace dqtrack
