#include "dqtrack/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace dqtrack {

MassMatrix::MassMatrix(double mass, const Mat3& inertia) : mass_(mass), inertia_(inertia) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("mass must be positive");
  if (!inertia.allFinite() || (inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("inertia must be positive definite");
  }
  inertia_inv_ = inertia.inverse();
}

Mat8 MassMatrix::matrix() const {
  Mat8 m = Mat8::Zero();
  m(0, 4) = 1.0;
  m.block<3, 3>(1, 5) = mass_ * Mat3::Identity();
  m(4, 0) = 1.0;
  m.block<3, 3>(5, 1) = inertia_;
  return m;
}

DualVector MassMatrix::apply(const DualVector& w) const {
  return {mass_ * w.dual(), inertia_ * w.real()};
}

DualVector MassMatrix::solve(const DualVector& w) const {
  return {inertia_inv_ * w.dual(), w.real() / mass_};
}

DualVector inertial_accel(const DualVelocity& w_body, const MassMatrix& mass, const Wrench& wrench) {
  return mass.solve(wrench - cross(w_body, mass.apply(w_body)));
}

DualVector relative_accel(const DualQuaternion& rel_pose, const DualVelocity& rel_vel,
                          const DualVector& target_accel, const DualVelocity& camera_vel,
                          const DualVector& camera_accel) {
  const DualVector rotated =
      DualVector::vector_part(rel_pose * target_accel.dq() * dq_conj(rel_pose));
  return rotated + cross(rel_vel, camera_vel) - camera_accel;
}

DualVector relative_accel(const BodyState& rel, const DualVector& target_accel,
                          const DualVelocity& camera_vel, const DualVector& camera_accel) {
  return relative_accel(rel.pose.dq(), rel.vel, target_accel, camera_vel, camera_accel);
}

RawBodyState rk4_step_raw(const BodyState& s, double t, double dt, const AccelFn& accel,
                          VelocityFrame frame) {
  auto deriv = [&](double tau, const RawBodyState& x) {
    const DualQuaternion w = x.vel.dq();
    const DualQuaternion dpose = frame == VelocityFrame::Body ? 0.5 * (x.pose * w)
                                                              : 0.5 * (w * x.pose);
    return RawBodyState{dpose, accel(tau, x.pose, x.vel)};
  };
  return rk4(RawBodyState{s.pose.dq(), s.vel}, t, dt, deriv);
}

BodyState rk4_step(const BodyState& s, double t, double dt, const AccelFn& accel,
                   VelocityFrame frame) {
  const RawBodyState raw = rk4_step_raw(s, t, dt, accel, frame);
  return {normalize_pose(raw.pose), raw.vel};
}

BodyState propagate_body(const BodyState& s, const MassMatrix& mass, const Wrench& wrench,
                         double dt, int substeps) {
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  const AccelFn accel = [&](double, const DualQuaternion&, const DualVector& w) {
    return inertial_accel(w, mass, wrench);
  };
  const double h = dt / substeps;
  BodyState out = s;
  for (int i = 0; i < substeps; ++i) out = rk4_step(out, i * h, h, accel, VelocityFrame::Body);
  return out;
}

}  // namespace dqtrack
