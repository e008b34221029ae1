#include "dqtrack/ukf.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "dqtrack/errors.hpp"

namespace dqtrack {

void UkfParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
  if (!std::isfinite(beta) || !std::isfinite(kappa)) {
    throw std::invalid_argument("beta and kappa must be finite");
  }
  if (!(kErrorDim + lambda() > 0.0)) throw std::invalid_argument("n + lambda must be > 0");
}

SigmaWeights SigmaWeights::from(const UkfParams& p) {
  p.validate();
  SigmaWeights w;
  const double n = kErrorDim;
  w.lambda = p.lambda();
  w.wm[0] = w.lambda / (n + w.lambda);
  w.wc[0] = w.wm[0] + (1.0 - p.alpha * p.alpha + p.beta);
  for (int i = 1; i < kSigmaCount; ++i) w.wm[i] = w.wc[i] = 1.0 / (2.0 * (n + w.lambda));
  return w;
}

BodyState normalize(const DualQuaternion& pose, const DualQuaternion& vel) {
  return {normalize_pose(pose), DualVector::vector_part(vel)};
}

BodyState normalize(const RawBodyState& raw) { return {normalize_pose(raw.pose), raw.vel}; }

Vec3 rotation_log(const Quaternion& q) {
  const double n = q.v().norm();
  if (n < 1e-12) return Vec3::Zero();
  return 2.0 * std::atan2(n, q.s()) * q.v() / n;
}

UnitQuaternion rotation_exp(const Vec3& phi) {
  const double th = phi.norm();
  if (th < 1e-12) return UnitQuaternion(Quaternion(1.0, 0.5 * phi));
  return UnitQuaternion(Quaternion(std::cos(0.5 * th), std::sin(0.5 * th) / th * phi));
}

BodyState retract(const BodyState& x, const Vec12& dx) {
  const Vec3 r = pose_translation_parent(x.pose);
  const Vec3 w = x.vel.real();
  const Vec3 v = x.vel.dual() + w.cross(r);

  const DualPose delta = pose_from(rotation_exp(dx.segment<3>(0)), dx.segment<3>(3));
  const DualPose pose = x.pose * delta;
  const Vec3 r_plus = pose_translation_parent(pose);
  const Vec3 w_plus = w + dx.segment<3>(6);
  const Vec3 v_plus = v + dx.segment<3>(9);
  return {pose, DualVelocity(w_plus, v_plus - w_plus.cross(r_plus))};
}

Vec12 lift(const BodyState& x, const BodyState& x_plus, bool canonicalize) {
  const Vec3 r = pose_translation_parent(x.pose);
  const Vec3 r_plus = pose_translation_parent(x_plus.pose);
  const Vec3 w = x.vel.real(), w_plus = x_plus.vel.real();
  const Vec3 v = x.vel.dual() + w.cross(r);
  const Vec3 v_plus = x_plus.vel.dual() + w_plus.cross(r_plus);

  const DualPose delta = conj(x.pose) * x_plus.pose;
  Quaternion qd = delta.real();
  if (canonicalize && qd.s() < 0.0) qd = -qd;

  Vec12 out;
  out << rotation_log(qd), pose_translation_parent(delta), w_plus - w, v_plus - v;
  return out;
}

SigmaSet sigma_points(const Mat12& P, double lambda) {
  const double scale = kErrorDim + lambda;
  Eigen::LLT<Mat12> llt(scale * P);
  if (llt.info() != Eigen::Success) {
    const Mat12 inflated = P + (1e-9 * P.trace() / kErrorDim) * Mat12::Identity();
    llt.compute(scale * inflated);
    if (llt.info() != Eigen::Success) {
      throw CovarianceConditioningError("covariance is not positive definite");
    }
  }
  const Mat12 L = llt.matrixL();
  SigmaSet out;
  out.col(0).setZero();
  out.block<kErrorDim, kErrorDim>(0, 1) = L;
  out.block<kErrorDim, kErrorDim>(0, 1 + kErrorDim) = -L;
  return out;
}

Mat12 symmetrize(const Mat12& P) { return 0.5 * (P + P.transpose()); }

DualQuaternionUkf::DualQuaternionUkf(const FilterState& x0, const UkfParams& params)
    : x_(x0), params_(params), w_(SigmaWeights::from(params)) {
  x_.P = symmetrize(x_.P);
}

void DualQuaternionUkf::predict(const ProcessModel& f, const Mat12& Q) {
  const SigmaSet dx = sigma_points(x_.P, w_.lambda);
  const BodyState x = x_.manifold();
  std::array<BodyState, kSigmaCount> chi;
  for (int i = 0; i < kSigmaCount; ++i) chi[i] = normalize(f(retract(x, dx.col(i))));

  Mat12 P = Q;
  for (int i = 0; i < kSigmaCount; ++i) {
    const Vec12 d = lift(chi[0], chi[i], params_.canonicalize_error_quat);
    P += w_.wc[i] * d * d.transpose();
  }
  x_.pose = chi[0].pose;
  x_.vel = chi[0].vel;
  x_.P = symmetrize(P);
}

UpdateInfo DualQuaternionUkf::update(const VecX& y, const MeasurementModel& h, const MatX& R) {
  UpdateInfo info;
  if (y.size() == 0) return info;
  if (R.rows() != y.size() || R.cols() != y.size()) {
    throw std::invalid_argument("measurement noise size does not match the measurement");
  }

  const SigmaSet dx = sigma_points(x_.P, w_.lambda);
  const BodyState x = x_.manifold();
  MatX gamma(y.size(), kSigmaCount);
  for (int i = 0; i < kSigmaCount; ++i) {
    const VecX g = h(retract(x, dx.col(i)));
    if (g.size() != y.size()) throw std::invalid_argument("measurement model size mismatch");
    gamma.col(i) = g;
  }

  VecX y_hat = VecX::Zero(y.size());
  for (int i = 0; i < kSigmaCount; ++i) y_hat += w_.wm[i] * gamma.col(i);

  MatX S = R;
  MatX Pxy = MatX::Zero(kErrorDim, y.size());
  for (int i = 0; i < kSigmaCount; ++i) {
    const VecX e = gamma.col(i) - y_hat;
    S += w_.wc[i] * e * e.transpose();
    Pxy += w_.wc[i] * dx.col(i) * e.transpose();
  }
  S = 0.5 * (S + S.transpose());

  const Eigen::LLT<MatX> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite()) {
    throw InnovationConditioningError("innovation covariance is not positive definite");
  }
  const MatX K = llt.solve(Pxy.transpose()).transpose();
  const VecX nu = y - y_hat;
  const Vec12 correction = K * nu;

  const BodyState updated = retract(x, correction);
  x_.pose = updated.pose;
  x_.vel = updated.vel;
  x_.P = symmetrize(x_.P - K * S * K.transpose());

  info.applied = true;
  info.innovation = nu;
  info.S = S;
  info.nis = nu.dot(llt.solve(nu));
  info.correction = correction;
  return info;
}

DualVelocity target_inertial_velocity(const BodyState& rel, const DualVelocity& camera_vel) {
  return transform(conj(rel.pose), rel.vel + camera_vel);
}

RawBodyState RelativeMotionModel::operator()(const BodyState& x) const {
  const DualVector a_t =
      inertial_accel(target_inertial_velocity(x, camera_vel), target_mass, target_wrench);
  const AccelFn accel = [&](double, const DualQuaternion& pose, const DualVector& vel) {
    return relative_accel(pose, vel, a_t, camera_vel, camera_accel);
  };
  return rk4_step_raw(x, 0.0, dt, accel, VelocityFrame::Parent);
}

}  // namespace dqtrack
