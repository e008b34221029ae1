#include "dqtrack/observability.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "dqtrack/errors.hpp"

namespace dqtrack {

TransformedState::TransformedState(const UnitQuaternion& q, const Quaternion& mu,
                                   const Vec3& omega, const Vec3& beta)
    : q_(q), mu_(mu), omega_(omega), beta_(beta) {
  if (std::abs((2.0 * (mu * conj(q.quat()))).s()) > 1e-9) {
    throw std::domain_error("mu is not consistent with a translation");
  }
  if (!omega.allFinite() || !beta.allFinite()) {
    throw std::invalid_argument("velocity components must be finite");
  }
}

TransformedState TransformedState::from(const DualPose& pose, const DualVelocity& vel) {
  return {UnitQuaternion(pose.real()), pose.dual(), vel.real(), vel.dual()};
}

Vec16 TransformedState::coeffs() const {
  Vec16 x;
  x << q_.quat().coeffs(), mu_.coeffs(), 0.0, omega_, 0.0, beta_;
  return x;
}

void MarkerSet::validate() const {
  if (points.empty()) throw std::invalid_argument("marker set is empty");
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("marker coordinates must be finite");
  }
}

bool MarkerSet::has_duplicates(double tol) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if ((points[i] - points[j]).norm() <= tol) return true;
    }
  }
  return false;
}

CodistributionReport analyze_rank(const MatX& m, double rel_tol) {
  CodistributionReport rep;
  rep.rows = static_cast<int>(m.rows());
  rep.cols = static_cast<int>(m.cols());
  const Eigen::JacobiSVD<MatX> svd(m);
  rep.singular_values = svd.singularValues();
  const double s1 = rep.singular_values.size() > 0 ? rep.singular_values[0] : 0.0;
  rep.threshold = std::max(rep.rows, rep.cols) * s1 * rel_tol;
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i) {
    if (rep.singular_values[i] > rep.threshold) {
      ++rep.rank;
    } else {
      rep.witnesses.push_back(static_cast<int>(i));
    }
  }
  rep.observable = s1 > 0.0 && rep.rank == rep.cols;
  return rep;
}

Mat4 k_matrix(const Quaternion& b) {
  Mat4 k = Mat4::Zero();
  k.block<3, 1>(1, 0) = b.v();
  k.block<3, 3>(1, 1) = -b.s() * Mat3::Identity() - skew(b.v());
  return k;
}

Mat4 q_function(const Quaternion& q) {
  Mat4 m = Mat4::Zero();
  m.row(0) = q.coeffs().transpose();
  return m;
}

Mat4 q_constraint_jacobian(const Quaternion& q) { return 2.0 * q_function(q); }

namespace {

// Normalization Jacobian of a general quaternion; off the manifold the
// measured quaternion picks up a scalar part that the star block sees.
Mat4 normalization_jacobian(const Vec4& r, double depth_tol) {
  const double n = r.norm();
  if (!(n > depth_tol)) throw PositiveDepthError("marker range below depth tolerance");
  const Vec4 u = r / n;
  return (Mat4::Identity() - u * u.transpose()) / n;
}

Quaternion measured_quaternion(const Quaternion& q, const Quaternion& mu, const Vec3& marker) {
  return 2.0 * (mu * conj(q)) + q * Quaternion::pure(marker) * conj(q);
}

}  // namespace

Mat4 unit_vector_jacobian(const Vec3& r, double depth_tol) {
  return normalization_jacobian(Quaternion::pure(r).coeffs(), depth_tol);
}

Vec3 marker_position(const Quaternion& q, const Quaternion& mu, const Vec3& marker) {
  return measured_quaternion(q, mu, marker).v();
}

Eigen::Matrix<double, 4, 8> delta_block(const Quaternion& q, const Quaternion& mu,
                                        const Vec3& marker) {
  Eigen::Matrix<double, 4, 8> b;
  b.leftCols<4>() = k_matrix(q * Quaternion::pure(marker)) + left_matrix(mu) * conj_matrix();
  b.rightCols<4>() = right_matrix(conj(q));
  return b;
}

namespace {

void require_three(std::span<const Vec3> markers) {
  if (markers.size() != 3) throw std::invalid_argument("exactly three markers required");
}

void require_some(std::span<const Vec3> markers) {
  if (markers.empty()) throw InsufficientMarkersError("at least one marker required");
}

MatX delta_raw(const Quaternion& q, const Quaternion& mu, std::span<const Vec3> markers) {
  MatX d(4 * markers.size(), 8);
  for (std::size_t i = 0; i < markers.size(); ++i) {
    d.middleRows<4>(4 * i) = delta_block(q, mu, markers[i]);
  }
  return d;
}

MatX lambda_raw(const Quaternion& q, const Quaternion& mu, std::span<const Vec3> markers) {
  MatX g = MatX::Zero(4 + 4 * markers.size(), 8);
  g.topLeftCorner<4, 4>().setIdentity();
  g.bottomRows(4 * markers.size()) = delta_raw(q, mu, markers);
  return g;
}

MatX pi_raw(const Quaternion& q, const Quaternion& mu, std::span<const Vec3> markers,
            double depth_tol) {
  const Eigen::Index n = 4 + 4 * static_cast<Eigen::Index>(markers.size());
  MatX p = MatX::Zero(n, n);
  p.topLeftCorner<4, 4>() = q_function(q);
  for (std::size_t i = 0; i < markers.size(); ++i) {
    p.block<4, 4>(4 + 4 * i, 4 + 4 * i) =
        normalization_jacobian(measured_quaternion(q, mu, markers[i]).coeffs(), depth_tol);
  }
  return p;
}

// Diagonal block B of the codistribution: the zeroth-order Jacobian with
// respect to (q, mu) is 2 B.
MatX diagonal_block(const Quaternion& q, const Quaternion& mu, std::span<const Vec3> markers,
                    MeasurementKind kind, double depth_tol) {
  if (kind == MeasurementKind::Position) return delta_raw(q, mu, markers);
  return pi_raw(q, mu, markers, depth_tol) * lambda_raw(q, mu, markers);
}

// First-order Lie derivative J0(x) f(x) with q' = 1/2 w q and
// mu' = 1/2 (beta q + w mu).
VecX first_lie(const Vec16& x, std::span<const Vec3> markers, MeasurementKind kind,
               double depth_tol) {
  const Quaternion q = Quaternion::from_coeffs(x.segment<4>(0));
  const Quaternion mu = Quaternion::from_coeffs(x.segment<4>(4));
  const Quaternion w = Quaternion::from_coeffs(x.segment<4>(8));
  const Quaternion beta = Quaternion::from_coeffs(x.segment<4>(12));
  Vec8 f;
  f << (0.5 * (w * q)).coeffs(), (0.5 * (beta * q + w * mu)).coeffs();
  return 2.0 * diagonal_block(q, mu, markers, kind, depth_tol) * f;
}

MatX star_block(const TransformedState& ts, std::span<const Vec3> markers, MeasurementKind kind,
                const CodistributionOptions& opts) {
  const Vec16 x0 = ts.coeffs();
  const VecX l0 = first_lie(x0, markers, kind, opts.depth_tol);
  MatX star(l0.size(), 8);
  for (int i = 0; i < 8; ++i) {
    Vec16 xp = x0, xm = x0;
    xp[i] += opts.fd_step;
    xm[i] -= opts.fd_step;
    star.col(i) = (first_lie(xp, markers, kind, opts.depth_tol) -
                   first_lie(xm, markers, kind, opts.depth_tol)) /
                  (2.0 * opts.fd_step);
  }
  return star;
}

MatX assemble(const TransformedState& ts, std::span<const Vec3> markers, MeasurementKind kind,
              const CodistributionOptions& opts) {
  const Quaternion& q = ts.q().quat();
  const MatX b = diagonal_block(q, ts.mu(), markers, kind, opts.depth_tol);
  const Eigen::Index r = b.rows();
  MatX o = MatX::Zero(2 * r, 16);
  o.topLeftCorner(r, 8) = 2.0 * b;
  o.bottomRightCorner(r, 8) = b * dq_right_matrix(ts.pose_dq());
  if (opts.fill_star) o.bottomLeftCorner(r, 8) = star_block(ts, markers, kind, opts);
  return o;
}

}  // namespace

MatX delta_matrix(const TransformedState& ts, std::span<const Vec3> markers) {
  require_three(markers);
  return delta_raw(ts.q().quat(), ts.mu(), markers);
}

MatX position_codistribution_matrix(const TransformedState& ts, std::span<const Vec3> markers,
                                    const CodistributionOptions& opts) {
  require_three(markers);
  return assemble(ts, markers, MeasurementKind::Position, opts);
}

CodistributionReport position_codistribution(const TransformedState& ts,
                                             std::span<const Vec3> markers,
                                             const CodistributionOptions& opts) {
  return analyze_rank(position_codistribution_matrix(ts, markers, opts), opts.rank_rel_tol);
}

MatX lambda_matrix(const TransformedState& ts, std::span<const Vec3> markers) {
  require_three(markers);
  return lambda_raw(ts.q().quat(), ts.mu(), markers);
}

MatX pi_matrix(const TransformedState& ts, std::span<const Vec3> markers, double depth_tol) {
  require_three(markers);
  return pi_raw(ts.q().quat(), ts.mu(), markers, depth_tol);
}

MatX omega_matrix(const TransformedState& ts, std::span<const Vec3> markers, double depth_tol) {
  require_three(markers);
  return pi_matrix(ts, markers, depth_tol) * lambda_matrix(ts, markers);
}

MatX unitvector_codistribution_matrix(const TransformedState& ts, std::span<const Vec3> markers,
                                      const CodistributionOptions& opts) {
  require_three(markers);
  return assemble(ts, markers, MeasurementKind::UnitVector, opts);
}

CodistributionReport unitvector_codistribution(const TransformedState& ts,
                                               std::span<const Vec3> markers,
                                               const CodistributionOptions& opts) {
  return analyze_rank(unitvector_codistribution_matrix(ts, markers, opts), opts.rank_rel_tol);
}

MatX delta_matrix_stacked(const TransformedState& ts, std::span<const Vec3> markers) {
  require_some(markers);
  return delta_raw(ts.q().quat(), ts.mu(), markers);
}

MatX omega_matrix_stacked(const TransformedState& ts, std::span<const Vec3> markers,
                          double depth_tol) {
  require_some(markers);
  return diagonal_block(ts.q().quat(), ts.mu(), markers, MeasurementKind::UnitVector, depth_tol);
}

MatX codistribution_stacked(const TransformedState& ts, std::span<const Vec3> markers,
                            MeasurementKind kind, const CodistributionOptions& opts) {
  require_some(markers);
  return assemble(ts, markers, kind, opts);
}

CollinearityResult collinearity_check(std::span<const Vec3> markers, double col_tol) {
  if (markers.size() < 3) throw InsufficientMarkersError("collinearity needs three markers");
  CollinearityResult best;
  best.margin = -1.0;
  const int n = static_cast<int>(markers.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        const double m = (markers[j] - markers[i]).cross(markers[k] - markers[i]).norm();
        if (m > best.margin) {
          best.margin = m;
          best.triple = {i, j, k};
        }
      }
    }
  }
  best.collinear = best.margin <= col_tol;
  return best;
}

ObservabilityReport analyze_observability(const TransformedState& ts,
                                          std::span<const Vec3> markers, MeasurementKind kind,
                                          const CodistributionOptions& opts) {
  require_some(markers);
  ObservabilityReport rep;
  rep.kind = kind;
  rep.marker_count = static_cast<int>(markers.size());
  rep.stacked = analyze_rank(codistribution_stacked(ts, markers, kind, opts), opts.rank_rel_tol);
  if (markers.size() >= 3) {
    rep.geometry = collinearity_check(markers);
    const std::array<Vec3, 3> triple{markers[rep.geometry.triple[0]],
                                     markers[rep.geometry.triple[1]],
                                     markers[rep.geometry.triple[2]]};
    rep.has_triple = true;
    rep.best_triple = analyze_rank(assemble(ts, triple, kind, opts), opts.rank_rel_tol);
  } else {
    rep.geometry.margin = 0.0;
    rep.geometry.collinear = true;
  }
  return rep;
}

}  // namespace dqtrack
