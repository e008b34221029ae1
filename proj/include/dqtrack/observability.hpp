#pragma once

// Observability codistributions for three-marker position-vector and
// unit-vector measurements of a target pose relative to a camera.
//
// Column order of every codistribution is (q, mu, omega, beta), 4 columns
// each, quaternion components scalar-first. omega and beta are vector
// quaternions so their scalar columns are structurally zero in the
// measurement Jacobians; they are kept to match the 16-column layout.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dqtrack/dualquat.hpp"

namespace dqtrack {

constexpr double kRankRelTol = 1e-10;
constexpr double kCollinearTol = 1e-9;
constexpr double kDepthTol = 1e-6;

/// (q, mu, omega, beta) with mu = 1/2 r q and beta = v - omega x r.
class TransformedState {
 public:
  // Throws std::domain_error when 2 mu q* has a scalar part above 1e-9.
  TransformedState(const UnitQuaternion& q, const Quaternion& mu, const Vec3& omega,
                   const Vec3& beta);
  static TransformedState from(const DualPose& pose, const DualVelocity& vel);

  const UnitQuaternion& q() const { return q_; }
  const Quaternion& mu() const { return mu_; }
  const Vec3& omega() const { return omega_; }
  const Vec3& beta() const { return beta_; }
  DualQuaternion pose_dq() const { return {q_.quat(), mu_}; }
  // Stacked 16-vector in codistribution column order.
  Vec16 coeffs() const;

 private:
  UnitQuaternion q_;
  Quaternion mu_;
  Vec3 omega_;
  Vec3 beta_;
};

struct MarkerSet {
  std::vector<Vec3> points;

  // Throws std::invalid_argument if empty or non-finite.
  void validate() const;
  bool has_duplicates(double tol = 1e-12) const;
};

struct CodistributionReport {
  int rows = 0;
  int cols = 0;
  VecX singular_values;  // descending
  int rank = 0;
  double threshold = 0.0;
  bool observable = false;
  std::vector<int> witnesses;  // indices of singular values at or below threshold

  std::string verdict() const { return observable ? "observable" : "deficient"; }
};

struct CodistributionOptions {
  double rank_rel_tol = kRankRelTol;
  double depth_tol = kDepthTol;
  // Fill the lower-left block with central-difference Lie derivatives
  // instead of zeros. Diagnostics only.
  bool fill_star = false;
  double fd_step = 1e-6;
};

// SVD rank with threshold max(rows, cols) * sigma_1 * rel_tol. Full column
// rank is reported as observable.
CodistributionReport analyze_rank(const MatX& m, double rel_tol = kRankRelTol);

// K(b) = [[0, 0], [v_b, -s_b I - [v_b]x]]
Mat4 k_matrix(const Quaternion& b);
// Q(q) = [q^T; 0]
Mat4 q_function(const Quaternion& q);
// d(a* a)/da = 2 Q(a)
Mat4 q_constraint_jacobian(const Quaternion& q);
// Jacobian of r / |r| with respect to the quaternion r = [0, r]:
// (I4 - u u^T) / |r| with u = [0, r] / |r|. Throws PositiveDepthError if
// |r| <= depth_tol.
Mat4 unit_vector_jacobian(const Vec3& r, double depth_tol = kDepthTol);

// 2 mu q* + q m q*, valid for any (q, mu).
Vec3 marker_position(const Quaternion& q, const Quaternion& mu, const Vec3& marker);

// One 4x8 block row [K(q m) + L(mu) C, R(q*)].
Eigen::Matrix<double, 4, 8> delta_block(const Quaternion& q, const Quaternion& mu,
                                        const Vec3& marker);

// Exactly three markers (std::invalid_argument otherwise).
MatX delta_matrix(const TransformedState& ts, std::span<const Vec3> markers);
MatX position_codistribution_matrix(const TransformedState& ts, std::span<const Vec3> markers,
                                    const CodistributionOptions& opts = {});
CodistributionReport position_codistribution(const TransformedState& ts,
                                             std::span<const Vec3> markers,
                                             const CodistributionOptions& opts = {});

// Gamma = [I4 0; Delta], 16x8.
MatX lambda_matrix(const TransformedState& ts, std::span<const Vec3> markers);
// blkdiag(Q(q), J_rho(r_1), J_rho(r_2), J_rho(r_3)), 16x16.
MatX pi_matrix(const TransformedState& ts, std::span<const Vec3> markers,
               double depth_tol = kDepthTol);
MatX omega_matrix(const TransformedState& ts, std::span<const Vec3> markers,
                  double depth_tol = kDepthTol);
MatX unitvector_codistribution_matrix(const TransformedState& ts, std::span<const Vec3> markers,
                                      const CodistributionOptions& opts = {});
CodistributionReport unitvector_codistribution(const TransformedState& ts,
                                               std::span<const Vec3> markers,
                                               const CodistributionOptions& opts = {});

// Same constructions over any number (>= 1) of markers.
MatX delta_matrix_stacked(const TransformedState& ts, std::span<const Vec3> markers);
MatX omega_matrix_stacked(const TransformedState& ts, std::span<const Vec3> markers,
                          double depth_tol = kDepthTol);

enum class MeasurementKind { Position, UnitVector };

MatX codistribution_stacked(const TransformedState& ts, std::span<const Vec3> markers,
                            MeasurementKind kind, const CodistributionOptions& opts = {});

struct CollinearityResult {
  bool collinear = true;
  double margin = 0.0;               // |(p2 - p1) x (p3 - p1)|, best triple
  std::array<int, 3> triple{0, 1, 2};  // indices of the best triple
};

// Throws InsufficientMarkersError for fewer than three points.
CollinearityResult collinearity_check(std::span<const Vec3> markers,
                                      double col_tol = kCollinearTol);

struct ObservabilityReport {
  MeasurementKind kind = MeasurementKind::UnitVector;
  int marker_count = 0;
  CollinearityResult geometry;
  bool has_triple = false;
  CodistributionReport best_triple;  // valid when has_triple
  CodistributionReport stacked;
  bool observable() const { return has_triple ? best_triple.observable : false; }
};

// Best-conditioned triple plus the all-marker stacked variant. With fewer
// than three markers only the stacked report is filled and the verdict is
// deficient.
ObservabilityReport analyze_observability(const TransformedState& ts,
                                          std::span<const Vec3> markers, MeasurementKind kind,
                                          const CodistributionOptions& opts = {});

}  // namespace dqtrack
