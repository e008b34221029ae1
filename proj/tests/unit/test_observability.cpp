#include <array>
#include <vector>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "dqtrack/errors.hpp"
#include "dqtrack/observability.hpp"
#include "oracles.hpp"

using namespace dqtrack;

namespace {

const std::array<Vec3, 3> kPlanarTriple{Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, -1, 0)};
const std::array<Vec3, 3> kCollinear{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};

// Target roughly in front of the camera so every marker has positive depth.
TransformedState random_state(oracle::Rng& rng) {
  const UnitQuaternion q(Quaternion::from_coeffs(rng.unit_quat()));
  const Vec3 r = Vec3(0, 0, 8.0) + rng.vec3(2.0);
  const DualPose pose = pose_from(q, r);
  return TransformedState::from(pose, DualVelocity(rng.vec3(0.5), rng.vec3(1.0)));
}

oracle::Vec4 qmul(const oracle::Vec4& a, const oracle::Vec4& b) { return oracle::hamilton(a, b); }
oracle::Vec4 qconj(const oracle::Vec4& a) { return {a[0], -a[1], -a[2], -a[3]}; }
oracle::Vec4 pure(const Vec3& v) { return {0, v[0], v[1], v[2]}; }

// Quaternion-valued position measurement 2 mu q* + q m q* for raw (q, mu).
oracle::Vec4 h_position(const oracle::Vec4& q, const oracle::Vec4& mu, const Vec3& m) {
  return 2.0 * qmul(mu, qconj(q)) + qmul(qmul(q, pure(m)), qconj(q));
}

template <std::size_t N>
oracle::VecX zeroth(const oracle::VecX& x, const std::array<Vec3, N>& markers, bool unit) {
  const oracle::Vec4 q = x.segment<4>(0), mu = x.segment<4>(4);
  oracle::VecX out(unit ? 4 + 4 * N : 4 * N);
  int row = 0;
  if (unit) {
    out.segment<4>(0) = qmul(qconj(q), q) - oracle::Vec4(1, 0, 0, 0);
    row = 4;
  }
  for (const Vec3& m : markers) {
    const oracle::Vec4 h = h_position(q, mu, m);
    out.segment<4>(row) = unit ? oracle::Vec4(h / h.norm()) : h;
    row += 4;
  }
  return out;
}

// Vector field of the transformed kinematics (angular and translational
// accelerations do not enter the first-order Lie derivative).
oracle::VecX field(const oracle::VecX& x) {
  const oracle::Vec4 q = x.segment<4>(0), mu = x.segment<4>(4), w = x.segment<4>(8),
                     b = x.segment<4>(12);
  oracle::VecX f = oracle::VecX::Zero(16);
  f.segment<4>(0) = 0.5 * qmul(w, q);
  f.segment<4>(4) = 0.5 * (qmul(b, q) + qmul(w, mu));
  return f;
}

}  // namespace

TEST(KMatrix, ElementwiseForm) {
  const Quaternion b(0.3, -1.2, 0.7, 2.0);
  Mat4 expect;
  expect << 0, 0, 0, 0,
            -1.2, -0.3, 2.0, -0.7,
            0.7, -2.0, -0.3, -1.2,
            2.0, 0.7, 1.2, -0.3;
  EXPECT_LE((k_matrix(b) - expect).norm(), 1e-15);
  EXPECT_EQ(k_matrix(Quaternion::zero()), Mat4::Zero());
}

TEST(KMatrix, MatchesRightLeftDefinition) {
  // 2K(b) = R(-b*) + L(b) C
  oracle::Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const Quaternion b = Quaternion::from_coeffs(rng.vec4());
    const Mat4 ref = 0.5 * (right_matrix(-conj(b)) + left_matrix(b) * conj_matrix());
    EXPECT_LE((k_matrix(b) - ref).norm(), 1e-14);
  }
}

TEST(KMatrix, RankThreeForNonzeroProduct) {
  oracle::Rng rng(32);
  for (int i = 0; i < 10000; ++i) {
    const Quaternion q = Quaternion::from_coeffs(rng.unit_quat());
    Vec3 a = rng.vec3(3.0);
    if (a.norm() < 1e-3) a = Vec3::UnitX();
    const Eigen::JacobiSVD<Mat4> svd(k_matrix(q * Quaternion::pure(a)));
    const Vec4 s = svd.singularValues();
    ASSERT_GT(s[2], 1e-10 * s[0]);
    ASSERT_LT(s[3], 1e-10 * s[0]);
  }
}

TEST(KMatrix, Linearity) {
  oracle::Rng rng(33);
  const Quaternion q = Quaternion::from_coeffs(rng.unit_quat());
  const Quaternion a = Quaternion::from_coeffs(rng.vec4()), b = Quaternion::from_coeffs(rng.vec4());
  EXPECT_LE((k_matrix(q * a) - k_matrix(q * b) - k_matrix(q * (a - b))).norm(), 1e-14);
}

TEST(QFunction, NullspaceAndDerivative) {
  oracle::Rng rng(34);
  const Vec4 q = rng.unit_quat();
  const Mat4 Q = q_function(Quaternion::from_coeffs(q));
  EXPECT_EQ(q_function(Quaternion::one()).row(0), Eigen::RowVector4d(1, 0, 0, 0));
  const Eigen::JacobiSVD<Mat4> svd(Q, Eigen::ComputeFullV);
  EXPECT_NEAR(svd.singularValues()[0], 1.0, 1e-14);
  EXPECT_LT(svd.singularValues()[1], 1e-14);
  // SVD nullspace equals the orthogonal complement of q
  const Eigen::Matrix<double, 4, 3> N = svd.matrixV().rightCols<3>();
  EXPECT_LE((q.transpose() * N).norm(), 1e-14);
  const Mat4 P = Mat4::Identity() - q * q.transpose();
  EXPECT_LE((N * N.transpose() - P).norm(), 1e-12);

  const Vec4 a = rng.vec4(2.0);
  const auto f = [](const oracle::VecX& x) -> oracle::VecX {
    return qmul(qconj(x.head<4>()), x.head<4>());
  };
  const oracle::MatX J = oracle::central_jacobian(f, oracle::VecX(a));
  EXPECT_LE((J - q_constraint_jacobian(Quaternion::from_coeffs(a))).norm(), 1e-6);
}

TEST(UnitVectorJacobian, ProjectorProperties) {
  oracle::Rng rng(35);
  const Vec3 r = rng.vec3(4.0) + Vec3(0, 0, 5);
  const Mat4 J = unit_vector_jacobian(r);
  EXPECT_LE((J * pure(r)).norm(), 1e-14);
  const Mat4 Jz = unit_vector_jacobian(Vec3(0, 0, 4.0));
  EXPECT_LE((Jz.bottomRightCorner<3, 3>() - Vec3(0.25, 0.25, 0.0).asDiagonal().toDenseMatrix()).norm(),
            1e-15);
  const auto rho = [](const oracle::VecX& x) -> oracle::VecX { return x / x.norm(); };
  const oracle::MatX fd = oracle::central_jacobian(rho, oracle::VecX(pure(r)));
  EXPECT_LE((fd - J).norm(), 1e-6);
  // Nullspace is exactly span{r}.
  const Eigen::JacobiSVD<Mat4> svd(J);
  EXPECT_GT(svd.singularValues()[2], 1e-3);
  EXPECT_THROW(unit_vector_jacobian(Vec3(0, 0, 1e-7)), PositiveDepthError);
}

TEST(Delta, MatchesFiniteDifferenceOfMeasurement) {
  oracle::Rng rng(36);
  for (int i = 0; i < 20; ++i) {
    const TransformedState ts = random_state(rng);
    const std::array<Vec3, 3> markers{rng.vec3(), rng.vec3(), rng.vec3()};
    const auto h = [&](const oracle::VecX& x) { return zeroth(x, markers, false); };
    const oracle::MatX fd = oracle::central_jacobian(h, oracle::VecX(ts.coeffs().head<8>()));
    EXPECT_LE((fd - 2.0 * delta_matrix(ts, markers)).norm(), 1e-5);
  }
}

TEST(PositionCodistribution, RankDichotomy) {
  oracle::Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    const TransformedState ts = random_state(rng);
    EXPECT_EQ(analyze_rank(delta_matrix(ts, kPlanarTriple)).rank, 8);
    const CodistributionReport good = position_codistribution(ts, kPlanarTriple);
    EXPECT_EQ(good.rows, 24);
    EXPECT_EQ(good.cols, 16);
    EXPECT_EQ(good.rank, 16);
    EXPECT_TRUE(good.observable);
    const CodistributionReport bad = position_codistribution(ts, kCollinear);
    EXPECT_LT(bad.rank, 16);
    EXPECT_FALSE(bad.observable);
    EXPECT_FALSE(bad.witnesses.empty());
    EXPECT_LE(analyze_rank(delta_matrix(ts, kCollinear)).rank, 7);
    // Block-triangular rank composition with zeroed lower-left block.
    const MatX d = delta_matrix(ts, kCollinear);
    EXPECT_EQ(bad.rank, 2 * analyze_rank(d).rank);
  }
}

TEST(UnitVectorCodistribution, RankDichotomy) {
  oracle::Rng rng(38);
  for (int i = 0; i < 100; ++i) {
    const TransformedState ts = random_state(rng);
    EXPECT_EQ(analyze_rank(omega_matrix(ts, kPlanarTriple)).rank, 8);
    const CodistributionReport good = unitvector_codistribution(ts, kPlanarTriple);
    EXPECT_EQ(good.rows, 32);
    EXPECT_EQ(good.rank, 16);
    EXPECT_EQ(good.verdict(), "observable");
    const CodistributionReport bad = unitvector_codistribution(ts, kCollinear);
    EXPECT_LT(bad.rank, 16);
    EXPECT_EQ(bad.verdict(), "deficient");
    EXPECT_LT(analyze_rank(omega_matrix(ts, kCollinear)).rank, 8);
  }
}

TEST(UnitVectorCodistribution, PiNullspaceMissesGammaRange) {
  oracle::Rng rng(39);
  const TransformedState ts = random_state(rng);
  const MatX P = pi_matrix(ts, kPlanarTriple);
  const MatX G = lambda_matrix(ts, kPlanarTriple);
  EXPECT_LE((P * G - omega_matrix(ts, kPlanarTriple)).norm(), 1e-14);
  const Eigen::JacobiSVD<MatX> svd(P, Eigen::ComputeFullV);
  const CodistributionReport rp = analyze_rank(P);
  ASSERT_EQ(rp.rank, 10);  // 1 from Q(q), 3 per unit-vector block
  const MatX N = svd.matrixV().rightCols(16 - rp.rank);

  // Explicit basis: orthogonal complement of q, then each marker position.
  MatX B = MatX::Zero(16, 6);
  const Vec4 q = ts.q().quat().coeffs();
  const Eigen::JacobiSVD<Eigen::Matrix<double, 1, 4>> qs(q.transpose(), Eigen::ComputeFullV);
  B.block<4, 3>(0, 0) = qs.matrixV().rightCols<3>();
  for (int i = 0; i < 3; ++i) {
    B.block<4, 1>(4 + 4 * i, 3 + i) =
        pure(marker_position(ts.q().quat(), ts.mu(), kPlanarTriple[i])).normalized();
  }
  // Same subspace: projectors agree.
  const MatX PN = N * N.transpose();
  const MatX Bq = B.householderQr().householderQ() * MatX::Identity(16, 6);
  EXPECT_LE((PN - Bq * Bq.transpose()).norm(), 1e-10);

  // No basis vector of null(Pi) is in range(Gamma).
  for (int i = 0; i < B.cols(); ++i) {
    const oracle::VecX n = B.col(i);
    const oracle::VecX z = G.colPivHouseholderQr().solve(n);
    EXPECT_GT((G * z - n).norm(), 1e-8 * n.norm());
  }
}

TEST(Observability, VerdictIndependentOfPose) {
  oracle::Rng rng(40);
  for (int i = 0; i < 100; ++i) {
    const TransformedState ts = random_state(rng);
    EXPECT_TRUE(unitvector_codistribution(ts, kPlanarTriple).observable);
    EXPECT_FALSE(unitvector_codistribution(ts, kCollinear).observable);
  }
}

TEST(Observability, NearCollinearSweepIsMonotone) {
  oracle::Rng rng(41);
  const TransformedState ts = random_state(rng);
  double prev = 1e300;
  for (double eps : {1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 1e-3, 1e-4}) {
    const std::array<Vec3, 3> m{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, eps, 0)};
    const CodistributionReport rep = unitvector_codistribution(ts, m);
    const double smin = rep.singular_values[15];
    EXPECT_LT(smin, prev) << "eps=" << eps;
    prev = smin;
  }
}

TEST(Observability, DichotomyOverRandomMarkerSets) {
  oracle::Rng rng(42);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const TransformedState ts = random_state(rng);
    std::array<Vec3, 3> m{rng.vec3(), rng.vec3(), rng.vec3()};
    if (i % 2 == 0) m[2] = m[0] + rng.uniform(-2, 2) * (m[1] - m[0]);
    const CollinearityResult c = collinearity_check(m);
    if (c.margin > kCollinearTol && c.margin < 10 * kCollinearTol) continue;
    ++checked;
    EXPECT_EQ(unitvector_codistribution(ts, m).observable, !c.collinear);
    EXPECT_EQ(position_codistribution(ts, m).observable, !c.collinear);
  }
  EXPECT_GT(checked, 400);
}

TEST(Observability, StarBlockMatchesLieDerivatives) {
  oracle::Rng rng(43);
  CodistributionOptions opts;
  opts.fill_star = true;
  for (bool unit : {false, true}) {
    const TransformedState ts = random_state(rng);
    const oracle::VecX x0 = ts.coeffs();
    const auto l1 = [&](const oracle::VecX& x) -> oracle::VecX {
      const double tau = 1e-5;
      const oracle::VecX f = field(x);
      return (zeroth(oracle::VecX(x + tau * f), kPlanarTriple, unit) -
              zeroth(oracle::VecX(x - tau * f), kPlanarTriple, unit)) /
             (2 * tau);
    };
    const auto stacked = [&](const oracle::VecX& x) -> oracle::VecX {
      const oracle::VecX a = zeroth(x, kPlanarTriple, unit), b = l1(x);
      oracle::VecX out(a.size() + b.size());
      out << a, b;
      return out;
    };
    const oracle::MatX fd = oracle::central_jacobian(stacked, x0, 1e-4);
    const MatX O = unit ? unitvector_codistribution_matrix(ts, kPlanarTriple, opts)
                        : position_codistribution_matrix(ts, kPlanarTriple, opts);
    // Scalar columns of omega and beta are not part of the state manifold
    // but the formulas extend to them; compare everything.
    EXPECT_LE((fd - O).cwiseAbs().maxCoeff(), 1e-4) << (unit ? "unit" : "position");

    EXPECT_EQ(analyze_rank(O).rank, 16);
  }
}

TEST(Collinearity, Margins) {
  const std::array<Vec3, 3> a{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const CollinearityResult ra = collinearity_check(a);
  EXPECT_FALSE(ra.collinear);
  EXPECT_DOUBLE_EQ(ra.margin, 1.0);
  const CollinearityResult rb = collinearity_check(kCollinear);
  EXPECT_TRUE(rb.collinear);
  EXPECT_EQ(rb.margin, 0.0);
  const std::vector<Vec3> five{Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, -1, 0), Vec3(-1, 1, 0),
                               Vec3(-1, -1, 0)};
  const CollinearityResult rc = collinearity_check(five);
  EXPECT_FALSE(rc.collinear);
  EXPECT_DOUBLE_EQ(rc.margin, 4.0);
  const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(collinearity_check(two), InsufficientMarkersError);
}

TEST(Observability, MultiMarkerReport) {
  oracle::Rng rng(44);
  const TransformedState ts = random_state(rng);
  const std::vector<Vec3> five{Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, -1, 0), Vec3(-1, 1, 0),
                               Vec3(-1, -1, 0)};
  const ObservabilityReport r = analyze_observability(ts, five, MeasurementKind::UnitVector);
  EXPECT_TRUE(r.observable());
  EXPECT_TRUE(r.stacked.observable);
  EXPECT_EQ(r.stacked.rows, 2 * (4 + 4 * 5));
  const std::vector<Vec3> two{five[0], five[1]};
  const ObservabilityReport r2 = analyze_observability(ts, two, MeasurementKind::UnitVector);
  EXPECT_FALSE(r2.observable());
  EXPECT_FALSE(r2.stacked.observable);
}

// Coplanar markers facing the camera head-on: the first-order unit-vector
// codistribution loses a direction coupling rotation about y with
// translation along x. The block-triangular form (star block zeroed) loses
// its velocity counterpart too. Position measurements and a small tilt
// restore full rank.
TEST(Observability, FrontoParallelTripleIsDegenerate) {
  const std::array<Vec3, 3> m{Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, -1, 0)};
  const Quaternion mu = Quaternion::pure(Vec3(0, 0, 5.0));
  const TransformedState ts(UnitQuaternion::identity(), mu, Vec3(0, 0.125, -0.5),
                            Vec3(1.25, 0, -0.2));
  CodistributionOptions opts;
  opts.fill_star = true;
  const MatX O = unitvector_codistribution_matrix(ts, m, opts);
  const Eigen::JacobiSVD<MatX> svd(O, Eigen::ComputeFullV);
  EXPECT_EQ(analyze_rank(O).rank, 15);
  EXPECT_EQ(unitvector_codistribution(ts, m).rank, 14);

  const oracle::VecX x0 = ts.coeffs();
  const auto stacked = [&](const oracle::VecX& x) -> oracle::VecX {
    const double tau = 1e-5;
    const oracle::VecX f = field(x);
    const oracle::VecX a = zeroth(x, m, true);
    const oracle::VecX b = (zeroth(oracle::VecX(x + tau * f), m, true) -
                            zeroth(oracle::VecX(x - tau * f), m, true)) /
                           (2 * tau);
    oracle::VecX out(a.size() + b.size());
    out << a, b;
    return out;
  };
  const oracle::MatX fd = oracle::central_jacobian(stacked, x0, 1e-4);
  const oracle::VecX v = svd.matrixV().col(15);
  EXPECT_LE((fd * v).norm(), 1e-6 * fd.norm());
  EXPECT_LT(Eigen::JacobiSVD<oracle::MatX>(fd).singularValues()[15], 1e-6 * fd.norm());

  EXPECT_EQ(position_codistribution(ts, m).rank, 16);
  const TransformedState tilted(from_axis_angle(Vec3(1, 0, 0), 0.05), mu, Vec3(0, 0.125, -0.5),
                                Vec3(1.25, 0, -0.2));
  EXPECT_EQ(unitvector_codistribution(tilted, m).rank, 16);
}
