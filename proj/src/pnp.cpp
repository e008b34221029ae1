#include "dqtrack/pnp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dqtrack/errors.hpp"

namespace dqtrack {

namespace {

using Mat26 = Eigen::Matrix<double, 2, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 nearest_rotation(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 exp_so3(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

// Similarity that moves the centroid to the origin and scales the mean
// distance to sqrt(2).
Mat3 hartley(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const Vec2& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const Vec2& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 0.0 ? std::sqrt(2.0) / d : 1.0;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

Mat3 homography_dlt(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  const Mat3 ts = hartley(src), td = hartley(dst);
  const Eigen::Index n = static_cast<Eigen::Index>(src.size());
  MatX a = MatX::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 s = ts * src[i].homogeneous();
    const Vec3 d = td * dst[i].homogeneous();
    a.block<1, 3>(2 * i, 0) = s.transpose();
    a.block<1, 3>(2 * i, 6) = -d.x() * s.transpose();
    a.block<1, 3>(2 * i + 1, 3) = s.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -d.y() * s.transpose();
  }
  const Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
  const VecX h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return td.inverse() * hn * ts;
}

struct Plane {
  Vec3 centroid;
  Mat3 basis;  // columns e1, e2, normal
  double flatness;  // smallest / largest singular value
};

Plane fit_plane(std::span<const Vec3> points) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  c /= static_cast<double>(points.size());
  MatX m(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(i) = (points[i] - c).transpose();
  const Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullV);
  Mat3 b = svd.matrixV();
  b.col(2) = b.col(0).cross(b.col(1));
  const Vec3 s = svd.singularValues();
  return {c, b, s[0] > 0.0 ? s[2] / s[0] : 0.0};
}

Vec3 plane_normal(std::span<const Vec3> points) {
  return fit_plane(points).basis.col(2);
}

// Absolute orientation: R, t minimizing sum |R x_i + t - p_i|^2.
void kabsch(std::span<const Vec3> x, const std::vector<Vec3>& p, Mat3& R, Vec3& t) {
  Vec3 cx = Vec3::Zero(), cp = Vec3::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    cx += x[i];
    cp += p[i];
  }
  cx /= static_cast<double>(x.size());
  cp /= static_cast<double>(x.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) h += (x[i] - cx) * (p[i] - cp).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  R = svd.matrixV() * d * svd.matrixU().transpose();
  t = cp - R * cx;
}

bool positive_depth(const CameraModel& cam, std::span<const Vec3> points, const Mat3& R,
                    const Vec3& t) {
  for (const Vec3& x : points) {
    if (!((R * x + t).z() > cam.depth_tol)) return false;
  }
  return true;
}

// Grunert's quartic in the depth ratio v = s3 / s1 for three bearings.
// Real roots and near-real complex pairs (near-double roots of
// fronto-parallel views) are kept; u = s2 / s1 then follows from the law of
// cosines on both branches, and refinement plus reprojection error picks
// among the candidates.
std::vector<std::vector<Vec3>> three_point_candidates(std::span<const Vec3> x,
                                                      const std::array<Vec3, 3>& b) {
  const double a2 = (x[2] - x[1]).squaredNorm();
  const double b2 = (x[2] - x[0]).squaredNorm();
  const double c2 = (x[1] - x[0]).squaredNorm();
  const double ca = b[1].dot(b[2]), cb = b[0].dot(b[2]), cg = b[0].dot(b[1]);
  const double p = (a2 - c2) / b2, q = (a2 + c2) / b2;

  Eigen::Matrix<double, 5, 1> k;  // k[i] multiplies v^i
  k[4] = (p - 1) * (p - 1) - 4 * c2 / b2 * ca * ca;
  k[3] = 4 * (p * (1 - p) * cb - (1 - q) * ca * cg + 2 * c2 / b2 * ca * ca * cb);
  k[2] = 2 * (p * p - 1 + 2 * p * p * cb * cb + 2 * (b2 - c2) / b2 * ca * ca -
              4 * q * ca * cb * cg + 2 * (b2 - a2) / b2 * cg * cg);
  k[1] = 4 * (-p * (1 + p) * cb + 2 * a2 / b2 * cg * cg * cb - (1 - q) * ca * cg);
  k[0] = (1 + p) * (1 + p) - 4 * a2 / b2 * cg * cg;

  std::vector<double> vs;
  const double scale = k.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return {};
  if (std::abs(k[4]) > 1e-12 * scale) {
    Mat4 comp = Mat4::Zero();
    comp.block<3, 3>(1, 0) = Mat3::Identity();
    for (int i = 0; i < 4; ++i) comp(i, 3) = -k[i] / k[4];
    const Eigen::EigenSolver<Mat4> es(comp, false);
    for (int i = 0; i < 4; ++i) {
      const std::complex<double> r = es.eigenvalues()[i];
      if (std::abs(r.imag()) <= 1e-2 * (1.0 + std::abs(r.real()))) vs.push_back(r.real());
    }
  }

  std::vector<std::vector<Vec3>> out;
  for (double v : vs) {
    // Polish on the quartic; near-double roots stay near their real part.
    for (int it = 0; it < 20; ++it) {
      const double f = (((k[4] * v + k[3]) * v + k[2]) * v + k[1]) * v + k[0];
      const double df = ((4 * k[4] * v + 3 * k[3]) * v + 2 * k[2]) * v + k[1];
      if (!(std::abs(df) > 1e-300)) break;
      const double nv = v - f / df;
      if (!std::isfinite(nv) || std::abs(nv - v) > 0.1 * (1.0 + std::abs(v))) break;
      v = nv;
    }
    if (!(v > 0.0)) continue;
    const double denom = 1.0 + v * v - 2.0 * v * cb;
    if (!(denom > 0.0)) continue;
    const double s1 = std::sqrt(b2 / denom);
    // c^2 = s1^2 (1 + u^2 - 2 u cos(gamma))
    const double disc = std::max(0.0, cg * cg - 1.0 + c2 / (s1 * s1));
    for (int branch : {-1, 1}) {
      const double u = cg + branch * std::sqrt(disc);
      if (u > 0.0) out.push_back({s1 * b[0], u * s1 * b[1], v * s1 * b[2]});
      if (disc == 0.0) break;
    }
  }
  return out;
}

void check_inputs(std::span<const Vec3> points, std::span<const Vec2> pixels,
                  const PnpOptions& opts) {
  if (points.size() != pixels.size()) {
    throw std::invalid_argument("points and pixels differ in length");
  }
  const std::size_t need = opts.allow_three_point ? 3 : 4;
  if (points.size() < need) {
    throw InsufficientMarkersError("pnp needs at least " + std::to_string(need) + " points");
  }
  double margin = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      for (std::size_t k = j + 1; k < points.size(); ++k) {
        margin = std::max(
            margin, (points[j] - points[i]).cross(points[k] - points[i]).norm());
      }
    }
  }
  if (margin <= opts.collinear_tol) throw DegenerateConfigurationError("markers are collinear");
  if (points.size() > 3 && fit_plane(points).flatness > opts.coplanar_tol) {
    throw DegenerateConfigurationError("markers are not coplanar");
  }
}

PnpSolution make_solution(const Mat3& R, const Vec3& t, double rms, int iterations,
                          bool converged) {
  // Far-off candidates can carry |t| large enough that the orthogonality
  // check of pose_from trips on rounding alone.
  const Quaternion q = from_rotation_matrix(R).quat();
  return {normalize_pose({q, 0.5 * (Quaternion::pure(t) * q)}), rms, iterations, converged};
}

}  // namespace

double reprojection_rms(const CameraModel& cam, std::span<const Vec3> points,
                        std::span<const Vec2> pixels, const Mat3& R, const Vec3& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 p = R * points[i] + t;
    const Vec2 px(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
    sum += (px - pixels[i]).squaredNorm();
  }
  return std::sqrt(sum / (2.0 * static_cast<double>(points.size())));
}

PnpSolution refine_pose(const CameraModel& cam, std::span<const Vec3> points,
                        std::span<const Vec2> pixels, const Mat3& R0, const Vec3& t0,
                        const PnpOptions& opts) {
  Mat3 R = R0;
  Vec3 t = t0;
  double rms = reprojection_rms(cam, points, pixels, R, t);
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 rx = R * points[i];
      const Vec3 p = rx + t;
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz, 0.0, cam.fy * iz,
          -cam.fy * p.y() * iz * iz;
      Mat26 j;
      j.leftCols<3>() = -dpi * skew(rx);
      j.rightCols<3>() = dpi;
      const Vec2 r(cam.fx * p.x() * iz + cam.cx - pixels[i].x(),
                   cam.fy * p.y() * iz + cam.cy - pixels[i].y());
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Vec6 step = -h.ldlt().solve(g);
    if (!step.allFinite()) break;
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, alpha *= 0.5) {
      const Mat3 Rn = exp_so3(alpha * step.head<3>()) * R;
      const Vec3 tn = t + alpha * step.tail<3>();
      if (!positive_depth(cam, points, Rn, tn)) continue;
      const double rn = reprojection_rms(cam, points, pixels, Rn, tn);
      if (rn <= rms) {
        R = nearest_rotation(Rn);
        t = tn;
        rms = reprojection_rms(cam, points, pixels, R, t);
        accepted = true;
        break;
      }
    }
    if (!accepted || alpha * step.norm() < opts.step_tol) {
      converged = true;
      ++it;
      break;
    }
  }
  return make_solution(R, t, rms, it, converged);
}

PnpSolution solve_pnp(const CameraModel& cam, std::span<const Vec3> points,
                      std::span<const Vec2> pixels, const PnpOptions& opts) {
  check_inputs(points, pixels, opts);
  const Vec3 normal = plane_normal(points);

  PnpSolution best;
  double best_frontal = -1.0;
  bool found = false;
  auto consider = [&](const Mat3& R, const Vec3& t) {
    if (!positive_depth(cam, points, R, t)) return;
    const PnpSolution s = refine_pose(cam, points, pixels, R, t, opts);
    const Mat3 Rs = to_rotation_matrix(pose_rotation(s.pose));
    if (!positive_depth(cam, points, Rs, pose_translation_parent(s.pose))) return;
    const double frontal = std::abs((Rs * normal).z());
    const double tie = 1e-6;
    if (!found || s.rms < best.rms - tie ||
        (std::abs(s.rms - best.rms) <= tie && frontal > best_frontal)) {
      best = s;
      best_frontal = frontal;
      found = true;
    }
  };

  // Three-point seeds from every non-collinear triple. These also cover
  // four-point sets with a collinear triple, where the homography is
  // degenerate.
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      for (std::size_t k = j + 1; k < points.size(); ++k) {
        const std::array<Vec3, 3> tri{points[i], points[j], points[k]};
        const Vec3 tri_n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        if (tri_n.norm() <= opts.collinear_tol) continue;
        const Vec3 tri_normal = tri_n.normalized();
        const std::array<Vec3, 3> bearings{back_project(cam, pixels[i]),
                                           back_project(cam, pixels[j]),
                                           back_project(cam, pixels[k])};
        for (const std::vector<Vec3>& cand : three_point_candidates(tri, bearings)) {
          Mat3 R;
          Vec3 t;
          kabsch(tri, cand, R, t);
          consider(R, t);
          // Weak-perspective twin: the plane normal rotated half a turn about
          // the line of sight to the centroid. Recovers the partner of a
          // near-double root that the quartic merged.
          const Vec3 c = (tri[0] + tri[1] + tri[2]) / 3.0;
          const Vec3 d = (R * c + t).normalized();
          const Mat3 flip = Eigen::AngleAxisd(std::numbers::pi, d).toRotationMatrix();
          const Vec3 n = R * tri_normal;
          const Mat3 Rf = Eigen::Quaterniond::FromTwoVectors(n, flip * n).toRotationMatrix() * R;
          consider(Rf, R * c + t - Rf * c);
        }
      }
    }
  }

  if (points.size() >= 4) {
    const Plane plane = fit_plane(points);
    std::vector<Vec2> src, dst;
    for (std::size_t i = 0; i < points.size(); ++i) {
      src.push_back((plane.basis.transpose() * (points[i] - plane.centroid)).head<2>());
      dst.emplace_back((pixels[i].x() - cam.cx) / cam.fx, (pixels[i].y() - cam.cy) / cam.fy);
    }
    const Mat3 h = homography_dlt(src, dst);
    if (h.allFinite()) {
      const double scale = 2.0 / (h.col(0).norm() + h.col(1).norm());
      Mat3 m;
      m.col(0) = scale * h.col(0);
      m.col(1) = scale * h.col(1);
      Vec3 tp = scale * h.col(2);
      if (tp.z() < 0.0) {
        m = -m;
        tp = -tp;
      }
      m.col(2) = m.col(0).cross(m.col(1));
      const Mat3 Rp = nearest_rotation(m);
      // camera = Rp B^T (x - c) + tp
      const Mat3 R = Rp * plane.basis.transpose();
      consider(R, tp - R * plane.centroid);
    }
  }

  if (!found) throw DegenerateConfigurationError("no positive-depth pose candidate");
  return best;
}

}  // namespace dqtrack
