#include "interfit/geometry.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace interfit {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

namespace {

// Coefficients of R = I + a K + b K^2 and their radial derivatives divided by
// theta (c = a'/theta, d = b'/theta).
struct RodriguesCoeffs {
  double a, b, c, d;
};

RodriguesCoeffs rodrigues_coeffs(double theta) {
  const double t2 = theta * theta;
  if (theta < 1e-2) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0, 0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0, -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0};
  }
  const double s = std::sin(theta);
  const double half = std::sin(0.5 * theta);
  const double one_minus_cos = 2.0 * half * half;
  const double a = s / theta;
  const double b = one_minus_cos / t2;
  const double c = (theta * std::cos(theta) - s) / (t2 * theta);
  const double d = (theta * s - 2.0 * one_minus_cos) / (t2 * t2);
  return {a, b, c, d};
}

}  // namespace

Mat3 rodrigues(const Vec3& w) {
  const RodriguesCoeffs k = rodrigues_coeffs(w.norm());
  const Mat3 kx = skew(w);
  return Mat3::Identity() + k.a * kx + k.b * kx * kx;
}

std::array<Mat3, 3> rodrigues_derivatives(const Vec3& w) {
  const RodriguesCoeffs k = rodrigues_coeffs(w.norm());
  const Mat3 kx = skew(w);
  const Mat3 kx2 = kx * kx;
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    out[i] = k.a * e + k.b * (e * kx + kx * e) + (k.c * w[i]) * kx + (k.d * w[i]) * kx2;
  }
  return out;
}

Vec3 log_rotation(const Mat3& r) {
  const Eigen::AngleAxisd aa{Eigen::Quaterniond(r).normalized()};
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > M_PI) {
    angle = 2.0 * M_PI - angle;
    axis = -axis;
  }
  return axis * angle;
}

double rotation_distance(const Mat3& a, const Mat3& b) {
  return log_rotation(a.transpose() * b).norm();
}

// ---------------------------------------------------------------------------

RigidTransform RigidTransform::from_matrix(const Mat3& r, const Vec3& t) {
  return {log_rotation(r), t};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = matrix().transpose();
  return {-rotation, -(rt * translation)};
}

Eigen::Matrix<double, 6, 1> RigidTransform::as_vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << rotation, translation;
  return v;
}

RigidTransform RigidTransform::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != 6) throw DomainError("rigid transform vector must have 6 entries");
  return {v.head<3>(), v.tail<3>()};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 ra = a.matrix();
  return RigidTransform::from_matrix(ra * b.matrix(), ra * b.translation + a.translation);
}

Eigen::Matrix<double, 3, 6> transform_point_jacobian(const RigidTransform& xi, const Vec3& local) {
  const auto dr = rodrigues_derivatives(xi.rotation);
  Eigen::Matrix<double, 3, 6> j;
  for (int k = 0; k < 3; ++k) j.col(k) = dr[k] * local;
  j.rightCols<3>().setIdentity();
  return j;
}

// ---------------------------------------------------------------------------

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DomainError("camera image size must be positive");
}

Vec2 PinholeCamera::project_camera_point(const Vec3& c) const {
  if (!(c.z() > 0.0)) throw ProjectionError("point is behind the camera");
  return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy};
}

Vec2 PinholeCamera::project(const Vec3& world) const {
  return project_camera_point(to_camera(world));
}

Vec3 PinholeCamera::backproject(double u, double v, double depth) const {
  const Vec3 c{(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
  return extrinsic.inverse().apply(c);
}

Vec3 PinholeCamera::center() const { return extrinsic.inverse().translation; }

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     double fx, double fy, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  PinholeCamera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  cam.extrinsic = RigidTransform::from_matrix(r, -(r * eye));
  return cam;
}

// ---------------------------------------------------------------------------

std::string_view label_name(SegmentLabel label) {
  switch (label) {
    case SegmentLabel::body: return "body";
    case SegmentLabel::object: return "object";
    case SegmentLabel::ground: return "ground";
    case SegmentLabel::other: return "other";
  }
  return "other";
}

SegmentLabel parse_label(std::string_view name) {
  if (name == "body") return SegmentLabel::body;
  if (name == "object") return SegmentLabel::object;
  if (name == "ground") return SegmentLabel::ground;
  if (name == "other") return SegmentLabel::other;
  throw DomainError("unknown segment label '" + std::string(name) + "'");
}

void PointCloud::validate() const {
  if (labels.size() != points.size()) throw DomainError("point cloud labels/points size mismatch");
}

std::vector<Vec3> PointCloud::with_label(SegmentLabel label) const {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (labels[i] == label) out.push_back(points[i]);
  return out;
}

void GroundPlane::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw DomainError("ground plane normal is not unit");
}

GroundPlane fit_ground_plane(std::span<const Vec3> points, const Vec3* positive_side) {
  if (points.size() < 3) throw DomainError("plane fit needs at least three points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * std::max(ev[2], std::numeric_limits<double>::min())) || ev[2] <= 0.0)
    throw DomainError("plane fit input is degenerate (collinear points)");
  Vec3 n = eig.eigenvectors().col(0).normalized();
  if (positive_side != nullptr) {
    if (n.dot(*positive_side - centroid) < 0.0) n = -n;
  } else if (n.z() < 0.0) {
    n = -n;
  }
  return {centroid, n};
}

GroundPlane fit_ground_plane(const PointCloud& cloud) {
  cloud.validate();
  std::vector<Vec3> ground;
  Vec3 reference = Vec3::Zero();
  std::size_t n_ref = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    switch (cloud.labels[i]) {
      case SegmentLabel::ground: ground.push_back(cloud.points[i]); break;
      case SegmentLabel::body:
      case SegmentLabel::object:
        reference += cloud.points[i];
        ++n_ref;
        break;
      default: break;
    }
  }
  if (n_ref == 0) return fit_ground_plane(ground);
  reference /= static_cast<double>(n_ref);
  return fit_ground_plane(ground, &reference);
}

double plane_residual(std::span<const Vec3> points, const GroundPlane& plane) {
  if (points.empty()) return 0.0;
  double acc = 0.0;
  for (const Vec3& p : points) {
    const double d = plane.signed_distance(p);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

}  // namespace interfit
