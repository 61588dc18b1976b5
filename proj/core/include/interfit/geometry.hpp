#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace interfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised when an operation's precondition on its inputs does not hold.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A point could not be projected because it lies at or behind the image plane.
class ProjectionError : public DomainError {
 public:
  using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Rotations

Mat3 skew(const Vec3& v);

/// Rotation matrix of an axis-angle vector (Rodrigues).
Mat3 rodrigues(const Vec3& axis_angle);

/// d rodrigues(w) / d w_k for k = 0, 1, 2. Stable through w = 0.
std::array<Mat3, 3> rodrigues_derivatives(const Vec3& axis_angle);

/// Inverse of rodrigues; the result has norm in [0, pi].
Vec3 log_rotation(const Mat3& rotation);

/// Geodesic angle between two rotation matrices, radians.
double rotation_distance(const Mat3& a, const Mat3& b);

// ---------------------------------------------------------------------------

/// 6-DoF rigid motion x -> R(rotation) x + translation.
struct RigidTransform {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Mat3& r, const Vec3& t);

  Mat3 matrix() const { return rodrigues(rotation); }
  Vec3 apply(const Vec3& p) const { return matrix() * p + translation; }
  RigidTransform inverse() const;

  /// Packs as [rotation; translation].
  Eigen::Matrix<double, 6, 1> as_vector() const;
  static RigidTransform from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
};

/// a after b: compose(a, b).apply(x) == a.apply(b.apply(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Jacobian of T(xi).apply(local) with respect to the packed 6-vector xi.
Eigen::Matrix<double, 3, 6> transform_point_jacobian(const RigidTransform& xi,
                                                     const Vec3& local);

// ---------------------------------------------------------------------------

struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  RigidTransform extrinsic;  // world -> camera

  void validate() const;

  Vec3 to_camera(const Vec3& world) const { return extrinsic.apply(world); }

  /// Projects a world point; throws ProjectionError for depth <= 0.
  Vec2 project(const Vec3& world) const;
  Vec2 project_camera_point(const Vec3& cam) const;

  /// World point at pixel (u, v) with camera-frame depth z.
  Vec3 backproject(double u, double v, double depth) const;

  Vec3 center() const;

  /// Camera at `eye` looking at `target` with world `up`; OpenCV axes (x right, y down, z forward).
  static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                               double fy, int width, int height);
};

// ---------------------------------------------------------------------------

enum class SegmentLabel : std::uint8_t { body = 0, object = 1, ground = 2, other = 3 };

std::string_view label_name(SegmentLabel label);
SegmentLabel parse_label(std::string_view name);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<SegmentLabel> labels;

  void validate() const;
  std::size_t size() const { return points.size(); }
  std::vector<Vec3> with_label(SegmentLabel label) const;
};

struct GroundPlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();

  void validate() const;
  double signed_distance(const Vec3& p) const { return normal.dot(p - point); }
};

/// Least-squares plane through `points`; the normal is flipped so that
/// `positive_side` (when given) has a positive signed distance.
GroundPlane fit_ground_plane(std::span<const Vec3> points, const Vec3* positive_side = nullptr);

/// Ground plane from the ground-labelled points of a cloud, oriented toward
/// the centroid of the body and object points.
GroundPlane fit_ground_plane(const PointCloud& cloud);

/// Root-mean-square point-to-plane distance.
double plane_residual(std::span<const Vec3> points, const GroundPlane& plane);

}  // namespace interfit
