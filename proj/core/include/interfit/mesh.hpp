#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "interfit/geometry.hpp"

namespace interfit {

using Face = std::array<int, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  bool watertight = false;

  bool empty() const { return vertices.empty() || faces.empty(); }

  /// Checks index bounds, degenerate faces and, if `watertight` is set, that
  /// every undirected edge is used by exactly two faces.
  void validate() const;
};

/// True when every undirected edge is shared by exactly two faces.
bool is_closed_manifold(const TriMesh& mesh);

/// Euler characteristic V - E + F.
int euler_characteristic(const TriMesh& mesh);

TriMesh transformed(const TriMesh& mesh, const RigidTransform& pose);

/// Faces whose three vertices all belong to `vertex_ids`.
std::vector<int> faces_within(const TriMesh& mesh, std::span<const int> vertex_ids);

struct ClosestPoint {
  double distance = 0.0;
  Vec3 point = Vec3::Zero();
  int face = -1;
};

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Exhaustive scan over `faces` (all faces when empty).
ClosestPoint closest_point_exhaustive(const Vec3& p, const TriMesh& mesh,
                                      std::span<const int> faces = {});

/// Closest-point queries against a fixed triangle set, backed by an R-tree of
/// triangle bounding boxes. Immutable and cheap to copy.
class MeshIndex {
 public:
  MeshIndex() = default;
  explicit MeshIndex(const TriMesh& mesh, std::span<const int> faces = {});

  bool empty() const { return impl_ == nullptr; }
  ClosestPoint closest(const Vec3& p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Distance from p to the surface of `mesh` and the point realizing it.
ClosestPoint point_to_mesh(const Vec3& p, const TriMesh& mesh);

/// Mean squared closest distance from each source to the surface spanned by
/// `faces` of `target` (all faces when empty).
double chamfer(std::span<const Vec3> sources, const TriMesh& target,
               std::span<const int> faces = {});

/// Nearest-point queries over a fixed point set (R-tree backed).
class PointIndex {
 public:
  PointIndex() = default;
  explicit PointIndex(std::span<const Vec3> points);

  bool empty() const { return impl_ == nullptr; }
  std::size_t size() const;
  /// Index into the constructor's point list and the distance to it.
  std::pair<int, double> nearest(const Vec3& p) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Möller-Trumbore ray/triangle test; returns the ray parameter of the hit.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c);

/// Point-in-solid by ray parity (majority over three fixed directions).
/// Requires a watertight mesh.
bool inside_mesh(const Vec3& p, const TriMesh& mesh);

/// Accelerated inside/penetration queries against a watertight mesh in its
/// local frame.
class SolidIndex {
 public:
  SolidIndex() = default;
  explicit SolidIndex(const TriMesh& mesh);

  bool empty() const { return surface_.empty(); }
  bool inside(const Vec3& p) const;
  /// Distance to the surface for inside points, nullopt otherwise.
  std::optional<ClosestPoint> penetration(const Vec3& p) const;
  const TriMesh& mesh() const { return *mesh_; }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  MeshIndex surface_;
  Vec3 lo_ = Vec3::Zero();
  Vec3 hi_ = Vec3::Zero();
};

}  // namespace interfit
