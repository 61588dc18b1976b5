#include "interfit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/point.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace interfit {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using BBox = bg::model::box<BPoint>;

BPoint to_bpoint(const Vec3& v) { return BPoint(v.x(), v.y(), v.z()); }

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const Face& f : faces) {
    for (int idx : f)
      if (idx < 0 || idx >= n) throw DomainError("face index out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw DomainError("face repeats a vertex");
  }
  if (watertight && !is_closed_manifold(*this))
    throw DomainError("mesh flagged watertight has an edge not shared by exactly two faces");
}

bool is_closed_manifold(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> uses;
  for (const Face& f : mesh.faces)
    for (int k = 0; k < 3; ++k) ++uses[edge_key(f[k], f[(k + 1) % 3])];
  return !uses.empty() &&
         std::all_of(uses.begin(), uses.end(), [](const auto& e) { return e.second == 2; });
}

int euler_characteristic(const TriMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const Face& f : mesh.faces)
    for (int k = 0; k < 3; ++k) edges.insert(edge_key(f[k], f[(k + 1) % 3]));
  return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(mesh.faces.size());
}

TriMesh transformed(const TriMesh& mesh, const RigidTransform& pose) {
  TriMesh out = mesh;
  const Mat3 r = pose.matrix();
  for (Vec3& v : out.vertices) v = r * v + pose.translation;
  return out;
}

std::vector<int> faces_within(const TriMesh& mesh, std::span<const int> vertex_ids) {
  std::vector<char> member(mesh.vertices.size(), 0);
  for (int id : vertex_ids) {
    if (id < 0 || id >= static_cast<int>(member.size()))
      throw DomainError("vertex id out of range");
    member[id] = 1;
  }
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(mesh.faces.size()); ++i) {
    const Face& f = mesh.faces[i];
    if (member[f[0]] && member[f[1]] && member[f[2]]) out.push_back(i);
  }
  return out;
}

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

ClosestPoint closest_point_exhaustive(const Vec3& p, const TriMesh& mesh,
                                      std::span<const int> faces) {
  if (mesh.empty()) throw DomainError("closest point query on an empty mesh");
  ClosestPoint best{std::numeric_limits<double>::infinity(), Vec3::Zero(), -1};
  auto visit = [&](int fi) {
    const Face& f = mesh.faces[fi];
    const Vec3 q =
        closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    const double d = (q - p).norm();
    if (d < best.distance) best = {d, q, fi};
  };
  if (faces.empty()) {
    for (int i = 0; i < static_cast<int>(mesh.faces.size()); ++i) visit(i);
  } else {
    for (int fi : faces) visit(fi);
  }
  return best;
}

// ---------------------------------------------------------------------------

struct MeshIndex::Impl {
  using Entry = std::pair<BBox, int>;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<int> face_ids;  // original index of each entry in `faces`
  bgi::rtree<Entry, bgi::rstar<8>> tree;
};

MeshIndex::MeshIndex(const TriMesh& mesh, std::span<const int> faces) {
  if (mesh.empty()) throw DomainError("cannot index an empty mesh");
  auto impl = std::make_shared<Impl>();
  impl->vertices = mesh.vertices;
  std::vector<Impl::Entry> entries;
  auto add = [&](int fi) {
    if (fi < 0 || fi >= static_cast<int>(mesh.faces.size()))
      throw DomainError("face subset index out of range");
    const Face& f = mesh.faces[fi];
    Vec3 lo = mesh.vertices[f[0]];
    Vec3 hi = lo;
    for (int k = 1; k < 3; ++k) {
      lo = lo.cwiseMin(mesh.vertices[f[k]]);
      hi = hi.cwiseMax(mesh.vertices[f[k]]);
    }
    const int local = static_cast<int>(impl->faces.size());
    impl->faces.push_back(f);
    impl->face_ids.push_back(fi);
    entries.emplace_back(BBox(to_bpoint(lo), to_bpoint(hi)), local);
  };
  if (faces.empty()) {
    for (int i = 0; i < static_cast<int>(mesh.faces.size()); ++i) add(i);
  } else {
    for (int fi : faces) add(fi);
  }
  if (entries.empty()) throw DomainError("cannot index an empty face subset");
  impl->tree = decltype(impl->tree)(entries.begin(), entries.end());
  impl_ = std::move(impl);
}

ClosestPoint MeshIndex::closest(const Vec3& p) const {
  if (!impl_) throw DomainError("closest point query on an empty index");
  const Impl& m = *impl_;
  ClosestPoint best{std::numeric_limits<double>::infinity(), Vec3::Zero(), -1};
  const BPoint bp = to_bpoint(p);
  const auto n = static_cast<unsigned>(m.faces.size());
  // Boxes arrive in order of distance. A large k makes the query slow, so
  // start small and widen only when every box returned could still hold a
  // closer triangle.
  for (unsigned k = std::min(16u, n);; k = std::min(4 * k, n)) {
    bool done = false;
    for (auto it = m.tree.qbegin(bgi::nearest(bp, k)); it != m.tree.qend(); ++it) {
      if (bg::distance(bp, it->first) > best.distance) {
        done = true;
        break;
      }
      const Face& f = m.faces[it->second];
      const Vec3 q = closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]],
                                               m.vertices[f[2]]);
      const double d = (q - p).norm();
      const int id = m.face_ids[it->second];
      if (d < best.distance || (d == best.distance && id < best.face)) best = {d, q, id};
    }
    if (done || k == n) break;
  }
  return best;
}

ClosestPoint point_to_mesh(const Vec3& p, const TriMesh& mesh) {
  if (mesh.empty()) throw DomainError("point_to_mesh on an empty mesh");
  return MeshIndex(mesh).closest(p);
}

double chamfer(std::span<const Vec3> sources, const TriMesh& target, std::span<const int> faces) {
  if (sources.empty()) throw DomainError("chamfer needs at least one source point");
  if (target.empty()) throw DomainError("chamfer target is empty");
  const MeshIndex index(target, faces);
  double acc = 0.0;
  for (const Vec3& s : sources) {
    const double d = index.closest(s).distance;
    acc += d * d;
  }
  return acc / static_cast<double>(sources.size());
}

// ---------------------------------------------------------------------------

struct PointIndex::Impl {
  using Entry = std::pair<BPoint, int>;
  bgi::rtree<Entry, bgi::rstar<16>> tree;
  std::vector<Vec3> points;
};

PointIndex::PointIndex(std::span<const Vec3> points) {
  if (points.empty()) return;
  auto impl = std::make_shared<Impl>();
  impl->points.assign(points.begin(), points.end());
  std::vector<Impl::Entry> entries;
  entries.reserve(points.size());
  for (int i = 0; i < static_cast<int>(points.size()); ++i)
    entries.emplace_back(to_bpoint(points[i]), i);
  impl->tree = decltype(impl->tree)(entries.begin(), entries.end());
  impl_ = std::move(impl);
}

std::size_t PointIndex::size() const { return impl_ ? impl_->points.size() : 0; }

std::pair<int, double> PointIndex::nearest(const Vec3& p) const {
  if (!impl_) throw DomainError("nearest-point query on an empty point set");
  std::vector<Impl::Entry> hit;
  impl_->tree.query(bgi::nearest(to_bpoint(p), 1), std::back_inserter(hit));
  const int idx = hit.front().second;
  return {idx, (impl_->points[idx] - p).norm()};
}

// ---------------------------------------------------------------------------

std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = inv * dir.dot(q);
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = inv * e2.dot(q);
  if (t <= 0.0) return std::nullopt;
  return t;
}

namespace {

const std::array<Vec3, 3>& parity_directions() {
  static const std::array<Vec3, 3> dirs = {Vec3(0.5377, 0.1834, 0.8229).normalized(),
                                           Vec3(-0.7321, 0.6103, 0.3027).normalized(),
                                           Vec3(0.2219, -0.8876, -0.4035).normalized()};
  return dirs;
}

}  // namespace

bool inside_mesh(const Vec3& p, const TriMesh& mesh) {
  if (!mesh.watertight) throw DomainError("inside test requires a watertight mesh");
  int votes = 0;
  for (const Vec3& dir : parity_directions()) {
    int hits = 0;
    for (const Face& f : mesh.faces)
      if (ray_triangle(p, dir, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]))
        ++hits;
    votes += hits % 2;
  }
  return votes >= 2;
}

SolidIndex::SolidIndex(const TriMesh& mesh) {
  if (!mesh.watertight) throw DomainError("penetration queries require a watertight mesh");
  mesh_ = std::make_shared<const TriMesh>(mesh);
  surface_ = MeshIndex(mesh);
  lo_ = hi_ = mesh.vertices.front();
  for (const Vec3& v : mesh.vertices) {
    lo_ = lo_.cwiseMin(v);
    hi_ = hi_.cwiseMax(v);
  }
}

bool SolidIndex::inside(const Vec3& p) const {
  if ((p.array() < lo_.array()).any() || (p.array() > hi_.array()).any()) return false;
  return inside_mesh(p, *mesh_);
}

std::optional<ClosestPoint> SolidIndex::penetration(const Vec3& p) const {
  if (!inside(p)) return std::nullopt;
  return surface_.closest(p);
}

}  // namespace interfit
