#include "interfit/rendering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace interfit {

std::size_t Silhouette::area() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](float v) { return v > 0.5f; }));
}

void Silhouette::validate() const {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("silhouette size does not match its dimensions");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("silhouette value outside [0, 1]");
}

void DepthImage::validate() const {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("depth image size does not match its dimensions");
  for (float v : values)
    if (!(v >= 0.0f) || !std::isfinite(v)) throw DomainError("depth value must be finite and >= 0");
}

std::size_t VisibilityMask::count() const {
  return static_cast<std::size_t>(std::count(visible.begin(), visible.end(), std::uint8_t{1}));
}

namespace {

constexpr double kNearPlane = 1e-4;

struct Window {
  int x0, y0, x1, y1;  // half-open pixel range
};

struct ScreenVertex {
  double x, y, inv_z;
};

// Pixel-center coverage with a top-left tie rule so that a shared edge is
// drawn by exactly one of its two triangles.
bool owns_edge(double dx, double dy) { return dy > 0.0 || (dy == 0.0 && dx < 0.0); }

template <class Fragment>
void raster_triangle(ScreenVertex a, ScreenVertex b, ScreenVertex c, const Window& win,
                     Fragment& frag) {
  double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  const double min_x = std::min({a.x, b.x, c.x});
  const double max_x = std::max({a.x, b.x, c.x});
  const double min_y = std::min({a.y, b.y, c.y});
  const double max_y = std::max({a.y, b.y, c.y});
  const int x0 = std::max(win.x0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(win.x1 - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y0 = std::max(win.y0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(win.y1 - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  if (x0 > x1 || y0 > y1) return;

  const std::array<const ScreenVertex*, 3> v = {&a, &b, &c};
  std::array<bool, 3> own{};
  for (int e = 0; e < 3; ++e) {
    const ScreenVertex& p = *v[e];
    const ScreenVertex& q = *v[(e + 1) % 3];
    own[e] = owns_edge(q.x - p.x, q.y - p.y);
  }
  const double inv_area = 1.0 / area;
  for (int py = y0; py <= y1; ++py) {
    const double sy = py + 0.5;
    for (int px = x0; px <= x1; ++px) {
      const double sx = px + 0.5;
      std::array<double, 3> w{};
      bool inside = true;
      for (int e = 0; e < 3 && inside; ++e) {
        const ScreenVertex& p = *v[e];
        const ScreenVertex& q = *v[(e + 1) % 3];
        const double ef = (q.x - p.x) * (sy - p.y) - (q.y - p.y) * (sx - p.x);
        if (ef < 0.0 || (ef == 0.0 && !own[e])) inside = false;
        w[(e + 2) % 3] = ef;
      }
      if (!inside) continue;
      const double inv_z = (w[0] * a.inv_z + w[1] * b.inv_z + w[2] * c.inv_z) * inv_area;
      if (inv_z <= 0.0) continue;
      frag(px, py, 1.0 / inv_z);
    }
  }
}

// Clips a camera-space triangle against z >= near and rasterizes the pieces.
template <class Fragment>
void raster_camera_triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                            const PinholeCamera& cam, const Window& win, Fragment& frag) {
  std::array<Vec3, 4> poly;
  int n = 0;
  const std::array<const Vec3*, 3> in = {&p0, &p1, &p2};
  for (int i = 0; i < 3; ++i) {
    const Vec3& cur = *in[i];
    const Vec3& nxt = *in[(i + 1) % 3];
    const bool cur_in = cur.z() >= kNearPlane;
    const bool nxt_in = nxt.z() >= kNearPlane;
    if (cur_in) poly[n++] = cur;
    if (cur_in != nxt_in) {
      const double t = (kNearPlane - cur.z()) / (nxt.z() - cur.z());
      poly[n++] = cur + t * (nxt - cur);
    }
  }
  if (n < 3) return;
  std::array<ScreenVertex, 4> sv;
  for (int i = 0; i < n; ++i) {
    const Vec3& p = poly[i];
    sv[i] = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy, 1.0 / p.z()};
  }
  raster_triangle(sv[0], sv[1], sv[2], win, frag);
  if (n == 4) raster_triangle(sv[0], sv[2], sv[3], win, frag);
}

template <class Fragment>
void raster_mesh(const TriMesh& mesh, const RigidTransform& pose, const PinholeCamera& cam,
                 const Window& win, Fragment& frag) {
  const Mat3 r = cam.extrinsic.matrix() * pose.matrix();
  const Vec3 t = cam.extrinsic.matrix() * pose.translation + cam.extrinsic.translation;
  std::vector<Vec3> cv(mesh.vertices.size());
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = r * mesh.vertices[i] + t;
  for (const Face& f : mesh.faces) {
    const Vec3& a = cv[f[0]];
    const Vec3& b = cv[f[1]];
    const Vec3& c = cv[f[2]];
    if (a.z() < kNearPlane && b.z() < kNearPlane && c.z() < kNearPlane) continue;
    raster_camera_triangle(a, b, c, cam, win, frag);
  }
}

Window full_window(const PinholeCamera& cam) { return {0, 0, cam.width, cam.height}; }

}  // namespace

DepthImage render_depth(const TriMesh& mesh, const RigidTransform& pose, const PinholeCamera& cam) {
  cam.validate();
  if (mesh.empty()) throw DomainError("cannot render an empty mesh");
  DepthImage img(cam.width, cam.height);
  auto frag = [&img](int x, int y, double z) {
    float& d = img.at(x, y);
    const float zf = static_cast<float>(z);
    if (d == 0.0f || zf < d) d = zf;
  };
  raster_mesh(mesh, pose, cam, full_window(cam), frag);
  return img;
}

Silhouette render_silhouette(const TriMesh& mesh, const RigidTransform& pose,
                             const PinholeCamera& cam) {
  const DepthImage depth = render_depth(mesh, pose, cam);
  Silhouette s(cam.width, cam.height);
  for (std::size_t i = 0; i < depth.values.size(); ++i)
    s.values[i] = depth.values[i] > 0.0f ? 1.0f : 0.0f;
  return s;
}

SceneRender render_scene(std::span<const SceneItem> items, const PinholeCamera& cam) {
  cam.validate();
  SceneRender out{DepthImage(cam.width, cam.height),
                  std::vector<int>(static_cast<std::size_t>(cam.width) * cam.height, -1)};
  for (const SceneItem& item : items) {
    if (item.mesh == nullptr || item.mesh->empty()) continue;
    auto frag = [&](int x, int y, double z) {
      const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
      float& d = out.depth.values[idx];
      const float zf = static_cast<float>(z);
      if (d == 0.0f || zf < d) {
        d = zf;
        out.labels[idx] = item.label;
      }
    };
    raster_mesh(*item.mesh, item.pose, cam, full_window(cam), frag);
  }
  return out;
}

VisibilityMask visible_vertices(const TriMesh& body, std::span<const SceneItem> occluders,
                                const PinholeCamera& cam, double epsilon) {
  VisibilityMask mask;
  mask.visible.assign(body.vertices.size(), 0);
  if (body.vertices.empty()) return mask;
  std::vector<SceneItem> items(occluders.begin(), occluders.end());
  if (!body.faces.empty()) items.push_back({&body, RigidTransform::identity(), 0});
  const SceneRender zb = render_scene(items, cam);
  for (std::size_t i = 0; i < body.vertices.size(); ++i) {
    const Vec3 c = cam.to_camera(body.vertices[i]);
    if (!(c.z() > 0.0)) continue;
    const double u = cam.fx * c.x() / c.z() + cam.cx;
    const double v = cam.fy * c.y() / c.z() + cam.cy;
    if (!(u >= 0.0 && v >= 0.0 && u < cam.width && v < cam.height)) continue;
    const float z = zb.depth.at(static_cast<int>(u), static_cast<int>(v));
    if (z == 0.0f || c.z() <= static_cast<double>(z) + epsilon) mask.visible[i] = 1;
  }
  return mask;
}

void render_depth_at(const TriMesh& mesh, const RigidTransform& pose, const PinholeCamera& cam,
                     std::span<const int> pixels, std::span<float> out) {
  if (pixels.size() != out.size()) throw DomainError("pixel list and output size differ");
  std::fill(out.begin(), out.end(), 0.0f);
  if (pixels.empty()) return;
  Window win{cam.width, cam.height, 0, 0};
  for (int idx : pixels) {
    const int x = idx % cam.width;
    const int y = idx / cam.width;
    win.x0 = std::min(win.x0, x);
    win.y0 = std::min(win.y0, y);
    win.x1 = std::max(win.x1, x + 1);
    win.y1 = std::max(win.y1, y + 1);
  }
  const int ww = win.x1 - win.x0;
  thread_local std::vector<float> scratch;
  scratch.assign(static_cast<std::size_t>(ww) * (win.y1 - win.y0), 0.0f);
  auto frag = [&](int x, int y, double z) {
    float& d = scratch[static_cast<std::size_t>(y - win.y0) * ww + (x - win.x0)];
    const float zf = static_cast<float>(z);
    if (d == 0.0f || zf < d) d = zf;
  };
  raster_mesh(mesh, pose, cam, win, frag);
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    const int x = pixels[k] % cam.width;
    const int y = pixels[k] / cam.width;
    out[k] = scratch[static_cast<std::size_t>(y - win.y0) * ww + (x - win.x0)];
  }
}

double mask_iou(const Silhouette& a, const Silhouette& b) {
  if (a.width != b.width || a.height != b.height) throw DomainError("mask sizes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool pa = a.values[i] > 0.5f;
    const bool pb = b.values[i] > 0.5f;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace interfit
