#include <gtest/gtest.h>

#include <cmath>

#include "interfit/random.hpp"
#include "interfit/rendering.hpp"
#include "oracles.hpp"

using namespace interfit;

namespace {

PinholeCamera front_camera(int w = 160, int h = 120, double f = 120.0) {
  PinholeCamera cam;
  cam.fx = cam.fy = f;
  cam.cx = 0.5 * w;
  cam.cy = 0.5 * h;
  cam.width = w;
  cam.height = h;
  return cam;  // identity extrinsic: looks down +z
}

TriMesh square(double half, double z, double x0 = 0.0, double y0 = 0.0) {
  TriMesh m;
  m.vertices = {{x0 - half, y0 - half, z}, {x0 + half, y0 - half, z}, {x0 + half, y0 + half, z},
                {x0 - half, y0 + half, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

TriMesh merge(const TriMesh& a, const TriMesh& b) {
  TriMesh m = a;
  const int off = static_cast<int>(a.vertices.size());
  m.vertices.insert(m.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const Face& f : b.faces) m.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
  return m;
}

Vec2 centroid(const Silhouette& s) {
  Vec2 c = Vec2::Zero();
  double n = 0;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (s.at(x, y) > 0.5f) {
        c += Vec2(x + 0.5, y + 0.5);
        n += 1;
      }
  return c / n;
}

}  // namespace

TEST(RenderSilhouette, BehindCameraIsEmpty) {
  const PinholeCamera cam = front_camera();
  const Silhouette s = render_silhouette(square(0.5, -1.0), RigidTransform::identity(), cam);
  EXPECT_EQ(s.area(), 0u);
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(render_silhouette(TriMesh{}, RigidTransform::identity(), cam), DomainError);
}

TEST(RenderSilhouette, SquareCoverageMatchesPointInQuadOracle) {
  const PinholeCamera cam = front_camera();
  Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    const double half = rng.uniform(0.05, 0.4);
    const double z = rng.uniform(1.0, 3.0);
    const double x0 = rng.uniform(-0.3, 0.3), y0 = rng.uniform(-0.3, 0.3);
    const TriMesh sq = square(half, z, x0, y0);
    const Silhouette s = render_silhouette(sq, RigidTransform::identity(), cam);
    const double u0 = cam.fx * (x0 - half) / z + cam.cx, u1 = cam.fx * (x0 + half) / z + cam.cx;
    const double v0 = cam.fy * (y0 - half) / z + cam.cy, v1 = cam.fy * (y0 + half) / z + cam.cy;
    std::size_t expected = 0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        if (px > u0 && px < u1 && py > v0 && py < v1) ++expected;
      }
    EXPECT_EQ(s.area(), expected);
  }
}

TEST(RenderSilhouette, SharedDiagonalLeavesNoGaps) {
  // A square whose diagonal passes exactly through pixel centers.
  PinholeCamera cam = front_camera(16, 16, 8.0);
  TriMesh m;
  m.vertices = {{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  int hits = 0;
  auto count_depth = render_depth(m, RigidTransform::identity(), cam);
  for (float d : count_depth.values) hits += d > 0.0f ? 1 : 0;
  EXPECT_EQ(hits, 16 * 16);
}

TEST(RenderSilhouette, TranslationShiftsCentroid) {
  const PinholeCamera cam = front_camera();
  const TriMesh sq = square(0.15, 2.0);
  const Vec2 c0 = centroid(render_silhouette(sq, RigidTransform::identity(), cam));
  for (double dx : {0.05, 0.11, -0.2}) {
    RigidTransform t;
    t.translation = Vec3(dx, 0, 0);
    const Vec2 c1 = centroid(render_silhouette(sq, t, cam));
    EXPECT_NEAR(c1.x() - c0.x(), cam.fx * dx / 2.0, 1.0);
    EXPECT_NEAR(c1.y() - c0.y(), 0.0, 1.0);
  }
}

TEST(RenderDepth, ConstantDepthAndZOrder) {
  const PinholeCamera cam = front_camera();
  const DepthImage d = render_depth(square(0.3, 2.0), RigidTransform::identity(), cam);
  std::size_t covered = 0;
  for (float v : d.values)
    if (v > 0.0f) {
      ++covered;
      EXPECT_NEAR(v, 2.0, 1e-6);
    }
  EXPECT_GT(covered, 0u);

  const TriMesh stacked = merge(square(0.5, 2.0), square(0.2, 1.0));
  const DepthImage ds = render_depth(stacked, RigidTransform::identity(), cam);
  EXPECT_NEAR(ds.at(80, 60), 1.0, 1e-6);
  EXPECT_NEAR(ds.at(80 + 25, 60), 2.0, 1e-6);  // outside the near square
}

TEST(RenderDepth, EmptyCoverageIsAllZero) {
  const PinholeCamera cam = front_camera();
  const DepthImage d = render_depth(square(0.1, 2.0, 50.0, 0.0), RigidTransform::identity(), cam);
  for (float v : d.values) EXPECT_EQ(v, 0.0f);
}

TEST(RenderDepth, SupportEqualsSilhouette) {
  Rng rng(32);
  PinholeCamera cam = PinholeCamera::look_at(Vec3(1.5, 0.4, 0.8), Vec3::Zero(), Vec3::UnitZ(),
                                             120, 120, 160, 120);
  for (int k = 0; k < 5; ++k) {
    const TriMesh blob = oracle::random_blob(rng, 8, 16, 0.3, 0.3);
    RigidTransform pose;
    pose.rotation = Vec3(rng.normal(), rng.normal(), rng.normal());
    const DepthImage d = render_depth(blob, pose, cam);
    const Silhouette s = render_silhouette(blob, pose, cam);
    for (std::size_t i = 0; i < d.values.size(); ++i)
      EXPECT_EQ(d.values[i] > 0.0f, s.values[i] > 0.5f);
  }
}

TEST(RenderDepth, PartialRenderMatchesFullRender) {
  Rng rng(33);
  PinholeCamera cam = PinholeCamera::look_at(Vec3(1.5, -0.4, 0.8), Vec3::Zero(), Vec3::UnitZ(),
                                             120, 120, 160, 120);
  const TriMesh blob = oracle::random_blob(rng, 10, 20, 0.25, 0.2);
  RigidTransform pose;
  pose.rotation = Vec3(0.3, 0.2, -0.5);
  const DepthImage full = render_depth(blob, pose, cam);
  std::vector<int> pixels;
  for (int i = 0; i < cam.width * cam.height; i += 7) pixels.push_back(i);
  std::vector<float> out(pixels.size());
  render_depth_at(blob, pose, cam, pixels, out);
  for (std::size_t k = 0; k < pixels.size(); ++k) EXPECT_EQ(out[k], full.values[pixels[k]]);
}

TEST(RenderScene, LabelsFollowNearestSurface) {
  const PinholeCamera cam = front_camera();
  const TriMesh far = square(0.5, 2.0);
  const TriMesh near = square(0.2, 1.0);
  std::vector<SceneItem> items = {{&far, RigidTransform::identity(), 2},
                                  {&near, RigidTransform::identity(), 1}};
  const SceneRender r = render_scene(items, cam);
  EXPECT_EQ(r.labels[60 * 160 + 80], 1);
  EXPECT_EQ(r.labels[60 * 160 + 105], 2);
  EXPECT_EQ(r.labels[0], -1);
}

TEST(Resolution, AreaFractionIsConsistent) {
  Rng rng(34);
  for (int k = 0; k < 5; ++k) {
    const TriMesh blob = oracle::random_blob(rng, 12, 24, 0.25, 0.0);
    const PinholeCamera lo = front_camera(160, 120, 120);
    const PinholeCamera hi = front_camera(320, 240, 240);
    RigidTransform pose;
    pose.translation = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 1.8);
    const double a_lo = static_cast<double>(render_silhouette(blob, pose, lo).area()) / (160 * 120);
    const double a_hi = static_cast<double>(render_silhouette(blob, pose, hi).area()) / (320 * 240);
    EXPECT_LT(std::abs(a_lo - a_hi) / a_hi, 0.02);
  }
}

TEST(Visibility, UnobstructedFanIsVisible) {
  const PinholeCamera cam = front_camera();
  TriMesh fan;
  fan.vertices.emplace_back(0, 0, 2);
  for (int k = 0; k < 8; ++k)
    fan.vertices.emplace_back(0.3 * std::cos(k * 0.785398), 0.3 * std::sin(k * 0.785398), 2);
  for (int k = 0; k < 8; ++k) fan.faces.push_back({0, 1 + k, 1 + (k + 1) % 8});
  const VisibilityMask vis = visible_vertices(fan, {}, cam);
  EXPECT_EQ(vis.count(), fan.vertices.size());
}

TEST(Visibility, OccluderHidesVertex) {
  const PinholeCamera cam = front_camera();
  TriMesh body = square(0.1, 2.0);
  const TriMesh wall = square(0.5, 1.0);
  std::vector<SceneItem> occ = {{&wall, RigidTransform::identity(), 1}};
  const VisibilityMask vis = visible_vertices(body, occ, cam);
  EXPECT_EQ(vis.count(), 0u);
  EXPECT_EQ(vis.size(), body.vertices.size());
}

TEST(Visibility, AgreesWithRayCastOracle) {
  Rng rng(35);
  std::size_t agree = 0, total = 0;
  for (int scene = 0; scene < 10; ++scene) {
    const PinholeCamera cam = PinholeCamera::look_at(
        Vec3(rng.uniform(1.5, 2.5), rng.uniform(-1, 1), rng.uniform(0.2, 1.0)), Vec3::Zero(),
        Vec3::UnitZ(), 1200, 1200, 1600, 1200);
    const TriMesh body = oracle::random_blob(rng, 16, 32, 0.3, 0.05);
    const Vec3 toward = cam.center().normalized();
    const TriMesh occluder =
        oracle::random_blob(rng, 8, 16, 0.12, 0.1, 0.6 * toward + Vec3(0, rng.uniform(-0.2, 0.2), 0));
    std::vector<SceneItem> occ = {{&occluder, RigidTransform::identity(), 1}};
    const VisibilityMask vis = visible_vertices(body, occ, cam);
    const TriMesh all = merge(body, occluder);
    const Vec3 eye = cam.center();
    std::vector<Vec3> normals(body.vertices.size(), Vec3::Zero());
    for (const Face& f : body.faces) {
      const Vec3 n = (body.vertices[f[1]] - body.vertices[f[0]])
                         .cross(body.vertices[f[2]] - body.vertices[f[0]]);
      for (int k : f) normals[k] += n;
    }
    for (int v = 0; v < static_cast<int>(body.vertices.size()); ++v) {
      const Vec3 p = body.vertices[v];
      const Vec3 dir = eye - p;
      // Sub-pixel sampling makes grazing vertices ambiguous; compare the rest.
      if (std::abs(normals[v].normalized().dot(dir.normalized())) < 0.2) continue;
      bool blocked = false;
      for (const Face& f : all.faces) {
        if (f[0] == v || f[1] == v || f[2] == v) continue;
        const auto t = ray_triangle(p, dir, all.vertices[f[0]], all.vertices[f[1]],
                                    all.vertices[f[2]]);
        if (t && *t * dir.norm() > 0.005 && *t < 1.0) {  // same tolerance as the library
          blocked = true;
          break;
        }
      }
      agree += (vis[v] == !blocked) ? 1 : 0;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(agree) / total, 0.99) << agree << " of " << total;
}

TEST(Visibility, RemovingAnOccluderNeverHidesVertices) {
  Rng rng(36);
  const PinholeCamera cam = PinholeCamera::look_at(Vec3(2, 0, 0.5), Vec3::Zero(), Vec3::UnitZ(),
                                                   120, 120, 160, 120);
  const TriMesh body = oracle::random_blob(rng, 12, 24, 0.3, 0.1);
  const TriMesh a = oracle::random_blob(rng, 6, 12, 0.1, 0.1, Vec3(0.8, 0.1, 0.1));
  const TriMesh b = oracle::random_blob(rng, 6, 12, 0.1, 0.1, Vec3(0.9, -0.15, 0.0));
  std::vector<SceneItem> both = {{&a, RigidTransform::identity(), 1},
                                 {&b, RigidTransform::identity(), 1}};
  std::vector<SceneItem> one = {{&a, RigidTransform::identity(), 1}};
  const VisibilityMask v2 = visible_vertices(body, both, cam);
  const VisibilityMask v1 = visible_vertices(body, one, cam);
  for (std::size_t i = 0; i < v2.size(); ++i)
    if (v2[i]) EXPECT_TRUE(v1[i]);
  EXPECT_GE(v1.count(), v2.count());
}

TEST(MaskIou, BasicCases) {
  Silhouette a(4, 4), b(4, 4);
  EXPECT_EQ(mask_iou(a, b), 0.0);
  a.at(0, 0) = a.at(1, 0) = 1.0f;
  b.at(1, 0) = b.at(2, 0) = 1.0f;
  EXPECT_NEAR(mask_iou(a, b), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(mask_iou(a, a), 1.0);
  Silhouette c(3, 4);
  EXPECT_THROW(mask_iou(a, c), DomainError);
}
