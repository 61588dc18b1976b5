#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "interfit/geometry.hpp"
#include "interfit/mesh.hpp"

namespace interfit {

/// Row-major image of scalars in [0, 1].
struct Silhouette {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  Silhouette() = default;
  Silhouette(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  bool empty() const { return width == 0 || height == 0; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t area() const;  // pixels with value > 0.5
  void validate() const;
};

/// Row-major camera-frame depth in meters; 0 marks background.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  void validate() const;
};

/// Per-vertex visibility flags for one view.
struct VisibilityMask {
  std::vector<std::uint8_t> visible;

  std::size_t size() const { return visible.size(); }
  bool operator[](std::size_t i) const { return visible[i] != 0; }
  std::size_t count() const;
};

inline constexpr double kVisibilityEpsilon = 0.005;

Silhouette render_silhouette(const TriMesh& mesh, const RigidTransform& pose,
                             const PinholeCamera& cam);

DepthImage render_depth(const TriMesh& mesh, const RigidTransform& pose, const PinholeCamera& cam);

/// A mesh placed in the world for multi-mesh renders. `label` is written to
/// the label buffer wherever this mesh is nearest.
struct SceneItem {
  const TriMesh* mesh = nullptr;
  RigidTransform pose;
  int label = 0;
};

struct SceneRender {
  DepthImage depth;
  std::vector<int> labels;  // -1 where nothing was drawn
};

SceneRender render_scene(std::span<const SceneItem> items, const PinholeCamera& cam);

/// A vertex is visible when it projects inside the image, lies in front of
/// the camera and is no deeper than the z-buffer (body plus occluders) at
/// its pixel plus `epsilon`.
VisibilityMask visible_vertices(const TriMesh& body, std::span<const SceneItem> occluders,
                                const PinholeCamera& cam, double epsilon = kVisibilityEpsilon);

/// Renders `mesh` at `pose` and reads depth only at the listed pixel indices
/// (row-major). 0 marks pixels the mesh does not cover. Used by the object
/// fitting term, which only looks inside the observed mask.
void render_depth_at(const TriMesh& mesh, const RigidTransform& pose, const PinholeCamera& cam,
                     std::span<const int> pixels, std::span<float> out);

/// Intersection over union of two binary (> 0.5) masks of equal size.
double mask_iou(const Silhouette& a, const Silhouette& b);

}  // namespace interfit
