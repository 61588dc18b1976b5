#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "interfit/body_model.hpp"
#include "interfit/geometry.hpp"
#include "interfit/mesh.hpp"
#include "interfit/rendering.hpp"

namespace interfit {

/// Rigid object with its annotated likely-contact vertices.
struct ObjectModel {
  std::string name;
  TriMesh mesh;
  std::vector<int> contact_vertex_ids;

  void validate() const;
  /// Faces lying entirely inside the contact annotation.
  std::vector<int> contact_faces() const;
};

/// Which body vertices should touch which object vertices during contact frames.
struct ContactAnnotation {
  std::vector<int> body_vertex_ids;
  std::vector<int> object_vertex_ids;
};

struct ContactSchedule {
  std::vector<std::uint8_t> q;

  int size() const { return static_cast<int>(q.size()); }
  int active_count() const;
  void validate() const;
};

struct Keypoint {
  Vec2 position = Vec2::Zero();
  double confidence = 0.0;
};

/// Detected 2D joints for one view, one slot per model joint.
struct KeypointDetection {
  std::vector<Keypoint> joints;

  void validate() const;
};

struct ViewObservation {
  std::vector<Silhouette> candidates;  // object-labelled segmentation candidates
  DepthImage depth;
  KeypointDetection keypoints;
  PointCloud cloud;  // world frame, labelled
};

struct FrameObservation {
  std::vector<ViewObservation> views;
};

struct SequenceObservation {
  std::vector<PinholeCamera> cameras;
  std::vector<FrameObservation> frames;
  std::vector<Vec3> ground_points;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int view_count() const { return static_cast<int>(cameras.size()); }
  void validate() const;
  /// Body-labelled points of one frame and view.
  std::vector<Vec3> body_points(int frame, int view) const;
};

struct ObjectTrajectory {
  std::vector<RigidTransform> xi;
  std::vector<std::uint8_t> coasting;

  int size() const { return static_cast<int>(xi.size()); }
};

/// Result of the fitting pipeline (or synthetic ground truth in the same shape).
struct FittedSequence {
  BodyParams::Shape beta_star = BodyParams::Shape::Zero();
  std::vector<BodyParams> frames;  // beta inside each entry mirrors beta_star
  ObjectTrajectory object;
  ContactSchedule schedule;
  std::vector<double> frame_energy;
  std::map<std::string, double> diagnostics;

  int frame_count() const { return static_cast<int>(frames.size()); }
  void validate() const;
  /// Frame parameters with beta replaced by beta_star.
  BodyParams frame_params(int t) const;
};

}  // namespace interfit
