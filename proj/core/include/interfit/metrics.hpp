#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interfit/body_model.hpp"
#include "interfit/mesh.hpp"
#include "interfit/sequence.hpp"

namespace interfit {

/// Body-object contact threshold in meters (distances up to and including it count).
inline constexpr double kContactThreshold = 0.0045;

/// Per-point contact flags: point i is in contact iff its distance to the
/// surface indexed by `surface` (in that surface's frame, placed in the world
/// by `pose`) is <= threshold.
std::vector<std::uint8_t> contact_map(std::span<const Vec3> points, const MeshIndex& surface,
                                      const RigidTransform& pose = {},
                                      double threshold = kContactThreshold);

/// Body vertices within `threshold` of the object mesh placed at `pose`.
std::vector<std::uint8_t> contact_map(const BodyState& state, const TriMesh& object_mesh,
                                      const RigidTransform& pose,
                                      double threshold = kContactThreshold);

/// Fraction of frames in which each vertex is in contact. Throws on an empty
/// sequence or on maps of different lengths.
std::vector<double> heatmap(std::span<const std::vector<std::uint8_t>> maps);

struct ContactHeatmap {
  std::vector<double> body;
  std::vector<double> object;
};

struct FramePenetration {
  int frame = 0;
  int penetrating = 0;  // vertex count
  double max_mm = 0.0;
  double mean_mm = 0.0;
  double median_mm = 0.0;
};

/// Cumulative share of contact frames whose statistic is <= threshold_mm.
struct CumulativeCurve {
  std::vector<double> threshold_mm;
  std::vector<double> max;
  std::vector<double> mean;
  std::vector<double> median;
};

struct PenetrationReport {
  int frame_count = 0;
  std::vector<FramePenetration> contact_frames;
  double bin_mm = 1.0;
  /// Contact-frame counts per depth bin [k*bin_mm, (k+1)*bin_mm) for each statistic.
  std::vector<int> histogram_max;
  std::vector<int> histogram_mean;
  std::vector<int> histogram_median;
  CumulativeCurve cumulative;
  double mean_mm = 0.0;  // average of per-frame means over contact frames
  double max_mm = 0.0;   // largest single-vertex depth

  int contact_frame_count() const { return static_cast<int>(contact_frames.size()); }
};

/// Order statistics of the penetrating depths (mm) of one frame; zeros when empty.
FramePenetration frame_penetration(std::vector<double> depths_mm, int frame = 0);

/// Builds histograms and cumulative curves from per-contact-frame statistics.
PenetrationReport summarize_penetration(std::vector<FramePenetration> contact_frames,
                                        int frame_count, double bin_mm = 1.0);

/// Penetration depths (mm) of the body vertices inside the object.
std::vector<double> penetration_depths_mm(const BodyState& state, const SolidIndex& solid,
                                          const RigidTransform& pose);

struct SequenceContact {
  ContactHeatmap heatmap;
  PenetrationReport penetration;
};

/// Contact heatmaps and penetration statistics of a fitted sequence. Frames
/// with at least one body vertex in contact are the contact frames.
SequenceContact evaluate_contact(const FittedSequence& fitted, const BodyModel& body,
                                 const ObjectModel& object, int threads = 1);

PenetrationReport penetration_stats(const FittedSequence& fitted, const BodyModel& body,
                                    const ObjectModel& object, int threads = 1);

/// Mean distance in mm from each vertex to the nearest cloud point carrying `label`.
double vertex_to_pcl(std::span<const Vec3> vertices, const PointCloud& cloud, SegmentLabel label);

/// ||v(t+1) - 2 v(t) + v(t-1)|| of one posed body vertex for every interior frame (meters).
std::vector<double> accel_trace(const FittedSequence& fitted, const BodyModel& body,
                                int vertex_id);

/// Mean second-difference magnitude over every `stride`-th body vertex and
/// interior frame (meters).
double mean_acceleration(const FittedSequence& fitted, const BodyModel& body, int stride = 1,
                         int threads = 1);

struct PoseError {
  std::vector<double> joint_mm;  // per frame, mean over joints
  double mean_joint_mm = 0.0;
  std::vector<double> rotation_deg;  // per frame object errors (empty without object)
  std::vector<double> translation_mm;
};

/// Errors of `fitted` against `truth`. Body errors need a body model; object
/// errors are computed when both trajectories are present.
PoseError pose_error(const FittedSequence& fitted, const FittedSequence& truth,
                     const BodyModel* body = nullptr);

/// Mean distance in mm from the annotated body vertices to the object's
/// contact surface over frames with Q = 1 (0 when there are none).
double contact_gap_mm(const FittedSequence& fitted, const BodyModel& body,
                      const ObjectModel& object, std::span<const int> body_ids);

double median(std::vector<double> values);

/// Writes report/penetration.csv, heatmap_body.csv, heatmap_object.csv and
/// summary.json under `dir`.
void write_reports(const std::filesystem::path& dir, const SequenceContact& contact,
                   const std::map<std::string, double>& scalars);

}  // namespace interfit
