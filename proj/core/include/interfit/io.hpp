#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "interfit/body_model.hpp"
#include "interfit/sequence.hpp"
#include "interfit/synth.hpp"

namespace interfit {

/// Raised when a file cannot be read or parsed. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

// Meshes and clouds (ASCII).
void write_obj(const fs::path& path, const TriMesh& mesh);
TriMesh read_obj(const fs::path& path);
void write_xyz(const fs::path& path, const PointCloud& cloud);
PointCloud read_xyz(const fs::path& path);

// Images. A .pgm file holds one or more concatenated binary P5 images
// (0/255), one per candidate mask.
void write_pgm(const fs::path& path, std::span<const Silhouette> masks);
std::vector<Silhouette> read_pgm(const fs::path& path);
void write_dpt(const fs::path& path, const DepthImage& depth);
DepthImage read_dpt(const fs::path& path);

// Body model binary ("IFBM").
void write_body_model(const fs::path& path, const BodyModel& model);
BodyModel read_body_model(const fs::path& path);

// JSON documents.
void write_cameras(const fs::path& path, std::span<const PinholeCamera> cameras);
std::vector<PinholeCamera> read_cameras(const fs::path& path);
void write_keypoints(const fs::path& path, const KeypointDetection& kp);
KeypointDetection read_keypoints(const fs::path& path);
void write_fitted(const fs::path& path, const FittedSequence& fitted);
FittedSequence read_fitted(const fs::path& path);
void write_trajectory(const fs::path& path, const ObjectTrajectory& trajectory,
                      const std::vector<std::vector<int>>& selected);
ObjectTrajectory read_trajectory(const fs::path& path,
                                 std::vector<std::vector<int>>* selected = nullptr);
void write_contacts(const fs::path& path, const ContactAnnotation& annotation,
                    const ContactSchedule& schedule);
void read_contacts(const fs::path& path, ContactAnnotation& annotation,
                   ContactSchedule& schedule);
void write_object_model(const fs::path& dir, const ObjectModel& object);  // object.obj + object.json
ObjectModel read_object_model(const fs::path& dir);
void write_pose(const fs::path& path, const RigidTransform& pose);
RigidTransform read_pose(const fs::path& path);
void write_scenario(const fs::path& path, const Scenario& scenario, const NoiseConfig& noise);

/// Writes a generated sequence:
///   cameras.json, gt.json, scenario.json, contacts.json, object_init.json,
///   object.obj, object.json, body.ifbm,
///   frame_%04d/view_%d.{pgm,dpt,kp.json,xyz}
void write_sequence(const fs::path& dir, const SyntheticSequence& seq, const Scenario& scenario,
                    const NoiseConfig& noise, const BodyModel& body, const ObjectModel& object);

/// Reads the observation part of a sequence directory. Ground points are the
/// ground-labelled points of the first frame.
SequenceObservation read_observation(const fs::path& dir);

/// Path of a per-view file, e.g. frame_0003/view_1.pgm.
fs::path view_file(const fs::path& dir, int frame, int view, const std::string& ext);

/// Fails with an IoError naming `path` when it does not exist.
void require_file(const fs::path& path);

}  // namespace interfit
