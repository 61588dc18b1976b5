#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "interfit/body_model.hpp"
#include "interfit/sequence.hpp"

namespace interfit {

enum class ObjectKind { cube, cylinder, handle_box };

std::string object_kind_name(ObjectKind kind);
ObjectKind parse_object_kind(const std::string& name);

/// Primitive dimensions in meters. cube: dims.x is the side. cylinder:
/// dims.x radius, dims.y height. handle_box: dims is the box size; the
/// handle bar sits on top along local y.
struct ObjectSpec {
  ObjectKind kind = ObjectKind::cube;
  Vec3 dims = Vec3(0.1, 0.1, 0.1);
  int segments = 16;
};

/// Watertight primitive with its graspable region annotated.
ObjectModel make_object(const ObjectSpec& spec, std::uint64_t seed = 0);

struct ToyBodyConfig {
  int capsule_segments = 8;
  int marker_count = 40;
  double decoder_scale = 0.3;
};

/// Procedural 24-joint body. Everything random (pose decoder, shape basis)
/// derives from `seed`.
BodyModel make_toy_body(const ToyBodyConfig& config = {}, std::uint64_t seed = 0);

/// Palm-face vertex ids of one hand, grouped by column from wrist to knuckles.
std::vector<std::vector<int>> palm_columns(const BodyModel& model, bool right_hand);

struct CameraRig {
  int count = 6;
  double radius = 2.0;
  double height = 1.2;
  Vec3 target = Vec3(0.0, 0.0, 1.0);
  double focal = 120.0;
  int width = 160;
  int height_px = 120;
  double phase = 0.3;  // angle of the first camera, radians

  std::vector<PinholeCamera> cameras() const;
};

struct BodyKeyframe {
  int frame = 0;
  BodyParams params;
};

struct ObjectKeyframe {
  int frame = 0;
  RigidTransform pose;
};

/// Keyframed interaction script. When a body and a contact window are
/// present, the object rides rigidly on the grasping hand inside the window
/// and rests at its grasp/release pose outside it; otherwise it follows
/// `object_keys`.
struct Scenario {
  std::string name = "scenario";
  ObjectSpec object;
  int frames = 60;
  BodyParams::Shape beta = BodyParams::Shape::Zero();
  std::vector<BodyKeyframe> body_keys;
  std::vector<ObjectKeyframe> object_keys;
  std::optional<std::pair<int, int>> contact_window;
  bool right_hand_grasp = true;
  CameraRig rig;
  int cloud_stride = 2;

  bool has_body() const { return !body_keys.empty(); }
  void validate() const;
};

struct NoiseConfig {
  double keypoint_sigma_px = 0.0;
  double keypoint_dropout = 0.0;
  double depth_sigma_m = 0.0;
  int mask_px = 0;  // > 0 dilates, < 0 erodes the true object mask
  int distractors = 0;
  double init_rotation_deg = 3.0;
  double init_translation_m = 0.015;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSequence {
  FittedSequence ground_truth;
  SequenceObservation observation;
  ContactAnnotation annotation;
  /// Index of the true object mask among the candidates, per frame and view.
  std::vector<std::vector<int>> true_candidate;
  RigidTransform object_init;
};

/// Default grasp-and-carry scenario: the body translates 0.5 m while the
/// object is carried inside the contact window.
Scenario default_scenario(ObjectKind kind, std::uint64_t seed, int frames = 60);

/// Object-only scenario with linear keyframed motion.
Scenario object_only_scenario(ObjectKind kind, const RigidTransform& start,
                              const RigidTransform& end, int frames = 60);

/// Linear interpolation of keyframes (axis-angle and translation componentwise).
BodyParams interpolate_body(const std::vector<BodyKeyframe>& keys, int frame);
RigidTransform interpolate_object(const std::vector<ObjectKeyframe>& keys, int frame);

/// Object pose that puts the object's contact face flush with the grasping
/// palm of the rest-pose body, and the body vertices annotated for it.
std::pair<RigidTransform, std::vector<int>> grasp_in_rest(const BodyModel& model,
                                                          const BodyParams::Shape& beta,
                                                          const ObjectSpec& spec,
                                                          const ObjectModel& object,
                                                          bool right_hand);

SyntheticSequence synth_sequence(const Scenario& scenario, const NoiseConfig& noise,
                                 const BodyModel& body, const ObjectModel& object);

/// Large ground disk at z = 0 used for rendering.
TriMesh ground_disk(double radius = 1.6, int segments = 32);

}  // namespace interfit
