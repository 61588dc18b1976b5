#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "interfit/geometry.hpp"
#include "interfit/mesh.hpp"

namespace interfit {

inline constexpr int kShapeDim = 10;
inline constexpr int kPoseLatentDim = 32;
inline constexpr int kHandJointsPerHand = 2;
inline constexpr int kHandDim = 2 * kHandJointsPerHand * 3;
inline constexpr int kFaceDim = 3;
inline constexpr int kExpressionDim = 10;

enum class JointClass : std::uint8_t { body = 0, hand = 1, face = 2 };

/// Hinge limits on one axis-angle component of a joint (elbows and knees).
struct LimitJoint {
  int joint = 0;
  int axis = 0;
  double min = 0.0;
  double max = 0.0;
};

/// Collision sphere riding on the bone of `joint`; its rest center is
/// J[joint] + fraction * (J[end] - J[joint]).
struct ProxySphere {
  int joint = 0;
  int end = 0;
  double fraction = 0.0;
  double radius = 0.0;
};

struct BodyParams {
  using Shape = Eigen::Matrix<double, kShapeDim, 1>;
  using PoseLatent = Eigen::Matrix<double, kPoseLatentDim, 1>;
  using HandPose = Eigen::Matrix<double, kHandDim, 1>;
  using FacePose = Eigen::Matrix<double, kFaceDim, 1>;
  using Expression = Eigen::Matrix<double, kExpressionDim, 1>;

  Shape beta = Shape::Zero();
  PoseLatent theta_b = PoseLatent::Zero();
  HandPose theta_h = HandPose::Zero();
  FacePose theta_f = FacePose::Zero();
  Expression psi = Expression::Zero();
  Vec3 gamma = Vec3::Zero();

  static constexpr int kSize =
      kShapeDim + kPoseLatentDim + kHandDim + kFaceDim + kExpressionDim + 3;
  // Offsets of each block inside pack().
  static constexpr int kBetaOffset = 0;
  static constexpr int kThetaBOffset = kBetaOffset + kShapeDim;
  static constexpr int kThetaHOffset = kThetaBOffset + kPoseLatentDim;
  static constexpr int kThetaFOffset = kThetaHOffset + kHandDim;
  static constexpr int kPsiOffset = kThetaFOffset + kFaceDim;
  static constexpr int kGammaOffset = kPsiOffset + kExpressionDim;

  Eigen::VectorXd pack() const;
  static BodyParams unpack(const Eigen::Ref<const Eigen::VectorXd>& v);
  bool finite() const;

  BodyParams& operator+=(const BodyParams& o);
  BodyParams operator*(double s) const;
};

/// Procedural articulated body: shape blendshapes, a fixed linear pose
/// decoder, forward kinematics and linear blend skinning.
///
/// Joints are stored in topological order (parents[j] < j). Shape bases are
/// stacked per point: row 3*i + c holds coordinate c of point i.
struct BodyModel {
  TriMesh template_mesh;
  std::vector<std::string> joint_names;
  std::vector<int> parents;
  std::vector<JointClass> joint_classes;
  std::vector<Vec3> rest_joints_base;
  Eigen::MatrixXd shape_joint_basis;   // 3J x 10
  Eigen::MatrixXd shape_vertex_basis;  // 3V x 10
  Eigen::MatrixXd skinning_weights;    // V x J
  Eigen::MatrixXd pose_decoder;        // 3 * decoded_joints.size() x 32
  std::vector<int> decoded_joints;     // driven by theta_b, in decoder row order
  std::vector<int> hand_joints;        // driven by theta_h, three entries each
  std::vector<int> face_joints;        // driven by theta_f
  std::vector<int> contact_region_ids;
  std::vector<int> marker_ids;  // virtual markers for the motion smoothness term
  std::vector<LimitJoint> limit_joints;
  std::vector<ProxySphere> proxy_spheres;
  std::uint64_t seed = 0;

  int joint_count() const { return static_cast<int>(parents.size()); }
  int vertex_count() const { return static_cast<int>(template_mesh.vertices.size()); }
  int joint_index(const std::string& name) const;

  /// Throws DomainError when any structural invariant fails.
  void validate() const;

  /// Sparse view of skinning_weights; rebuilt by finalize().
  struct Influence {
    int joint;
    double weight;
  };
  std::vector<std::vector<Influence>> influences;
  void finalize();

  /// Proxy-sphere pairs that are far enough apart in the tree to collide.
  std::vector<std::pair<int, int>> collision_pairs() const;
};

/// Per-joint axis-angle rotations from the pose latent; joints not driven by
/// the decoder are zero.
std::vector<Vec3> decode_pose(const BodyModel& model,
                              const Eigen::Ref<const BodyParams::PoseLatent>& theta_b);

/// Rest joints J(beta).
std::vector<Vec3> shaped_joints(const BodyModel& model,
                                const Eigen::Ref<const BodyParams::Shape>& beta);

struct BodyState {
  std::vector<Vec3> posed_vertices;
  std::vector<Vec3> posed_joints;
  std::vector<Vec3> sphere_centers;
  std::vector<Mat3> world_rotations;
  std::vector<Vec3> world_translations;  // joint origins before gamma

  // Intermediates reused by pose_body_vjp.
  std::vector<Vec3> shaped_vertices;
  std::vector<Vec3> rest_joints;
  std::vector<Vec3> joint_rotations;  // axis-angle per joint
  std::vector<Mat3> local_rotations;
};

BodyState pose_body(const BodyModel& model, const BodyParams& params);

/// Cotangents with respect to a BodyState's outputs. Empty vectors count as zero.
struct BodyCotangent {
  std::vector<Vec3> vertices;
  std::vector<Vec3> joints;
  std::vector<Vec3> spheres;

  static BodyCotangent zeros(const BodyModel& model);
  void clear();
};

/// Reverse-mode derivative of pose_body: returns d<cotangent, state>/d params.
BodyParams pose_body_vjp(const BodyModel& model, const BodyParams& params, const BodyState& state,
                         const BodyCotangent& cotangent);

/// Posed positions of model.contact_region_ids, in id order.
std::vector<Vec3> contact_subset(const BodyState& state, const BodyModel& model);

/// Posed positions of an arbitrary vertex-id list.
std::vector<Vec3> gather_vertices(const BodyState& state, std::span<const int> ids);

/// Per-joint keypoint class weights, indexed by joint.
std::vector<double> joint_class_weights(const BodyModel& model, double body, double hand,
                                        double face);

}  // namespace interfit
