#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "interfit/body_model.hpp"
#include "interfit/geometry.hpp"
#include "interfit/mesh.hpp"
#include "interfit/rendering.hpp"
#include "interfit/sequence.hpp"

namespace interfit {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct EnergyWeights {
  double lambda_segm = 1.0;
  double lambda_depth = 1.0;
  double lambda_D = 30.0;
  double lambda_theta_b = 1e-3;
  double lambda_theta_h = 1e-2;
  double lambda_theta_f = 0.0;
  double lambda_alpha = 1e-2;
  double lambda_beta = 1e-3;
  double lambda_E = 0.0;
  double lambda_P = 1e4;
  double lambda_G = 1e6;
  double lambda_Q = 1e6;
  double lambda_S = 1e6;
  double lambda_A = 1e6;
  double sigma_gm = 50.0;  // pixels
  double k_body = 1.0;
  double k_hand = 0.5;
  double k_face = 0.0;

  void validate() const;
  std::vector<double> joint_weights(const BodyModel& model) const;
};

// ---------------------------------------------------------------------------
// Robustifier

/// Geman-McClure: sigma^2 x^2 / (sigma^2 + x^2).
double gm_rho(double x, double sigma);
/// d rho / d (x^2).
double gm_rho_dsq(double x, double sigma);

// ---------------------------------------------------------------------------
// Body terms. Each returns the unweighted value and, when `grad` is given,
// accumulates `weight` times its gradient with respect to the state.

double e_keypoint(const BodyState& state, std::span<const PinholeCamera> cams,
                  std::span<const KeypointDetection> detections,
                  std::span<const double> joint_weights, double sigma,
                  BodyCotangent* grad = nullptr, double weight = 1.0);

/// Posed body as a mesh (template connectivity).
TriMesh posed_mesh(const BodyModel& model, const BodyState& state);

/// Visibility of body vertices in each camera, with optional extra occluders.
std::vector<VisibilityMask> body_visibility(const BodyModel& model, const BodyState& state,
                                            std::span<const PinholeCamera> cams,
                                            std::span<const SceneItem> occluders = {});

/// Nearest visible vertex for every body-labelled cloud point, per view.
/// A view without visible vertices gets no matches and is flagged.
struct DepthMatches {
  std::vector<std::vector<Vec3>> points;
  std::vector<std::vector<int>> vertex;
  std::vector<std::uint8_t> empty_view;
};

DepthMatches match_depth(const BodyState& state,
                         std::span<const std::vector<Vec3>> body_points,
                         std::span<const VisibilityMask> visibility);

/// Sum of unsquared distances over matched pairs; the matches are held fixed
/// for the gradient.
double e_depth_body(const BodyState& state, const DepthMatches& matches,
                    BodyCotangent* grad = nullptr, double weight = 1.0);

/// Convenience form: matches against the current visible vertices.
double e_depth_body(const BodyState& state, std::span<const std::vector<Vec3>> body_points,
                    std::span<const VisibilityMask> visibility);

/// Weighted shape/pose/expression priors plus the joint-limit hinge.
struct PriorTerms {
  double beta = 0.0;
  double theta_b = 0.0;
  double theta_h = 0.0;
  double theta_f = 0.0;
  double psi = 0.0;
  double alpha = 0.0;
  double total() const { return beta + theta_b + theta_h + theta_f + psi + alpha; }
};

PriorTerms e_priors(const BodyModel& model, const BodyParams& params,
                    const EnergyWeights& weights, BodyParams* grad = nullptr,
                    double scale = 1.0);

/// Joint-limit hinge alone (unweighted).
double e_joint_limits(const BodyModel& model, const BodyParams& params,
                      BodyParams* grad = nullptr, double scale = 1.0);

/// Overlap of proxy spheres on bones far apart in the tree.
double e_self_penetration(const BodyModel& model, const BodyState& state,
                          BodyCotangent* grad = nullptr, double weight = 1.0);

/// Sum over body vertices inside the object of squared depth. `solid` is
/// built on the object mesh in its own frame; `xi` places it in the world.
double e_object_penetration(const BodyState& state, const SolidIndex& solid,
                            const RigidTransform& xi, BodyCotangent* grad = nullptr,
                            Vec6* xi_grad = nullptr, double weight = 1.0);

/// Mean squared distance from the listed body vertices to the object's
/// contact surface (`contact_surface` indexes the object-frame contact faces).
double e_contact(const BodyState& state, std::span<const int> body_ids,
                 const MeshIndex& contact_surface, const RigidTransform& xi,
                 BodyCotangent* grad = nullptr, Vec6* xi_grad = nullptr, double weight = 1.0);

/// Squared below-plane violations. `point_grad`, when given, receives
/// weight * dE/dp for every point.
double e_ground(std::span<const Vec3> points, const GroundPlane& plane,
                std::vector<Vec3>* point_grad = nullptr, double weight = 1.0);

/// Object vertices' ground violation for pose xi.
double e_ground_object(const TriMesh& mesh, const RigidTransform& xi, const GroundPlane& plane,
                       Vec6* xi_grad = nullptr, double weight = 1.0);

/// Second differences of virtual markers over a sequence of states.
double e_smooth_body(const BodyModel& model, std::span<const BodyState> states,
                     std::vector<BodyCotangent>* grads = nullptr, double weight = 1.0);

/// Second differences of the transformed object vertices.
double e_accel_object(std::span<const RigidTransform> xi, const TriMesh& mesh,
                      std::vector<Vec6>* grads = nullptr, double weight = 1.0);

// ---------------------------------------------------------------------------
// Object fitting term

/// Observed data for one view: pixels inside the selected object mask and
/// the observed depth there.
struct ObjectViewTarget {
  PinholeCamera camera;
  std::vector<int> pixels;
  std::vector<float> depth;
};

struct ObjectFrameTarget {
  std::vector<ObjectViewTarget> views;
};

ObjectViewTarget make_object_view_target(const PinholeCamera& cam, const Silhouette& mask,
                                         const DepthImage& depth);

double e_object(const RigidTransform& xi, const TriMesh& mesh, const ObjectFrameTarget& target,
                const EnergyWeights& weights);

/// Full-image form, used where masks are at hand.
double e_object(const RigidTransform& xi, const TriMesh& mesh,
                std::span<const PinholeCamera> cams, std::span<const Silhouette> masks,
                std::span<const DepthImage> depths, const EnergyWeights& weights);

struct FiniteDifferenceSteps {
  double rotation = 2e-3;     // radians
  double translation = 2e-3;  // meters
};

/// Central differences over the 6 pose parameters.
Vec6 e_object_gradient(const RigidTransform& xi, const TriMesh& mesh,
                       const ObjectFrameTarget& target, const EnergyWeights& weights,
                       const FiniteDifferenceSteps& steps = {}, double* value = nullptr);

// ---------------------------------------------------------------------------
// Sequence assembly

/// Everything fixed during a refinement: models, cameras, observations
/// reduced to per-frame targets, and the derived spatial indices.
struct SceneData {
  const BodyModel* body = nullptr;
  const ObjectModel* object = nullptr;
  std::vector<PinholeCamera> cameras;
  GroundPlane ground;
  std::vector<int> contact_body_ids;
  ContactSchedule schedule;

  std::vector<ObjectFrameTarget> object_targets;               // per frame
  std::vector<std::vector<KeypointDetection>> keypoints;       // frame, view
  std::vector<std::vector<std::vector<Vec3>>> body_points;     // frame, view

  SolidIndex object_solid;
  MeshIndex object_contact;
  std::vector<double> joint_weights;
  int threads = 1;

  int frame_count() const { return static_cast<int>(object_targets.size()); }
  /// Builds the indices; call after filling the public fields.
  void prepare(const EnergyWeights& weights);
};

struct EnergyBreakdown {
  double object = 0.0;          // (1/T) sum E_O
  double body = 0.0;            // (1/T) sum E_B
  double penetration = 0.0;     // (1/T) sum lambda_P E_P(object)
  double contact = 0.0;         // (1/T) sum Q_t E_C
  double ground = 0.0;          // (lambda_G / T) sum (E_G + E_G')
  double contact_gated = 0.0;   // (lambda_Q / T) sum Q_t E_C
  double smooth = 0.0;          // lambda_S E_S
  double accel = 0.0;           // lambda_A E_A
  std::vector<double> per_frame;

  double total() const {
    return object + body + penetration + contact + ground + contact_gated + smooth + accel;
  }
};

/// Per-frame body energy: E_J + lambda_D E_D + priors + lambda_P E_P(self).
double e_body_frame(const SceneData& scene, const BodyParams& params, const BodyState& state,
                    const DepthMatches& matches, const EnergyWeights& weights, int frame,
                    BodyCotangent* grad = nullptr, BodyParams* param_grad = nullptr);

/// Full refinement objective over all frames. `matches` holds the frozen
/// depth correspondences per frame.
EnergyBreakdown e_total(const SceneData& scene, const FittedSequence& fitted,
                        std::span<const DepthMatches> matches, const EnergyWeights& weights);

/// Recomputes visibility and depth correspondences for every frame.
std::vector<DepthMatches> refresh_matches(const SceneData& scene, const FittedSequence& fitted);

// ---------------------------------------------------------------------------
// Gradient verification

struct GradcheckEntry {
  std::string term;
  double max_relative_error = 0.0;
  int configurations = 0;
};

/// Compares every analytic gradient with central differences at random
/// configurations drawn from `seed`.
std::vector<GradcheckEntry> gradcheck(const BodyModel& model, const ObjectModel& object,
                                      std::uint64_t seed, int configurations = 20);

}  // namespace interfit
