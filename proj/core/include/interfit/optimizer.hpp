#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "interfit/energy.hpp"
#include "interfit/sequence.hpp"

namespace interfit {

enum class DescentMethod { gradient, lbfgs };

struct OptimOptions {
  DescentMethod method = DescentMethod::gradient;
  int memory = 8;               // curvature pairs kept by lbfgs
  int max_iters = 200;
  double initial_step = 1.0;
  double backtrack = 0.5;       // step shrink factor, in (0, 1)
  double growth = 2.0;          // step growth after an accepted step
  double armijo = 1e-4;         // sufficient decrease constant
  int max_backtracks = 40;
  double tolerance = 1e-10;     // relative decrease below which descent stops
  int patience = 3;             // consecutive small decreases before stopping
  double rotation_scale = 1.0;  // per-block preconditioning
  double translation_scale = 1.0;
  double shape_scale = 1.0;
  double pose_scale = 1.0;
  int outer_iters = 1;          // visibility/correspondence refreshes
  double max_move = 0.0;        // cap on the largest scaled trial displacement; 0 disables

  void validate() const;
};

/// Value and gradient of a smooth objective. `grad` may be null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> history;  // objective after each accepted step, starting with init
};

/// Descent with Armijo backtracking. `scales` (same length as x, or empty
/// for all ones) is a diagonal preconditioner: it multiplies the gradient for
/// plain descent and seeds the inverse-Hessian guess for lbfgs. Accepted
/// values never increase.
MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& init,
                        const OptimOptions& opts, const Eigen::VectorXd& scales = {});

/// Index of the candidate with the largest IoU against `prev_render`, or
/// nothing when the best IoU is below `iou_floor`. Ties keep the lowest index.
std::optional<int> select_candidate(const Silhouette& prev_render,
                                    std::span<const Silhouette> candidates,
                                    double iou_floor = 0.1);

/// Step settings suited to the pixel-count scale of the object term.
inline OptimOptions default_tracking_optim() {
  OptimOptions o;
  o.max_iters = 50;
  o.initial_step = 1e-6;
  o.max_move = 0.01;
  return o;
}

struct TrackingOptions {
  OptimOptions optim = default_tracking_optim();
  EnergyWeights weights;
  double iou_floor = 0.1;
  /// Finite-difference steps, coarse to fine; descent runs once per level.
  std::vector<FiniteDifferenceSteps> fd_levels = {{8e-3, 4e-3}, {2e-3, 1e-3}};
  /// Follow each descent level with coordinate probing at the level's steps.
  bool polish = true;
};

struct TrackingResult {
  ObjectTrajectory trajectory;
  std::vector<std::vector<int>> selected;  // per frame and view; -1 when rejected
  std::vector<ObjectFrameTarget> targets;  // the observations each frame was fitted to
  std::vector<double> energy;
};

/// Sequential object tracking: candidate selection against the previous
/// pose's render, then finite-difference descent on the object term.
TrackingResult track_object(const SequenceObservation& seq, const ObjectModel& object,
                            const RigidTransform& xi_0, const TrackingOptions& opts = {});

/// Minimizes the object term for one frame starting at `init`.
RigidTransform fit_object_frame(const TriMesh& mesh, const ObjectFrameTarget& target,
                                const RigidTransform& init, const TrackingOptions& opts,
                                double* energy = nullptr);

/// Quasi-Newton settings for the keypoint-scale body energy: up to eight
/// correspondence passes of 100 iterations per frame.
inline OptimOptions default_body_optim() {
  OptimOptions o;
  o.method = DescentMethod::lbfgs;
  o.max_iters = 100;
  o.outer_iters = 8;
  o.initial_step = 1e-6;
  o.pose_scale = 30.0;
  o.rotation_scale = 30.0;
  o.shape_scale = 30.0;
  return o;
}

struct BodyFitOptions {
  OptimOptions optim = default_body_optim();
  EnergyWeights weights;
};

/// Per-frame body fitting. Frames run in order, each initialized from the
/// previous solution; the first starts from the rest pose at the centroid of
/// the body-labelled points. `object` and `object_poses` (optional) act as
/// occluders for visibility.
std::vector<BodyParams> fit_body_frames(const SequenceObservation& seq, const BodyModel& model,
                                        const BodyFitOptions& opts,
                                        const ObjectModel* object = nullptr,
                                        const ObjectTrajectory* object_poses = nullptr);

/// Component-wise mean.
BodyParams::Shape mean_shape(std::span<const BodyParams::Shape> betas);

/// Five correspondence refreshes of 100 quasi-Newton iterations.
inline OptimOptions default_refine_optim() {
  OptimOptions o = default_body_optim();
  o.outer_iters = 5;
  o.max_move = 0.01;
  return o;
}

struct RefineOptions {
  OptimOptions optim = default_refine_optim();
  EnergyWeights weights;
  FiniteDifferenceSteps fd;
  bool refine_object = true;
};

/// All-frames refinement of the full objective with the shape frozen.
/// Depth correspondences and visibility are refreshed every outer iteration.
FittedSequence joint_refine(const FittedSequence& init, const SceneData& scene,
                            const RefineOptions& opts);

/// Builds the refinement scene from observations and stage-one selections.
SceneData make_scene(const SequenceObservation& seq, const BodyModel& body,
                     const ObjectModel& object, const ContactAnnotation& annotation,
                     const ContactSchedule& schedule, std::span<const ObjectFrameTarget> targets,
                     const EnergyWeights& weights, int threads = 1);

}  // namespace interfit
