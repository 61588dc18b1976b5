#include "interfit/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "interfit/parallel.hpp"
#include "interfit/random.hpp"

namespace interfit {

namespace {

void ensure_sized(BodyCotangent& g, const BodyState& s) {
  if (g.vertices.size() != s.posed_vertices.size())
    g.vertices.assign(s.posed_vertices.size(), Vec3::Zero());
  if (g.joints.size() != s.posed_joints.size()) g.joints.assign(s.posed_joints.size(), Vec3::Zero());
  if (g.spheres.size() != s.sphere_centers.size())
    g.spheres.assign(s.sphere_centers.size(), Vec3::Zero());
}

void check_weight(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0)
    throw DomainError(std::string("energy weight ") + name + " must be finite and non-negative");
}

}  // namespace

void EnergyWeights::validate() const {
  check_weight(lambda_segm, "lambda_segm");
  check_weight(lambda_depth, "lambda_depth");
  check_weight(lambda_D, "lambda_D");
  check_weight(lambda_theta_b, "lambda_theta_b");
  check_weight(lambda_theta_h, "lambda_theta_h");
  check_weight(lambda_theta_f, "lambda_theta_f");
  check_weight(lambda_alpha, "lambda_alpha");
  check_weight(lambda_beta, "lambda_beta");
  check_weight(lambda_E, "lambda_E");
  check_weight(lambda_P, "lambda_P");
  check_weight(lambda_G, "lambda_G");
  check_weight(lambda_Q, "lambda_Q");
  check_weight(lambda_S, "lambda_S");
  check_weight(lambda_A, "lambda_A");
  check_weight(k_body, "k_body");
  check_weight(k_hand, "k_hand");
  check_weight(k_face, "k_face");
  if (!(sigma_gm > 0.0) || !std::isfinite(sigma_gm))
    throw DomainError("sigma_gm must be positive");
}

std::vector<double> EnergyWeights::joint_weights(const BodyModel& model) const {
  return joint_class_weights(model, k_body, k_hand, k_face);
}

double gm_rho(double x, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("Geman-McClure scale must be positive");
  const double s2 = sigma * sigma, x2 = x * x;
  return s2 * x2 / (s2 + x2);
}

double gm_rho_dsq(double x, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("Geman-McClure scale must be positive");
  const double s2 = sigma * sigma;
  const double d = s2 + x * x;
  return s2 * s2 / (d * d);
}

// ---------------------------------------------------------------------------

double e_keypoint(const BodyState& state, std::span<const PinholeCamera> cams,
                  std::span<const KeypointDetection> detections,
                  std::span<const double> joint_weights, double sigma, BodyCotangent* grad,
                  double weight) {
  if (cams.size() != detections.size())
    throw DomainError("keypoint detections must be given for every camera");
  if (!(sigma > 0.0)) throw DomainError("Geman-McClure scale must be positive");
  if (grad) ensure_sized(*grad, state);
  const int nj = static_cast<int>(state.posed_joints.size());
  double total = 0.0;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const PinholeCamera& cam = cams[v];
    const auto& joints = detections[v].joints;
    if (static_cast<int>(joints.size()) != nj && !joints.empty())
      throw DomainError("keypoint detection has the wrong number of slots");
    const Mat3 rc = cam.extrinsic.matrix();
    for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
      const double kw = joint_weights[j] * joints[j].confidence;
      if (kw == 0.0) continue;
      const Vec3 c = cam.to_camera(state.posed_joints[j]);
      if (!(c.z() > 0.0)) {
        total += kw * sigma * sigma;
        continue;
      }
      const double iz = 1.0 / c.z();
      const Vec2 uv(cam.fx * c.x() * iz + cam.cx, cam.fy * c.y() * iz + cam.cy);
      const Vec2 r = uv - joints[j].position;
      const double x = r.norm();
      total += kw * gm_rho(x, sigma);
      if (grad) {
        const Vec2 dr = 2.0 * kw * gm_rho_dsq(x, sigma) * r;
        Vec3 dc;
        dc.x() = dr.x() * cam.fx * iz;
        dc.y() = dr.y() * cam.fy * iz;
        dc.z() = -(dr.x() * cam.fx * c.x() + dr.y() * cam.fy * c.y()) * iz * iz;
        grad->joints[j] += weight * (rc.transpose() * dc);
      }
    }
  }
  return total;
}

TriMesh posed_mesh(const BodyModel& model, const BodyState& state) {
  TriMesh m;
  m.vertices = state.posed_vertices;
  m.faces = model.template_mesh.faces;
  m.watertight = model.template_mesh.watertight;
  return m;
}

std::vector<VisibilityMask> body_visibility(const BodyModel& model, const BodyState& state,
                                            std::span<const PinholeCamera> cams,
                                            std::span<const SceneItem> occluders) {
  const TriMesh mesh = posed_mesh(model, state);
  std::vector<VisibilityMask> out;
  out.reserve(cams.size());
  for (const PinholeCamera& cam : cams) out.push_back(visible_vertices(mesh, occluders, cam));
  return out;
}

DepthMatches match_depth(const BodyState& state, std::span<const std::vector<Vec3>> body_points,
                         std::span<const VisibilityMask> visibility) {
  if (body_points.size() != visibility.size())
    throw DomainError("depth term needs one visibility mask per view");
  DepthMatches m;
  const std::size_t nv = body_points.size();
  m.points.resize(nv);
  m.vertex.resize(nv);
  m.empty_view.assign(nv, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<int> ids;
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < visibility[v].size(); ++i)
      if (visibility[v][i]) {
        ids.push_back(static_cast<int>(i));
        pts.push_back(state.posed_vertices[i]);
      }
    if (ids.empty()) {
      m.empty_view[v] = 1;
      continue;
    }
    if (body_points[v].empty()) continue;
    const PointIndex index(pts);
    m.points[v] = body_points[v];
    m.vertex[v].reserve(body_points[v].size());
    for (const Vec3& p : body_points[v]) m.vertex[v].push_back(ids[index.nearest(p).first]);
  }
  return m;
}

double e_depth_body(const BodyState& state, const DepthMatches& matches, BodyCotangent* grad,
                    double weight) {
  if (grad) ensure_sized(*grad, state);
  double total = 0.0;
  for (std::size_t v = 0; v < matches.points.size(); ++v) {
    for (std::size_t i = 0; i < matches.points[v].size(); ++i) {
      const int id = matches.vertex[v][i];
      const Vec3 d = state.posed_vertices[id] - matches.points[v][i];
      const double n = d.norm();
      total += n;
      if (grad && n > 0.0) grad->vertices[id] += (weight / n) * d;
    }
  }
  return total;
}

double e_depth_body(const BodyState& state, std::span<const std::vector<Vec3>> body_points,
                    std::span<const VisibilityMask> visibility) {
  return e_depth_body(state, match_depth(state, body_points, visibility));
}

// ---------------------------------------------------------------------------

namespace {

// Returns the axis-angle component limited by `lim` and, through `dir`, its
// gradient with respect to the packed parameter vector (sparse, as a
// BodyParams). Returns false when the joint is not driven by parameters.
bool limited_angle(const BodyModel& model, const BodyParams& params, const LimitJoint& lim,
                   double* angle, BodyParams* dir) {
  const auto it = std::find(model.decoded_joints.begin(), model.decoded_joints.end(), lim.joint);
  if (it != model.decoded_joints.end()) {
    const int row = 3 * static_cast<int>(it - model.decoded_joints.begin()) + lim.axis;
    *angle = model.pose_decoder.row(row).dot(params.theta_b);
    if (dir) dir->theta_b = model.pose_decoder.row(row).transpose();
    return true;
  }
  const auto h = std::find(model.hand_joints.begin(), model.hand_joints.end(), lim.joint);
  if (h != model.hand_joints.end()) {
    const int idx = 3 * static_cast<int>(h - model.hand_joints.begin()) + lim.axis;
    *angle = params.theta_h[idx];
    if (dir) dir->theta_h[idx] = 1.0;
    return true;
  }
  return false;
}

}  // namespace

double e_joint_limits(const BodyModel& model, const BodyParams& params, BodyParams* grad,
                      double scale) {
  double total = 0.0;
  for (const LimitJoint& lim : model.limit_joints) {
    double angle = 0.0;
    BodyParams dir;
    if (!limited_angle(model, params, lim, &angle, grad ? &dir : nullptr)) continue;
    double slope = 0.0;
    if (angle > lim.max) {
      total += (angle - lim.max) * (angle - lim.max);
      slope = 2.0 * (angle - lim.max);
    } else if (angle < lim.min) {
      total += (lim.min - angle) * (lim.min - angle);
      slope = -2.0 * (lim.min - angle);
    }
    if (grad && slope != 0.0) *grad += dir * (scale * slope);
  }
  return total;
}

PriorTerms e_priors(const BodyModel& model, const BodyParams& params,
                    const EnergyWeights& weights, BodyParams* grad, double scale) {
  PriorTerms p;
  p.beta = weights.lambda_beta * params.beta.squaredNorm();
  p.theta_b = weights.lambda_theta_b * params.theta_b.squaredNorm();
  p.theta_h = weights.lambda_theta_h * params.theta_h.squaredNorm();
  p.theta_f = weights.lambda_theta_f * params.theta_f.squaredNorm();
  p.psi = weights.lambda_E * params.psi.squaredNorm();
  if (grad) {
    grad->beta += (2.0 * scale * weights.lambda_beta) * params.beta;
    grad->theta_b += (2.0 * scale * weights.lambda_theta_b) * params.theta_b;
    grad->theta_h += (2.0 * scale * weights.lambda_theta_h) * params.theta_h;
    grad->theta_f += (2.0 * scale * weights.lambda_theta_f) * params.theta_f;
    grad->psi += (2.0 * scale * weights.lambda_E) * params.psi;
  }
  if (weights.lambda_alpha > 0.0)
    p.alpha = weights.lambda_alpha *
              e_joint_limits(model, params, grad, scale * weights.lambda_alpha);
  return p;
}

double e_self_penetration(const BodyModel& model, const BodyState& state, BodyCotangent* grad,
                          double weight) {
  if (grad) ensure_sized(*grad, state);
  double total = 0.0;
  for (const auto& [a, b] : model.collision_pairs()) {
    const Vec3 d = state.sphere_centers[a] - state.sphere_centers[b];
    const double dist = d.norm();
    const double overlap =
        model.proxy_spheres[a].radius + model.proxy_spheres[b].radius - dist;
    if (overlap <= 0.0) continue;
    total += overlap * overlap;
    if (grad && dist > 0.0) {
      const Vec3 g = (-2.0 * overlap / dist) * d;
      grad->spheres[a] += weight * g;
      grad->spheres[b] -= weight * g;
    }
  }
  return total;
}

double e_object_penetration(const BodyState& state, const SolidIndex& solid,
                            const RigidTransform& xi, BodyCotangent* grad, Vec6* xi_grad,
                            double weight) {
  if (solid.empty()) throw DomainError("penetration needs a watertight object");
  if (grad) ensure_sized(*grad, state);
  const Mat3 r = xi.matrix();
  const Mat3 rt = r.transpose();
  double total = 0.0;
  for (std::size_t i = 0; i < state.posed_vertices.size(); ++i) {
    const Vec3& p = state.posed_vertices[i];
    const auto pen = solid.penetration(rt * (p - xi.translation));
    if (!pen) continue;
    total += pen->distance * pen->distance;
    if (grad || xi_grad) {
      const Vec3 diff = p - (r * pen->point + xi.translation);
      if (grad) grad->vertices[i] += (2.0 * weight) * diff;
      if (xi_grad)
        *xi_grad -= (2.0 * weight) * (transform_point_jacobian(xi, pen->point).transpose() * diff);
    }
  }
  return total;
}

double e_contact(const BodyState& state, std::span<const int> body_ids,
                 const MeshIndex& contact_surface, const RigidTransform& xi, BodyCotangent* grad,
                 Vec6* xi_grad, double weight) {
  if (body_ids.empty() || contact_surface.empty())
    throw DomainError("contact term needs non-empty body and object annotations");
  if (grad) ensure_sized(*grad, state);
  const Mat3 r = xi.matrix();
  const Mat3 rt = r.transpose();
  const double inv_n = 1.0 / static_cast<double>(body_ids.size());
  double total = 0.0;
  for (int id : body_ids) {
    const Vec3& p = state.posed_vertices[id];
    const ClosestPoint cp = contact_surface.closest(rt * (p - xi.translation));
    total += cp.distance * cp.distance;
    if (grad || xi_grad) {
      const Vec3 diff = p - (r * cp.point + xi.translation);
      if (grad) grad->vertices[id] += (2.0 * weight * inv_n) * diff;
      if (xi_grad)
        *xi_grad -=
            (2.0 * weight * inv_n) * (transform_point_jacobian(xi, cp.point).transpose() * diff);
    }
  }
  return total * inv_n;
}

double e_ground(std::span<const Vec3> points, const GroundPlane& plane,
                std::vector<Vec3>* point_grad, double weight) {
  if (point_grad) point_grad->assign(points.size(), Vec3::Zero());
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double below = plane.normal.dot(plane.point - points[i]);
    if (below <= 0.0) continue;
    total += below * below;
    if (point_grad) (*point_grad)[i] = (-2.0 * weight * below) * plane.normal;
  }
  return total;
}

double e_ground_object(const TriMesh& mesh, const RigidTransform& xi, const GroundPlane& plane,
                       Vec6* xi_grad, double weight) {
  const Mat3 r = xi.matrix();
  double total = 0.0;
  for (const Vec3& m : mesh.vertices) {
    const double below = plane.normal.dot(plane.point - (r * m + xi.translation));
    if (below <= 0.0) continue;
    total += below * below;
    if (xi_grad)
      *xi_grad += (-2.0 * weight * below) *
                  (transform_point_jacobian(xi, m).transpose() * plane.normal);
  }
  return total;
}

double e_smooth_body(const BodyModel& model, std::span<const BodyState> states,
                     std::vector<BodyCotangent>* grads, double weight) {
  const int T = static_cast<int>(states.size());
  if (T < 3) throw DomainError("smoothness needs at least 3 frames");
  const auto& ids = model.marker_ids;
  if (ids.empty()) throw DomainError("body model has no virtual markers");
  const double norm = 1.0 / (static_cast<double>(ids.size()) * (T - 2));
  if (grads) {
    grads->resize(T);
    for (int t = 0; t < T; ++t) ensure_sized((*grads)[t], states[t]);
  }
  double total = 0.0;
  for (int t = 1; t + 1 < T; ++t) {
    for (int id : ids) {
      const Vec3 a = states[t + 1].posed_vertices[id] - 2.0 * states[t].posed_vertices[id] +
                     states[t - 1].posed_vertices[id];
      total += a.squaredNorm();
      if (grads) {
        const Vec3 g = (2.0 * weight * norm) * a;
        (*grads)[t + 1].vertices[id] += g;
        (*grads)[t].vertices[id] -= 2.0 * g;
        (*grads)[t - 1].vertices[id] += g;
      }
    }
  }
  return total * norm;
}

double e_accel_object(std::span<const RigidTransform> xi, const TriMesh& mesh,
                      std::vector<Vec6>* grads, double weight) {
  const int T = static_cast<int>(xi.size());
  if (T < 3) throw DomainError("object acceleration needs at least 3 frames");
  const double norm = 1.0 / (T - 2);
  std::vector<Mat3> rot(T);
  for (int t = 0; t < T; ++t) rot[t] = xi[t].matrix();
  if (grads) grads->assign(T, Vec6::Zero());
  double total = 0.0;
  for (int t = 1; t + 1 < T; ++t) {
    for (const Vec3& m : mesh.vertices) {
      const Vec3 a = (rot[t + 1] * m + xi[t + 1].translation) -
                     2.0 * (rot[t] * m + xi[t].translation) + (rot[t - 1] * m + xi[t - 1].translation);
      total += a.squaredNorm();
      if (grads) {
        const Vec3 g = (2.0 * weight * norm) * a;
        (*grads)[t + 1] += transform_point_jacobian(xi[t + 1], m).transpose() * g;
        (*grads)[t] -= 2.0 * (transform_point_jacobian(xi[t], m).transpose() * g);
        (*grads)[t - 1] += transform_point_jacobian(xi[t - 1], m).transpose() * g;
      }
    }
  }
  return total * norm;
}

// ---------------------------------------------------------------------------

ObjectViewTarget make_object_view_target(const PinholeCamera& cam, const Silhouette& mask,
                                         const DepthImage& depth) {
  if (mask.width != cam.width || mask.height != cam.height || depth.width != cam.width ||
      depth.height != cam.height)
    throw DomainError("object target images must match the camera resolution");
  ObjectViewTarget t;
  t.camera = cam;
  for (std::size_t i = 0; i < mask.values.size(); ++i)
    if (mask.values[i] > 0.5f) {
      t.pixels.push_back(static_cast<int>(i));
      t.depth.push_back(depth.values[i]);
    }
  return t;
}

double e_object(const RigidTransform& xi, const TriMesh& mesh, const ObjectFrameTarget& target,
                const EnergyWeights& weights) {
  double total = 0.0;
  thread_local std::vector<float> rendered;
  for (const ObjectViewTarget& view : target.views) {
    if (view.pixels.empty()) continue;
    rendered.resize(view.pixels.size());
    render_depth_at(mesh, xi, view.camera, view.pixels, rendered);
    double segm = 0.0, depth = 0.0;
    for (std::size_t i = 0; i < view.pixels.size(); ++i) {
      if (rendered[i] <= 0.0f) segm += 1.0;
      const double d = static_cast<double>(rendered[i]) - static_cast<double>(view.depth[i]);
      depth += d * d;
    }
    total += weights.lambda_segm * segm + weights.lambda_depth * depth;
  }
  return total;
}

double e_object(const RigidTransform& xi, const TriMesh& mesh,
                std::span<const PinholeCamera> cams, std::span<const Silhouette> masks,
                std::span<const DepthImage> depths, const EnergyWeights& weights) {
  if (cams.size() != masks.size() || cams.size() != depths.size())
    throw DomainError("object term needs a mask and a depth image per camera");
  double total = 0.0;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const DepthImage rd = render_depth(mesh, xi, cams[v]);
    const Silhouette& s = masks[v];
    if (s.width != rd.width || s.height != rd.height || depths[v].width != rd.width ||
        depths[v].height != rd.height)
      throw DomainError("object target images must match the camera resolution");
    double segm = 0.0, depth = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double sv = s.values[i];
      if (sv == 0.0) continue;
      const double rs = rd.values[i] > 0.0f ? 1.0 : 0.0;
      segm += (rs - sv) * sv * (rs - sv) * sv;
      const double dd = (static_cast<double>(rd.values[i]) - depths[v].values[i]) * sv;
      depth += dd * dd;
    }
    total += weights.lambda_segm * segm + weights.lambda_depth * depth;
  }
  return total;
}

Vec6 e_object_gradient(const RigidTransform& xi, const TriMesh& mesh,
                       const ObjectFrameTarget& target, const EnergyWeights& weights,
                       const FiniteDifferenceSteps& steps, double* value) {
  const Vec6 x = xi.as_vector();
  Vec6 g;
  for (int i = 0; i < 6; ++i) {
    const double h = i < 3 ? steps.rotation : steps.translation;
    Vec6 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (e_object(RigidTransform::from_vector(xp), mesh, target, weights) -
            e_object(RigidTransform::from_vector(xm), mesh, target, weights)) /
           (2.0 * h);
  }
  if (value) *value = e_object(xi, mesh, target, weights);
  return g;
}

// ---------------------------------------------------------------------------

void SceneData::prepare(const EnergyWeights& weights) {
  if (!body || !object) throw DomainError("scene needs a body and an object model");
  const std::size_t T = object_targets.size();
  if (keypoints.size() != T || body_points.size() != T || schedule.q.size() != T)
    throw DomainError("scene inputs disagree on the number of frames");
  object_solid = SolidIndex(object->mesh);
  const std::vector<int> faces = object->contact_faces();
  if (faces.empty()) throw DomainError("object has no annotated contact faces");
  object_contact = MeshIndex(object->mesh, faces);
  joint_weights = weights.joint_weights(*body);
}

double e_body_frame(const SceneData& scene, const BodyParams& params, const BodyState& state,
                    const DepthMatches& matches, const EnergyWeights& weights, int frame,
                    BodyCotangent* grad, BodyParams* param_grad) {
  double e = e_keypoint(state, scene.cameras, scene.keypoints[frame], scene.joint_weights,
                        weights.sigma_gm, grad, 1.0);
  if (weights.lambda_D > 0.0)
    e += weights.lambda_D * e_depth_body(state, matches, grad, weights.lambda_D);
  e += e_priors(*scene.body, params, weights, param_grad, 1.0).total();
  if (weights.lambda_P > 0.0)
    e += weights.lambda_P * e_self_penetration(*scene.body, state, grad, weights.lambda_P);
  return e;
}

std::vector<DepthMatches> refresh_matches(const SceneData& scene, const FittedSequence& fitted) {
  const int T = scene.frame_count();
  if (fitted.frame_count() != T) throw DomainError("fitted sequence length mismatch");
  std::vector<DepthMatches> out(T);
  parallel_for(T, scene.threads, [&](int t) {
    const BodyState st = pose_body(*scene.body, fitted.frame_params(t));
    const SceneItem occ{&scene.object->mesh, fitted.object.xi[t], 1};
    const auto vis = body_visibility(*scene.body, st, scene.cameras, std::span(&occ, 1));
    out[t] = match_depth(st, scene.body_points[t], vis);
  });
  return out;
}

EnergyBreakdown e_total(const SceneData& scene, const FittedSequence& fitted,
                        std::span<const DepthMatches> matches, const EnergyWeights& weights) {
  const int T = scene.frame_count();
  if (fitted.frame_count() != T || fitted.object.size() != T ||
      static_cast<int>(matches.size()) != T || fitted.schedule.size() != T)
    throw DomainError("e_total inputs disagree on the number of frames");
  if (T == 0) throw DomainError("e_total needs at least one frame");

  struct Frame {
    double object = 0, body = 0, pen = 0, contact = 0, ground = 0;
  };
  std::vector<Frame> parts(T);
  std::vector<BodyState> states(T);
  parallel_for(T, scene.threads, [&](int t) {
    const BodyParams p = fitted.frame_params(t);
    states[t] = pose_body(*scene.body, p);
    const RigidTransform& xi = fitted.object.xi[t];
    Frame& f = parts[t];
    if (weights.lambda_segm > 0.0 || weights.lambda_depth > 0.0)
      f.object = e_object(xi, scene.object->mesh, scene.object_targets[t], weights);
    f.body = e_body_frame(scene, p, states[t], matches[t], weights, t);
    if (weights.lambda_P > 0.0)
      f.pen = weights.lambda_P * e_object_penetration(states[t], scene.object_solid, xi);
    if (fitted.schedule.q[t] && !scene.contact_body_ids.empty())
      f.contact = e_contact(states[t], scene.contact_body_ids, scene.object_contact, xi);
    if (weights.lambda_G > 0.0)
      f.ground = e_ground(states[t].posed_vertices, scene.ground) +
                 e_ground_object(scene.object->mesh, xi, scene.ground);
  });

  EnergyBreakdown out;
  out.per_frame.resize(T);
  const double inv_t = 1.0 / T;
  for (int t = 0; t < T; ++t) {
    const Frame& f = parts[t];
    out.object += inv_t * f.object;
    out.body += inv_t * f.body;
    out.penetration += inv_t * f.pen;
    out.contact += inv_t * f.contact;
    out.ground += inv_t * weights.lambda_G * f.ground;
    out.contact_gated += inv_t * weights.lambda_Q * f.contact;
    out.per_frame[t] = f.object + f.body + f.pen + (1.0 + weights.lambda_Q) * f.contact +
                       weights.lambda_G * f.ground;
  }
  if (T >= 3) {
    if (weights.lambda_S > 0.0) out.smooth = weights.lambda_S * e_smooth_body(*scene.body, states);
    if (weights.lambda_A > 0.0)
      out.accel = weights.lambda_A * e_accel_object(fitted.object.xi, scene.object->mesh);
  }
  return out;
}

}  // namespace interfit
