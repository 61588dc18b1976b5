#include "interfit/body_model.hpp"

#include <algorithm>
#include <cmath>

namespace interfit {

Eigen::VectorXd BodyParams::pack() const {
  Eigen::VectorXd v(kSize);
  v << beta, theta_b, theta_h, theta_f, psi, gamma;
  return v;
}

BodyParams BodyParams::unpack(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kSize) throw DomainError("body parameter vector has the wrong length");
  BodyParams p;
  p.beta = v.segment<kShapeDim>(kBetaOffset);
  p.theta_b = v.segment<kPoseLatentDim>(kThetaBOffset);
  p.theta_h = v.segment<kHandDim>(kThetaHOffset);
  p.theta_f = v.segment<kFaceDim>(kThetaFOffset);
  p.psi = v.segment<kExpressionDim>(kPsiOffset);
  p.gamma = v.segment<3>(kGammaOffset);
  return p;
}

bool BodyParams::finite() const { return pack().allFinite(); }

BodyParams& BodyParams::operator+=(const BodyParams& o) {
  beta += o.beta;
  theta_b += o.theta_b;
  theta_h += o.theta_h;
  theta_f += o.theta_f;
  psi += o.psi;
  gamma += o.gamma;
  return *this;
}

BodyParams BodyParams::operator*(double s) const {
  BodyParams p = *this;
  p.beta *= s;
  p.theta_b *= s;
  p.theta_h *= s;
  p.theta_f *= s;
  p.psi *= s;
  p.gamma *= s;
  return p;
}

// ---------------------------------------------------------------------------

int BodyModel::joint_index(const std::string& name) const {
  const auto it = std::find(joint_names.begin(), joint_names.end(), name);
  if (it == joint_names.end()) throw DomainError("unknown joint '" + name + "'");
  return static_cast<int>(it - joint_names.begin());
}

void BodyModel::validate() const {
  template_mesh.validate();
  const int nj = joint_count();
  const int nv = vertex_count();
  if (nj == 0) throw DomainError("body model has no joints");
  if (static_cast<int>(joint_names.size()) != nj || static_cast<int>(joint_classes.size()) != nj ||
      static_cast<int>(rest_joints_base.size()) != nj)
    throw DomainError("body model joint arrays disagree in length");
  if (parents[0] != -1) throw DomainError("joint 0 must be the root");
  for (int j = 1; j < nj; ++j)
    if (parents[j] < 0 || parents[j] >= j)
      throw DomainError("joint parents must form a single tree in topological order");
  if (shape_joint_basis.rows() != 3 * nj || shape_joint_basis.cols() != kShapeDim)
    throw DomainError("shape joint basis has the wrong dimensions");
  if (shape_vertex_basis.rows() != 3 * nv || shape_vertex_basis.cols() != kShapeDim)
    throw DomainError("shape vertex basis has the wrong dimensions");
  if (skinning_weights.rows() != nv || skinning_weights.cols() != nj)
    throw DomainError("skinning weights have the wrong dimensions");
  for (int v = 0; v < nv; ++v) {
    if ((skinning_weights.row(v).array() < 0.0).any())
      throw DomainError("negative skinning weight");
    if (std::abs(skinning_weights.row(v).sum() - 1.0) > 1e-9)
      throw DomainError("skinning weights must sum to one per vertex");
  }
  if (pose_decoder.rows() != 3 * static_cast<int>(decoded_joints.size()) ||
      pose_decoder.cols() != kPoseLatentDim)
    throw DomainError("pose decoder has the wrong dimensions");
  if (static_cast<int>(hand_joints.size()) * 3 != kHandDim)
    throw DomainError("hand joint list does not match the hand pose size");
  if (static_cast<int>(face_joints.size()) * 3 != kFaceDim)
    throw DomainError("face joint list does not match the face pose size");
  auto check_joint = [nj](int j) {
    if (j < 0 || j >= nj) throw DomainError("joint index out of range");
  };
  for (int j : decoded_joints) check_joint(j);
  for (int j : hand_joints) check_joint(j);
  for (int j : face_joints) check_joint(j);
  auto check_vertex = [nv](int v) {
    if (v < 0 || v >= nv) throw DomainError("vertex id out of range");
  };
  for (int v : contact_region_ids) check_vertex(v);
  for (int v : marker_ids) check_vertex(v);
  for (const LimitJoint& l : limit_joints) {
    check_joint(l.joint);
    if (l.axis < 0 || l.axis > 2 || l.min > l.max) throw DomainError("invalid joint limit");
  }
  for (const ProxySphere& s : proxy_spheres) {
    check_joint(s.joint);
    check_joint(s.end);
    if (!(s.radius > 0.0)) throw DomainError("proxy sphere radius must be positive");
  }
}

void BodyModel::finalize() {
  influences.assign(vertex_count(), {});
  for (int v = 0; v < vertex_count(); ++v)
    for (int j = 0; j < joint_count(); ++j)
      if (skinning_weights(v, j) != 0.0) influences[v].push_back({j, skinning_weights(v, j)});
}

std::vector<std::pair<int, int>> BodyModel::collision_pairs() const {
  const int nj = joint_count();
  std::vector<int> depth(nj, 0);
  for (int j = 1; j < nj; ++j) depth[j] = depth[parents[j]] + 1;
  auto tree_distance = [&](int a, int b) {
    int d = 0;
    while (a != b) {
      if (depth[a] >= depth[b]) {
        a = parents[a];
      } else {
        b = parents[b];
      }
      ++d;
    }
    return d;
  };
  std::vector<std::pair<int, int>> out;
  const int ns = static_cast<int>(proxy_spheres.size());
  for (int a = 0; a < ns; ++a)
    for (int b = a + 1; b < ns; ++b)
      if (tree_distance(proxy_spheres[a].joint, proxy_spheres[b].joint) > 2) out.emplace_back(a, b);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec3> decode_pose(const BodyModel& model,
                              const Eigen::Ref<const BodyParams::PoseLatent>& theta_b) {
  const Eigen::VectorXd decoded = model.pose_decoder * theta_b;
  std::vector<Vec3> out(model.joint_count(), Vec3::Zero());
  for (std::size_t k = 0; k < model.decoded_joints.size(); ++k)
    out[model.decoded_joints[k]] = decoded.segment<3>(3 * static_cast<Eigen::Index>(k));
  return out;
}

std::vector<Vec3> shaped_joints(const BodyModel& model,
                                const Eigen::Ref<const BodyParams::Shape>& beta) {
  const Eigen::VectorXd offsets = model.shape_joint_basis * beta;
  std::vector<Vec3> out(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j)
    out[j] = model.rest_joints_base[j] + offsets.segment<3>(3 * j);
  return out;
}

BodyState pose_body(const BodyModel& model, const BodyParams& params) {
  const int nj = model.joint_count();
  const int nv = model.vertex_count();
  BodyState s;

  s.rest_joints = shaped_joints(model, params.beta);
  const Eigen::VectorXd vert_offsets = model.shape_vertex_basis * params.beta;
  s.shaped_vertices.resize(nv);
  for (int v = 0; v < nv; ++v)
    s.shaped_vertices[v] = model.template_mesh.vertices[v] + vert_offsets.segment<3>(3 * v);

  s.joint_rotations = decode_pose(model, params.theta_b);
  for (std::size_t k = 0; k < model.hand_joints.size(); ++k)
    s.joint_rotations[model.hand_joints[k]] = params.theta_h.segment<3>(3 * static_cast<int>(k));
  for (std::size_t k = 0; k < model.face_joints.size(); ++k)
    s.joint_rotations[model.face_joints[k]] = params.theta_f.segment<3>(3 * static_cast<int>(k));

  s.local_rotations.resize(nj);
  s.world_rotations.resize(nj);
  s.world_translations.resize(nj);
  for (int j = 0; j < nj; ++j) {
    s.local_rotations[j] = rodrigues(s.joint_rotations[j]);
    const int p = model.parents[j];
    if (p < 0) {
      s.world_rotations[j] = s.local_rotations[j];
      s.world_translations[j] = s.rest_joints[j];
    } else {
      s.world_rotations[j] = s.world_rotations[p] * s.local_rotations[j];
      s.world_translations[j] =
          s.world_translations[p] + s.world_rotations[p] * (s.rest_joints[j] - s.rest_joints[p]);
    }
  }

  s.posed_joints.resize(nj);
  for (int j = 0; j < nj; ++j) s.posed_joints[j] = s.world_translations[j] + params.gamma;

  s.posed_vertices.resize(nv);
  for (int v = 0; v < nv; ++v) {
    Vec3 acc = Vec3::Zero();
    for (const auto& inf : model.influences[v])
      acc += inf.weight * (s.world_rotations[inf.joint] *
                               (s.shaped_vertices[v] - s.rest_joints[inf.joint]) +
                           s.world_translations[inf.joint]);
    s.posed_vertices[v] = acc + params.gamma;
  }

  s.sphere_centers.resize(model.proxy_spheres.size());
  for (std::size_t k = 0; k < model.proxy_spheres.size(); ++k) {
    const ProxySphere& ps = model.proxy_spheres[k];
    const Vec3 offset = ps.fraction * (s.rest_joints[ps.end] - s.rest_joints[ps.joint]);
    s.sphere_centers[k] =
        s.world_rotations[ps.joint] * offset + s.world_translations[ps.joint] + params.gamma;
  }
  return s;
}

BodyCotangent BodyCotangent::zeros(const BodyModel& model) {
  BodyCotangent c;
  c.vertices.assign(model.vertex_count(), Vec3::Zero());
  c.joints.assign(model.joint_count(), Vec3::Zero());
  c.spheres.assign(model.proxy_spheres.size(), Vec3::Zero());
  return c;
}

void BodyCotangent::clear() {
  for (Vec3& v : vertices) v.setZero();
  for (Vec3& v : joints) v.setZero();
  for (Vec3& v : spheres) v.setZero();
}

BodyParams pose_body_vjp(const BodyModel& model, const BodyParams& params, const BodyState& s,
                         const BodyCotangent& cot) {
  (void)params;
  const int nj = model.joint_count();
  const int nv = model.vertex_count();
  BodyParams grad;

  std::vector<Mat3> g_rw(nj, Mat3::Zero());
  std::vector<Vec3> g_tw(nj, Vec3::Zero());
  std::vector<Vec3> g_j(nj, Vec3::Zero());
  Eigen::VectorXd g_x = Eigen::VectorXd::Zero(3 * nv);

  if (!cot.joints.empty()) {
    for (int j = 0; j < nj; ++j) {
      g_tw[j] += cot.joints[j];
      grad.gamma += cot.joints[j];
    }
  }

  if (!cot.vertices.empty()) {
    for (int v = 0; v < nv; ++v) {
      const Vec3& g = cot.vertices[v];
      if (g.isZero(0.0)) continue;
      grad.gamma += g;
      Vec3 gx = Vec3::Zero();
      for (const auto& inf : model.influences[v]) {
        const int j = inf.joint;
        const Vec3 wg = inf.weight * g;
        g_rw[j] += wg * (s.shaped_vertices[v] - s.rest_joints[j]).transpose();
        g_tw[j] += wg;
        const Vec3 back = s.world_rotations[j].transpose() * wg;
        gx += back;
        g_j[j] -= back;
      }
      g_x.segment<3>(3 * v) = gx;
    }
  }

  if (!cot.spheres.empty()) {
    for (std::size_t k = 0; k < model.proxy_spheres.size(); ++k) {
      const Vec3& g = cot.spheres[k];
      if (g.isZero(0.0)) continue;
      const ProxySphere& ps = model.proxy_spheres[k];
      grad.gamma += g;
      const Vec3 offset = ps.fraction * (s.rest_joints[ps.end] - s.rest_joints[ps.joint]);
      g_rw[ps.joint] += g * offset.transpose();
      g_tw[ps.joint] += g;
      const Vec3 back = ps.fraction * (s.world_rotations[ps.joint].transpose() * g);
      g_j[ps.end] += back;
      g_j[ps.joint] -= back;
    }
  }

  // Reverse sweep through the kinematic tree.
  std::vector<Mat3> g_local(nj, Mat3::Zero());
  for (int j = nj - 1; j >= 1; --j) {
    const int p = model.parents[j];
    const Mat3& rwp = s.world_rotations[p];
    g_tw[p] += g_tw[j];
    g_rw[p] += g_tw[j] * (s.rest_joints[j] - s.rest_joints[p]).transpose();
    const Vec3 back = rwp.transpose() * g_tw[j];
    g_j[j] += back;
    g_j[p] -= back;
    g_local[j] = rwp.transpose() * g_rw[j];
    g_rw[p] += g_rw[j] * s.local_rotations[j].transpose();
  }
  g_j[0] += g_tw[0];
  g_local[0] = g_rw[0];

  std::vector<Vec3> g_aa(nj, Vec3::Zero());
  for (int j = 0; j < nj; ++j) {
    if (g_local[j].isZero(0.0)) continue;
    const auto dr = rodrigues_derivatives(s.joint_rotations[j]);
    for (int k = 0; k < 3; ++k) g_aa[j][k] = (g_local[j].array() * dr[k].array()).sum();
  }

  Eigen::VectorXd g_decoded(3 * model.decoded_joints.size());
  for (std::size_t k = 0; k < model.decoded_joints.size(); ++k)
    g_decoded.segment<3>(3 * static_cast<Eigen::Index>(k)) = g_aa[model.decoded_joints[k]];
  grad.theta_b = model.pose_decoder.transpose() * g_decoded;
  for (std::size_t k = 0; k < model.hand_joints.size(); ++k)
    grad.theta_h.segment<3>(3 * static_cast<int>(k)) = g_aa[model.hand_joints[k]];
  for (std::size_t k = 0; k < model.face_joints.size(); ++k)
    grad.theta_f.segment<3>(3 * static_cast<int>(k)) = g_aa[model.face_joints[k]];

  Eigen::VectorXd g_j_flat(3 * nj);
  for (int j = 0; j < nj; ++j) g_j_flat.segment<3>(3 * j) = g_j[j];
  grad.beta = model.shape_joint_basis.transpose() * g_j_flat +
              model.shape_vertex_basis.transpose() * g_x;
  return grad;
}

std::vector<Vec3> contact_subset(const BodyState& state, const BodyModel& model) {
  return gather_vertices(state, model.contact_region_ids);
}

std::vector<Vec3> gather_vertices(const BodyState& state, std::span<const int> ids) {
  std::vector<Vec3> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(state.posed_vertices.at(id));
  return out;
}

std::vector<double> joint_class_weights(const BodyModel& model, double body, double hand,
                                        double face) {
  std::vector<double> out(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j) {
    switch (model.joint_classes[j]) {
      case JointClass::body: out[j] = body; break;
      case JointClass::hand: out[j] = hand; break;
      case JointClass::face: out[j] = face; break;
    }
  }
  return out;
}

}  // namespace interfit
