#include "interfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/QR>

#include "interfit/random.hpp"

namespace interfit {

std::string object_kind_name(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::cube:
      return "cube";
    case ObjectKind::cylinder:
      return "cylinder";
    case ObjectKind::handle_box:
      return "handle-box";
  }
  return "cube";
}

ObjectKind parse_object_kind(const std::string& name) {
  if (name == "cube") return ObjectKind::cube;
  if (name == "cylinder") return ObjectKind::cylinder;
  if (name == "handle-box" || name == "handle_box") return ObjectKind::handle_box;
  throw DomainError("unknown object kind '" + name + "'");
}

namespace {

constexpr double kPi = std::numbers::pi;

// Appends an axis-aligned box whose faces are split into an nx x ny x nz
// lattice. Returns the ids of the appended vertices.
std::vector<int> append_box(TriMesh& mesh, const Vec3& lo, const Vec3& hi, int nx, int ny,
                            int nz) {
  const std::array<int, 3> n = {nx, ny, nz};
  std::map<std::array<int, 3>, int> ids;
  std::vector<int> added;
  auto vertex = [&](std::array<int, 3> c) {
    const auto it = ids.find(c);
    if (it != ids.end()) return it->second;
    Vec3 p;
    for (int a = 0; a < 3; ++a)
      p[a] = c[a] == n[a] ? hi[a] : lo[a] + (hi[a] - lo[a]) * c[a] / n[a];
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    ids.emplace(c, id);
    added.push_back(id);
    return id;
  };
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i < n[b]; ++i) {
        for (int j = 0; j < n[c]; ++j) {
          std::array<std::array<int, 3>, 4> q;
          const int di[4] = {0, 1, 1, 0};
          const int dj[4] = {0, 0, 1, 1};
          for (int k = 0; k < 4; ++k) {
            q[k][a] = side == 0 ? 0 : n[a];
            q[k][b] = i + di[k];
            q[k][c] = j + dj[k];
          }
          const int v0 = vertex(q[0]), v1 = vertex(q[1]), v2 = vertex(q[2]), v3 = vertex(q[3]);
          if (side == 1) {
            mesh.faces.push_back({v0, v1, v2});
            mesh.faces.push_back({v0, v2, v3});
          } else {
            mesh.faces.push_back({v0, v2, v1});
            mesh.faces.push_back({v0, v3, v2});
          }
        }
      }
    }
  }
  return added;
}

struct CapsuleVertex {
  int id;
  double s;       // normalized position along the axis
  Vec3 radial;    // unit outward direction (zero at the poles)
};

// Closed tube from a to b with rounded ends.
std::vector<CapsuleVertex> append_capsule(TriMesh& mesh, const Vec3& a, const Vec3& b, double r,
                                          int segments) {
  const Vec3 axis = b - a;
  const double len = axis.norm();
  const Vec3 d = axis / len;
  Vec3 u = d.cross(std::abs(d.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).normalized();
  const Vec3 v = d.cross(u);

  const double cap = std::min(r, 0.45 * len);
  std::vector<std::pair<double, double>> rings = {{0.3 * cap, 0.7 * r}, {cap, r}};
  const int extra = static_cast<int>(std::floor((len - 2.0 * cap) / 0.08));
  for (int k = 1; k <= extra; ++k)
    rings.emplace_back(cap + (len - 2.0 * cap) * k / (extra + 1), r);
  rings.emplace_back(len - cap, r);
  rings.emplace_back(len - 0.3 * cap, 0.7 * r);

  std::vector<CapsuleVertex> out;
  const int base = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(a);
  out.push_back({base, 0.0, Vec3::Zero()});
  for (const auto& [off, rad] : rings) {
    for (int k = 0; k < segments; ++k) {
      const double phi = 2.0 * kPi * k / segments;
      const Vec3 dir = std::cos(phi) * u + std::sin(phi) * v;
      out.push_back({static_cast<int>(mesh.vertices.size()), off / len, dir});
      mesh.vertices.push_back(a + off * d + rad * dir);
    }
  }
  const int pole_b = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(b);
  out.push_back({pole_b, 1.0, Vec3::Zero()});

  const int nr = static_cast<int>(rings.size());
  auto ring = [&](int i, int k) { return base + 1 + i * segments + (k % segments); };
  for (int k = 0; k < segments; ++k) mesh.faces.push_back({base, ring(0, k + 1), ring(0, k)});
  for (int i = 0; i + 1 < nr; ++i) {
    for (int k = 0; k < segments; ++k) {
      mesh.faces.push_back({ring(i, k), ring(i, k + 1), ring(i + 1, k + 1)});
      mesh.faces.push_back({ring(i, k), ring(i + 1, k + 1), ring(i + 1, k)});
    }
  }
  for (int k = 0; k < segments; ++k) mesh.faces.push_back({pole_b, ring(nr - 1, k), ring(nr - 1, k + 1)});
  return out;
}

struct CapsuleSpec {
  Vec3 a, b;
  double radius;
  int joint;
  int blend_parent;  // -1 for none
  int blend_child;
  bool back_contact;  // rear side belongs to the contact region
};

}  // namespace

// ---------------------------------------------------------------------------

ObjectModel make_object(const ObjectSpec& spec, std::uint64_t seed) {
  (void)seed;  // primitives are fully determined by their dimensions
  ObjectModel obj;
  obj.name = object_kind_name(spec.kind);
  TriMesh& m = obj.mesh;
  switch (spec.kind) {
    case ObjectKind::cube: {
      const double h = spec.dims.x() / 2.0;
      if (!(h > 0.0)) throw DomainError("cube side must be positive");
      append_box(m, Vec3(-h, -h, -h), Vec3(h, h, h), 1, 1, 1);
      for (int i = 0; i < static_cast<int>(m.vertices.size()); ++i)
        if (m.vertices[i].z() == h) obj.contact_vertex_ids.push_back(i);
      break;
    }
    case ObjectKind::cylinder: {
      const double r = spec.dims.x();
      const double h = spec.dims.y();
      const int n = spec.segments;
      if (!(r > 0.0 && h > 0.0)) throw DomainError("cylinder dimensions must be positive");
      if (n < 3) throw DomainError("cylinder needs at least 3 segments");
      for (int ring = 0; ring < 2; ++ring) {
        const double z = ring == 0 ? -h / 2.0 : h / 2.0;
        for (int k = 0; k < n; ++k) {
          const double phi = 2.0 * kPi * k / n;
          m.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
        }
      }
      const int cb = 2 * n;
      const int ct = 2 * n + 1;
      m.vertices.emplace_back(0.0, 0.0, -h / 2.0);
      m.vertices.emplace_back(0.0, 0.0, h / 2.0);
      for (int k = 0; k < n; ++k) {
        const int k1 = (k + 1) % n;
        m.faces.push_back({k, k1, n + k1});
        m.faces.push_back({k, n + k1, n + k});
        m.faces.push_back({cb, k1, k});
        m.faces.push_back({ct, n + k, n + k1});
      }
      for (int i = 0; i < 2 * n; ++i) obj.contact_vertex_ids.push_back(i);
      break;
    }
    case ObjectKind::handle_box: {
      const Vec3 d = spec.dims;
      if (!(d.minCoeff() > 0.0)) throw DomainError("handle-box dimensions must be positive");
      append_box(m, -d / 2.0, d / 2.0, 1, 1, 1);
      const double hw = 0.015;
      const double hl = 0.3 * d.y();
      const double top = d.z() / 2.0 + 0.03;
      const auto handle = append_box(m, Vec3(-hw, -hl, d.z() / 2.0), Vec3(hw, hl, top), 1, 1, 1);
      for (int id : handle)
        if (m.vertices[id].z() == top) obj.contact_vertex_ids.push_back(id);
      break;
    }
  }
  m.watertight = true;
  obj.validate();
  return obj;
}

TriMesh ground_disk(double radius, int segments) {
  TriMesh m;
  m.vertices.emplace_back(0.0, 0.0, 0.0);
  for (int k = 0; k < segments; ++k) {
    const double phi = 2.0 * kPi * k / segments;
    m.vertices.emplace_back(radius * std::cos(phi), radius * std::sin(phi), 0.0);
  }
  for (int k = 0; k < segments; ++k) m.faces.push_back({0, 1 + k, 1 + (k + 1) % segments});
  return m;
}

// ---------------------------------------------------------------------------

BodyModel make_toy_body(const ToyBodyConfig& config, std::uint64_t seed) {
  if (config.capsule_segments < 3) throw DomainError("capsule_segments must be at least 3");
  if (config.marker_count < 1) throw DomainError("marker_count must be positive");
  BodyModel m;
  m.seed = seed;
  m.joint_names = {"pelvis",     "spine",      "chest",   "neck",    "head",     "jaw",
                   "l_collar",   "l_shoulder", "l_elbow", "r_collar", "r_shoulder", "r_elbow",
                   "l_hip",      "l_knee",     "l_ankle", "l_toe",   "r_hip",    "r_knee",
                   "r_ankle",    "r_toe",      "l_wrist", "l_curl",  "r_wrist",  "r_curl"};
  m.parents = {-1, 0, 1, 2, 3, 4, 2, 6, 7, 2, 9, 10, 0, 12, 13, 14, 0, 16, 17, 18, 8, 20, 11, 22};
  const int nj = static_cast<int>(m.parents.size());
  m.rest_joints_base = {
      {0, 0, 0.95},     {0, 0, 1.10},     {0, 0, 1.30},     {0, 0, 1.50},    {0, 0, 1.60},
      {0, 0.05, 1.62},  {0.05, 0, 1.45},  {0.18, 0, 1.45},  {0.45, 0, 1.45}, {-0.05, 0, 1.45},
      {-0.18, 0, 1.45}, {-0.45, 0, 1.45}, {0.09, 0, 0.92},  {0.09, 0, 0.50}, {0.09, 0, 0.08},
      {0.09, 0.12, 0.02}, {-0.09, 0, 0.92}, {-0.09, 0, 0.50}, {-0.09, 0, 0.08},
      {-0.09, 0.12, 0.02}, {0.70, 0, 1.45}, {0.79, 0, 1.45}, {-0.70, 0, 1.45}, {-0.79, 0, 1.45}};
  m.joint_classes.assign(nj, JointClass::body);
  m.joint_classes[5] = JointClass::face;
  for (int j = 20; j < 24; ++j) m.joint_classes[j] = JointClass::hand;
  m.decoded_joints = {0, 1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  m.hand_joints = {20, 21, 22, 23};
  m.face_joints = {5};

  // Geometry. Each entry of `rigid` pins a vertex to one joint; capsule
  // vertices blend near their ends.
  TriMesh& mesh = m.template_mesh;
  std::vector<std::vector<std::pair<int, double>>> weights;
  std::vector<Vec3> girth;
  std::vector<int> contact;
  auto grow = [&]() {
    weights.resize(mesh.vertices.size());
    girth.resize(mesh.vertices.size(), Vec3::Zero());
  };

  const std::vector<CapsuleSpec> capsules = {
      {{0, 0, 0.85}, {0, 0, 1.05}, 0.13, 0, -1, 1, true},
      {{0, 0, 1.02}, {0, 0, 1.27}, 0.115, 1, 0, 2, false},
      {{0, 0, 1.24}, {0, 0, 1.50}, 0.14, 2, 1, 3, false},
      {{0, 0, 1.46}, {0, 0, 1.60}, 0.05, 3, 2, 4, false},
      {{0, 0, 1.57}, {0, 0, 1.80}, 0.09, 4, 3, -1, false},
      {{0.10, 0, 1.45}, {0.46, 0, 1.45}, 0.05, 7, 6, 8, false},
      {{0.44, 0, 1.45}, {0.68, 0, 1.45}, 0.038, 8, 7, -1, false},
      {{-0.10, 0, 1.45}, {-0.46, 0, 1.45}, 0.05, 10, 9, 11, false},
      {{-0.44, 0, 1.45}, {-0.68, 0, 1.45}, 0.038, 11, 10, -1, false},
      {{0.09, 0, 0.93}, {0.09, 0, 0.48}, 0.065, 12, 0, 13, true},
      {{0.09, 0, 0.52}, {0.09, 0, 0.08}, 0.048, 13, 12, 14, false},
      {{-0.09, 0, 0.93}, {-0.09, 0, 0.48}, 0.065, 16, 0, 17, true},
      {{-0.09, 0, 0.52}, {-0.09, 0, 0.08}, 0.048, 17, 16, 18, false},
  };
  for (const CapsuleSpec& c : capsules) {
    const auto verts = append_capsule(mesh, c.a, c.b, c.radius, config.capsule_segments);
    grow();
    for (const CapsuleVertex& cv : verts) {
      auto& w = weights[cv.id];
      double wp = 0.0, wc = 0.0;
      if (c.blend_parent >= 0 && cv.s < 0.2) wp = 0.5 * (0.2 - cv.s) / 0.2;
      if (c.blend_child >= 0 && cv.s > 0.8) wc = 0.5 * (cv.s - 0.8) / 0.2;
      w.push_back({c.joint, 1.0 - wp - wc});
      if (wp > 0.0) w.push_back({c.blend_parent, wp});
      if (wc > 0.0) w.push_back({c.blend_child, wc});
      girth[cv.id] = cv.radial;
      if (c.back_contact && cv.radial.y() < -0.5) contact.push_back(cv.id);
    }
  }

  auto rigid_box = [&](const Vec3& lo, const Vec3& hi, int nx, int ny, int nz, int joint,
                       bool bottom_contact) {
    const auto ids = append_box(mesh, lo, hi, nx, ny, nz);
    grow();
    for (int id : ids) {
      weights[id] = {{joint, 1.0}};
      if (bottom_contact && mesh.vertices[id].z() == lo.z()) contact.push_back(id);
    }
  };
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const int wrist = side == 0 ? 20 : 22;
    const int curl = wrist + 1;
    const int ankle = side == 0 ? 14 : 18;
    const int toe = ankle + 1;
    auto span = [sx](double a, double b) {
      return std::pair<double, double>(std::min(sx * a, sx * b), std::max(sx * a, sx * b));
    };
    auto [p0, p1] = span(0.70, 0.79);
    rigid_box({p0, -0.04, 1.4375}, {p1, 0.04, 1.4625}, 4, 4, 1, wrist, true);
    auto [f0, f1] = span(0.79, 0.88);
    rigid_box({f0, -0.04, 1.4375}, {f1, 0.04, 1.4525}, 2, 4, 1, curl, true);
    auto [t0, t1] = span(0.715, 0.775);
    rigid_box({t0, 0.04, 1.445}, {t1, 0.062, 1.468}, 1, 1, 1, wrist, false);
    auto [a0, a1] = span(0.05, 0.13);
    rigid_box({a0, -0.05, 0.005}, {a1, 0.12, 0.075}, 1, 2, 1, ankle, true);
    rigid_box({a0, 0.12, 0.005}, {a1, 0.18, 0.04}, 1, 1, 1, toe, true);
  }
  mesh.watertight = true;

  const int nv = static_cast<int>(mesh.vertices.size());
  m.skinning_weights = Eigen::MatrixXd::Zero(nv, nj);
  for (int v = 0; v < nv; ++v)
    for (const auto& [j, w] : weights[v]) m.skinning_weights(v, j) += w;

  std::sort(contact.begin(), contact.end());
  contact.erase(std::unique(contact.begin(), contact.end()), contact.end());
  m.contact_region_ids = contact;
  for (int k = 0; k < config.marker_count; ++k)
    m.marker_ids.push_back(static_cast<int>(static_cast<long long>(k) * nv / config.marker_count));

  // Shape space.
  Rng shape_rng(derive_seed(seed, 2));
  std::vector<std::vector<Vec3>> joint_disp(kShapeDim, std::vector<Vec3>(nj, Vec3::Zero()));
  for (int j = 0; j < nj; ++j) joint_disp[0][j] = 0.03 * m.rest_joints_base[j];
  for (int j : {6, 9}) joint_disp[2][j] = Vec3(j == 6 ? 0.01 : -0.01, 0, 0);
  for (int j : {7, 8, 20, 21}) joint_disp[2][j] = Vec3(0.02, 0, 0);
  for (int j : {10, 11, 22, 23}) joint_disp[2][j] = Vec3(-0.02, 0, 0);
  for (int c = 3; c < kShapeDim; ++c) {
    for (int j = 0; j < nj; ++j) {
      Vec3 inc;
      for (int a = 0; a < 3; ++a) inc[a] = shape_rng.normal(0.0, 0.006);
      if (j >= 20) inc.setZero();  // hands stay rigid with their forearm end
      joint_disp[c][j] = (m.parents[j] >= 0 ? joint_disp[c][m.parents[j]] : Vec3::Zero()) + inc;
    }
  }
  m.shape_joint_basis = Eigen::MatrixXd::Zero(3 * nj, kShapeDim);
  for (int c = 0; c < kShapeDim; ++c)
    for (int j = 0; j < nj; ++j) m.shape_joint_basis.block<3, 1>(3 * j, c) = joint_disp[c][j];
  m.shape_vertex_basis = Eigen::MatrixXd::Zero(3 * nv, kShapeDim);
  for (int v = 0; v < nv; ++v) {
    m.shape_vertex_basis.block<3, 1>(3 * v, 0) = 0.03 * mesh.vertices[v];
    m.shape_vertex_basis.block<3, 1>(3 * v, 1) = 0.008 * girth[v];
    for (int c = 2; c < kShapeDim; ++c) {
      Vec3 acc = Vec3::Zero();
      for (const auto& [j, w] : weights[v]) acc += w * joint_disp[c][j];
      m.shape_vertex_basis.block<3, 1>(3 * v, c) = acc;
    }
  }

  // Pose decoder: the first three latent dimensions drive the root directly,
  // the rest map through a scaled matrix with orthonormal columns.
  const int rows = 3 * static_cast<int>(m.decoded_joints.size());
  m.pose_decoder = Eigen::MatrixXd::Zero(rows, kPoseLatentDim);
  m.pose_decoder.block<3, 3>(0, 0).setIdentity();
  Rng dec_rng(derive_seed(seed, 1));
  Eigen::MatrixXd g(rows - 3, kPoseLatentDim - 3);
  for (int c = 0; c < g.cols(); ++c)
    for (int r = 0; r < g.rows(); ++r) g(r, c) = dec_rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  m.pose_decoder.block(3, 3, rows - 3, kPoseLatentDim - 3) = config.decoder_scale * q;

  m.limit_joints = {{8, 2, -0.3, 2.6}, {11, 2, -2.6, 0.3}, {13, 0, -2.6, 0.3}, {17, 0, -2.6, 0.3}};
  m.proxy_spheres = {{0, 1, 0.3, 0.12},   {1, 2, 0.5, 0.11},   {2, 3, 0.4, 0.13},
                     {7, 8, 0.5, 0.045},  {8, 20, 0.5, 0.035}, {10, 11, 0.5, 0.045},
                     {11, 22, 0.5, 0.035}, {12, 13, 0.5, 0.065}, {13, 14, 0.5, 0.045},
                     {16, 17, 0.5, 0.065}, {17, 18, 0.5, 0.045}};
  m.finalize();
  m.validate();
  return m;
}

std::vector<std::vector<int>> palm_columns(const BodyModel& model, bool right_hand) {
  const int wrist = model.joint_index(right_hand ? "r_wrist" : "l_wrist");
  const auto& verts = model.template_mesh.vertices;
  double bottom = std::numeric_limits<double>::infinity();
  std::vector<int> rigid;
  for (int v = 0; v < model.vertex_count(); ++v) {
    if (model.skinning_weights(v, wrist) != 1.0) continue;
    rigid.push_back(v);
    bottom = std::min(bottom, verts[v].z());
  }
  std::map<double, std::vector<int>> by_column;
  for (int v : rigid)
    if (verts[v].z() == bottom) by_column[std::abs(verts[v].x())].push_back(v);
  std::vector<std::vector<int>> out;
  for (auto& [s, ids] : by_column) out.push_back(std::move(ids));
  if (out.empty()) throw DomainError("body model has no palm surface");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<PinholeCamera> CameraRig::cameras() const {
  if (count < 1) throw DomainError("camera rig needs at least one camera");
  std::vector<PinholeCamera> out;
  for (int k = 0; k < count; ++k) {
    const double phi = phase + 2.0 * kPi * k / count;
    const Vec3 eye(radius * std::cos(phi), radius * std::sin(phi), height);
    out.push_back(
        PinholeCamera::look_at(eye, target, Vec3::UnitZ(), focal, focal, width, height_px));
  }
  return out;
}

void Scenario::validate() const {
  if (frames < 1) throw DomainError("scenario needs at least one frame");
  if (rig.count < 1) throw DomainError("scenario needs at least one camera");
  if (cloud_stride < 1) throw DomainError("cloud_stride must be positive");
  if (!(object.dims.x() > 0.0)) throw DomainError("object dims must be positive");
  for (const BodyKeyframe& k : body_keys)
    if (k.frame < 0 || k.frame >= frames) throw DomainError("body keyframe outside the sequence");
  for (const ObjectKeyframe& k : object_keys)
    if (k.frame < 0 || k.frame >= frames) throw DomainError("object keyframe outside the sequence");
  if (contact_window) {
    const auto [s, e] = *contact_window;
    if (!(0 <= s && s <= e && e < frames)) throw DomainError("contact window outside the sequence");
    if (!has_body()) throw DomainError("a contact window needs a body script");
  } else if (object_keys.empty()) {
    throw DomainError("scenario without a contact window needs object keyframes");
  }
}

void NoiseConfig::validate() const {
  if (!(keypoint_dropout >= 0.0 && keypoint_dropout <= 1.0))
    throw DomainError("keypoint_dropout must lie in [0, 1]");
  if (!(keypoint_sigma_px >= 0.0) || !(depth_sigma_m >= 0.0))
    throw DomainError("noise sigmas must be non-negative");
  if (distractors < 0) throw DomainError("distractor count must be non-negative");
  if (!(init_rotation_deg >= 0.0) || !(init_translation_m >= 0.0))
    throw DomainError("initial perturbation magnitudes must be non-negative");
}

BodyParams interpolate_body(const std::vector<BodyKeyframe>& keys, int frame) {
  if (keys.empty()) return {};
  std::vector<BodyKeyframe> k = keys;
  std::stable_sort(k.begin(), k.end(),
                   [](const BodyKeyframe& a, const BodyKeyframe& b) { return a.frame < b.frame; });
  if (frame <= k.front().frame) return k.front().params;
  if (frame >= k.back().frame) return k.back().params;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    if (frame < k[i + 1].frame) {
      const double a = static_cast<double>(frame - k[i].frame) / (k[i + 1].frame - k[i].frame);
      BodyParams p = k[i].params * (1.0 - a);
      p += k[i + 1].params * a;
      return p;
    }
  }
  return k.back().params;
}

RigidTransform interpolate_object(const std::vector<ObjectKeyframe>& keys, int frame) {
  if (keys.empty()) return {};
  std::vector<ObjectKeyframe> k = keys;
  std::stable_sort(k.begin(), k.end(), [](const ObjectKeyframe& a, const ObjectKeyframe& b) {
    return a.frame < b.frame;
  });
  if (frame <= k.front().frame) return k.front().pose;
  if (frame >= k.back().frame) return k.back().pose;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    if (frame < k[i + 1].frame) {
      const double a = static_cast<double>(frame - k[i].frame) / (k[i + 1].frame - k[i].frame);
      RigidTransform t;
      t.rotation = (1.0 - a) * k[i].pose.rotation + a * k[i + 1].pose.rotation;
      t.translation = (1.0 - a) * k[i].pose.translation + a * k[i + 1].pose.translation;
      return t;
    }
  }
  return k.back().pose;
}

Scenario default_scenario(ObjectKind kind, std::uint64_t seed, int frames) {
  if (frames < 4) throw DomainError("default scenario needs at least 4 frames");
  Scenario sc;
  sc.name = "grasp-" + object_kind_name(kind);
  sc.frames = frames;
  sc.object.kind = kind;
  switch (kind) {
    case ObjectKind::cube:
      sc.object.dims = Vec3(0.1, 0.1, 0.1);
      break;
    case ObjectKind::cylinder:
      sc.object.dims = Vec3(0.05, 0.15, 0.0);
      break;
    case ObjectKind::handle_box:
      sc.object.dims = Vec3(0.1, 0.2, 0.15);
      break;
  }
  Rng rng(derive_seed(seed, 0x5ce7a210ULL));
  for (int c = 0; c < kShapeDim; ++c) sc.beta[c] = rng.normal(0.0, 0.5);
  const int start = frames / 4;
  const int end = std::max(start, (3 * frames) / 4 - 1);
  sc.contact_window = std::make_pair(start, end);
  const int nkeys = 4;
  for (int k = 0; k < nkeys; ++k) {
    BodyKeyframe key;
    key.frame = start + (end - start) * k / (nkeys - 1);
    key.params.beta = sc.beta;
    key.params.theta_b[2] = rng.uniform(-0.15, 0.15);
    for (int c = 3; c < kPoseLatentDim; ++c) key.params.theta_b[c] = rng.normal(0.0, 0.5);
    // Free hand: small wrist and curl motion; grasping hand: wrist only.
    for (int c = 0; c < 3; ++c) key.params.theta_h[c] = rng.normal(0.0, 0.1);
    for (int c = 3; c < 6; ++c) key.params.theta_h[c] = rng.normal(0.0, 0.15);
    for (int c = 6; c < 9; ++c) key.params.theta_h[c] = rng.normal(0.0, 0.1);
    const double a = static_cast<double>(k) / (nkeys - 1);
    key.params.gamma = Vec3(-0.25 + 0.5 * a, 0.0, 0.0);
    sc.body_keys.push_back(key);
  }
  return sc;
}

Scenario object_only_scenario(ObjectKind kind, const RigidTransform& start,
                              const RigidTransform& end, int frames) {
  Scenario sc = default_scenario(kind, 0, std::max(frames, 4));
  sc.name = "track-" + object_kind_name(kind);
  sc.frames = frames;
  sc.body_keys.clear();
  sc.contact_window.reset();
  sc.object_keys = {{0, start}, {std::max(0, frames - 1), end}};
  return sc;
}

// ---------------------------------------------------------------------------

std::pair<RigidTransform, std::vector<int>> grasp_in_rest(const BodyModel& model,
                                                          const BodyParams::Shape& beta,
                                                          const ObjectSpec& spec,
                                                          const ObjectModel& object,
                                                          bool right_hand) {
  (void)object;
  BodyParams rest;
  rest.beta = beta;
  const BodyState st = pose_body(model, rest);
  const auto cols = palm_columns(model, right_hand);
  const int wrist = model.joint_index(right_hand ? "r_wrist" : "l_wrist");
  const double dir = right_hand ? -1.0 : 1.0;
  const double s_wrist = dir * st.rest_joints[wrist].x();
  constexpr double kClearance = 0.01;

  auto column_s = [&](const std::vector<int>& ids) {
    double s = 0.0;
    for (int v : ids) s += dir * st.shaped_vertices[v].x();
    return s / ids.size();
  };
  double plane = 0.0, y_mid = 0.0;
  int count = 0;
  for (const auto& c : cols)
    for (int v : c) {
      plane += st.shaped_vertices[v].z();
      y_mid += st.shaped_vertices[v].y();
      ++count;
    }
  plane /= count;
  y_mid /= count;

  // Column for line contacts: the first whose placement keeps the object
  // clear of the forearm.
  auto line_column = [&](double half_extent) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (column_s(cols[c]) >= s_wrist + kClearance + half_extent) return c;
    return cols.size() - 1;
  };

  RigidTransform g;
  std::vector<int> ids;
  switch (spec.kind) {
    case ObjectKind::cube: {
      const double h = spec.dims.x() / 2.0;
      double s_lo = 1e9, s_hi = -1e9;
      for (std::size_t c = 1; c < cols.size(); ++c) {
        ids.insert(ids.end(), cols[c].begin(), cols[c].end());
        s_lo = std::min(s_lo, column_s(cols[c]));
        s_hi = std::max(s_hi, column_s(cols[c]));
      }
      const double s_c = std::max(0.5 * (s_lo + s_hi), s_wrist + kClearance + h);
      g.translation = Vec3(dir * s_c, y_mid, plane - h);
      break;
    }
    case ObjectKind::cylinder: {
      const double r = spec.dims.x();
      const int n = spec.segments;
      const std::size_t c = line_column(r);
      ids = cols[c];
      const double half = kPi / n;
      const Vec3 facet(std::cos(half), std::sin(half), 0.0);
      Mat3 from, to;
      from << facet, Vec3::UnitZ(), facet.cross(Vec3::UnitZ());
      to << Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitZ().cross(Vec3::UnitY());
      g = RigidTransform::from_matrix(to * from.transpose(),
                                      Vec3(dir * column_s(cols[c]), y_mid, plane - r * std::cos(half)));
      break;
    }
    case ObjectKind::handle_box: {
      const std::size_t c = line_column(spec.dims.x() / 2.0);
      ids = cols[c];
      g.translation = Vec3(dir * column_s(cols[c]), y_mid, plane - (spec.dims.z() / 2.0 + 0.03));
      break;
    }
  }
  std::sort(ids.begin(), ids.end());
  return {g, ids};
}

namespace {

// Rigid map carrying rest-space points attached to `joint` to the posed world.
RigidTransform joint_motion(const BodyState& st, int joint, const Vec3& gamma) {
  const Mat3& r = st.world_rotations[joint];
  return RigidTransform::from_matrix(
      r, st.world_translations[joint] + gamma - r * st.rest_joints[joint]);
}

void morph(Silhouette& s, int px) {
  if (px == 0) return;
  const bool dilate = px > 0;
  const int r = std::abs(px);
  const Silhouette src = s;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      bool any = false, all = true;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          const bool on = xx >= 0 && yy >= 0 && xx < s.width && yy < s.height &&
                          src.at(xx, yy) > 0.5f;
          any = any || on;
          all = all && on;
        }
      }
      s.at(x, y) = (dilate ? any : all) ? 1.0f : 0.0f;
    }
  }
}

Silhouette distractor_blob(const PinholeCamera& cam, double radius, Rng& rng) {
  Silhouette s(cam.width, cam.height);
  const double cx = rng.uniform(0.1, 0.9) * cam.width;
  const double cy = rng.uniform(0.1, 0.9) * cam.height;
  const double a = radius * rng.uniform(0.6, 1.4);
  const double b = radius * rng.uniform(0.6, 1.4);
  const double th = rng.uniform(0.0, kPi);
  const double c = std::cos(th), sn = std::sin(th);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (dx * c + dy * sn) / a;
      const double v = (-dx * sn + dy * c) / b;
      if (u * u + v * v <= 1.0) s.at(x, y) = 1.0f;
    }
  }
  return s;
}

}  // namespace

SyntheticSequence synth_sequence(const Scenario& scenario, const NoiseConfig& noise,
                                 const BodyModel& body, const ObjectModel& object) {
  scenario.validate();
  noise.validate();
  object.validate();
  const bool with_body = scenario.has_body();
  if (with_body) body.validate();
  const int T = scenario.frames;

  SyntheticSequence out;
  FittedSequence& gt = out.ground_truth;
  gt.beta_star = with_body ? scenario.beta : BodyParams::Shape::Zero();
  gt.frames.resize(T);
  gt.object.xi.resize(T);
  gt.object.coasting.assign(T, 0);
  gt.schedule.q.assign(T, 0);

  std::vector<BodyState> states(with_body ? T : 0);
  for (int t = 0; t < T && with_body; ++t) {
    BodyParams p = interpolate_body(scenario.body_keys, t);
    p.beta = scenario.beta;
    gt.frames[t] = p;
    states[t] = pose_body(body, p);
  }

  if (scenario.contact_window) {
    const auto [t0, t1] = *scenario.contact_window;
    const auto [grip, body_ids] =
        grasp_in_rest(body, scenario.beta, scenario.object, object, scenario.right_hand_grasp);
    out.annotation.body_vertex_ids = body_ids;
    out.annotation.object_vertex_ids = object.contact_vertex_ids;
    const int wrist = body.joint_index(scenario.right_hand_grasp ? "r_wrist" : "l_wrist");
    for (int t = 0; t < T; ++t) {
      const int tc = std::clamp(t, t0, t1);
      const RigidTransform hand = joint_motion(states[tc], wrist, gt.frames[tc].gamma);
      RigidTransform xi = compose(hand, grip);
      if (t != tc) {
        // Away from the palm along its normal, which points down in the rest pose.
        const Vec3 away = hand.matrix() * Vec3(0.0, 0.0, -1.0);
        xi.translation += std::min(0.08, 0.01 * std::abs(t - tc)) * away;
      }
      gt.object.xi[t] = xi;
      gt.schedule.q[t] = (t >= t0 && t <= t1) ? 1 : 0;
    }
  } else {
    for (int t = 0; t < T; ++t) gt.object.xi[t] = interpolate_object(scenario.object_keys, t);
  }

  // Initial object pose for tracking: ground truth under a fixed-magnitude perturbation.
  {
    Rng rng(derive_seed(noise.seed, 0xa11ce5eedULL));
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    Vec3 shift(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    shift.normalize();
    const Mat3 dr = rodrigues(axis * (noise.init_rotation_deg * kPi / 180.0));
    out.object_init = RigidTransform::from_matrix(dr * gt.object.xi[0].matrix(),
                                                  gt.object.xi[0].translation +
                                                      noise.init_translation_m * shift);
  }

  // Observations.
  SequenceObservation& obs = out.observation;
  obs.cameras = scenario.rig.cameras();
  obs.frames.resize(T);
  out.true_candidate.assign(T, std::vector<int>(obs.cameras.size(), 0));
  const TriMesh ground = ground_disk();
  constexpr int kBody = static_cast<int>(SegmentLabel::body);
  constexpr int kObject = static_cast<int>(SegmentLabel::object);
  constexpr int kGround = static_cast<int>(SegmentLabel::ground);

  for (int t = 0; t < T; ++t) {
    Rng rng(derive_seed(noise.seed, static_cast<std::uint64_t>(t)));
    TriMesh posed;
    std::vector<SceneItem> items;
    if (with_body) {
      posed.vertices = states[t].posed_vertices;
      posed.faces = body.template_mesh.faces;
      items.push_back({&posed, RigidTransform::identity(), kBody});
    }
    items.push_back({&object.mesh, gt.object.xi[t], kObject});
    items.push_back({&ground, RigidTransform::identity(), kGround});

    FrameObservation& frame = obs.frames[t];
    frame.views.resize(obs.cameras.size());
    for (std::size_t v = 0; v < obs.cameras.size(); ++v) {
      const PinholeCamera& cam = obs.cameras[v];
      const SceneRender sr = render_scene(items, cam);
      ViewObservation& view = frame.views[v];

      Silhouette truth(cam.width, cam.height);
      for (std::size_t i = 0; i < sr.labels.size(); ++i)
        truth.values[i] = sr.labels[i] == kObject ? 1.0f : 0.0f;
      morph(truth, noise.mask_px);

      view.depth = sr.depth;
      if (noise.depth_sigma_m > 0.0)
        for (float& d : view.depth.values)
          if (d > 0.0f)
            d = std::max(1e-3f, d + static_cast<float>(rng.normal(0.0, noise.depth_sigma_m)));

      for (int y = 0; y < cam.height; y += scenario.cloud_stride) {
        for (int x = 0; x < cam.width; x += scenario.cloud_stride) {
          const std::size_t i = static_cast<std::size_t>(y) * cam.width + x;
          const float d = view.depth.values[i];
          if (d <= 0.0f) continue;
          view.cloud.points.push_back(cam.backproject(x + 0.5, y + 0.5, d));
          view.cloud.labels.push_back(static_cast<SegmentLabel>(sr.labels[i]));
        }
      }

      if (with_body) {
        view.keypoints.joints.resize(body.joint_count());
        for (int j = 0; j < body.joint_count(); ++j) {
          Keypoint& kp = view.keypoints.joints[j];
          const Vec3 c = cam.to_camera(states[t].posed_joints[j]);
          if (!(c.z() > 0.0)) continue;
          Vec2 uv = cam.project_camera_point(c);
          if (noise.keypoint_sigma_px > 0.0) {
            uv.x() += rng.normal(0.0, noise.keypoint_sigma_px);
            uv.y() += rng.normal(0.0, noise.keypoint_sigma_px);
          }
          const bool dropped = noise.keypoint_dropout > 0.0 && rng.uniform() < noise.keypoint_dropout;
          const bool inside = uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() < cam.width &&
                              uv.y() < cam.height;
          if (dropped || !inside) continue;
          kp.position = uv;
          kp.confidence = 1.0;
        }
      }

      const double radius = std::max(3.0, std::sqrt(static_cast<double>(truth.area()) / kPi));
      view.candidates.push_back(std::move(truth));
      for (int k = 0; k < noise.distractors; ++k)
        view.candidates.push_back(distractor_blob(cam, radius, rng));
      std::vector<int> order(view.candidates.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
      std::vector<Silhouette> shuffled(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled[i] = std::move(view.candidates[order[i]]);
        if (order[i] == 0) out.true_candidate[t][v] = static_cast<int>(i);
      }
      view.candidates = std::move(shuffled);
    }
  }

  for (const ViewObservation& view : obs.frames.front().views)
    for (std::size_t i = 0; i < view.cloud.size(); ++i)
      if (view.cloud.labels[i] == SegmentLabel::ground)
        obs.ground_points.push_back(view.cloud.points[i]);
  return out;
}

}  // namespace interfit
