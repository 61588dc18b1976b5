#include <gtest/gtest.h>

#include <cmath>

#include "interfit/body_model.hpp"
#include "interfit/random.hpp"
#include "interfit/synth.hpp"

using namespace interfit;

namespace {

const BodyModel& toy() {
  static const BodyModel m = make_toy_body({}, 0);
  return m;
}

BodyParams random_params(Rng& rng, double scale = 1.0) {
  BodyParams p;
  for (int i = 0; i < kShapeDim; ++i) p.beta[i] = rng.normal(0.0, scale);
  for (int i = 0; i < kPoseLatentDim; ++i) p.theta_b[i] = rng.normal(0.0, 0.5 * scale);
  for (int i = 0; i < kHandDim; ++i) p.theta_h[i] = rng.normal(0.0, 0.3 * scale);
  for (int i = 0; i < 3; ++i) p.gamma[i] = rng.normal(0.0, 0.2 * scale);
  return p;
}

}  // namespace

TEST(ToyBody, StructureAndCounts) {
  const BodyModel& m = toy();
  EXPECT_EQ(m.joint_count(), 24);
  EXPECT_NO_THROW(m.validate());
  EXPECT_GE(m.vertex_count(), 600);
  EXPECT_LE(m.vertex_count(), 1200);
  EXPECT_EQ(m.vertex_count(), 866);
  EXPECT_EQ(static_cast<int>(m.template_mesh.faces.size()), 1640);
  EXPECT_TRUE(is_closed_manifold(m.template_mesh));
  EXPECT_FALSE(m.contact_region_ids.empty());
  EXPECT_EQ(m.marker_ids.size(), 40u);
  for (int v = 0; v < m.vertex_count(); ++v) {
    EXPECT_NEAR(m.skinning_weights.row(v).sum(), 1.0, 1e-9);
    EXPECT_GE(m.skinning_weights.row(v).minCoeff(), 0.0);
  }
}

TEST(ToyBody, ContactRegionsSitOnPalmsSolesAndBack) {
  const BodyModel& m = toy();
  int palms = 0, soles = 0, back = 0;
  for (int v : m.contact_region_ids) {
    const Vec3& p = m.template_mesh.vertices[v];
    if (std::abs(p.x()) >= 0.70 && p.z() > 1.4) {
      ++palms;
    } else if (p.z() < 0.01) {
      ++soles;
    } else if (p.y() < 0.0) {
      ++back;
    } else {
      ADD_FAILURE() << "unexpected contact vertex at " << p.transpose();
    }
  }
  EXPECT_GT(palms, 0);
  EXPECT_GT(soles, 0);
  EXPECT_GT(back, 0);
}

TEST(ToyBody, DeterministicFromSeed) {
  const BodyModel a = make_toy_body({}, 7);
  const BodyModel b = make_toy_body({}, 7);
  const BodyModel c = make_toy_body({}, 8);
  EXPECT_EQ(a.pose_decoder, b.pose_decoder);
  EXPECT_EQ(a.shape_vertex_basis, b.shape_vertex_basis);
  EXPECT_NE(a.pose_decoder, c.pose_decoder);
}

TEST(DecodePose, ZeroAndLinearity) {
  const BodyModel& m = toy();
  for (const Vec3& r : decode_pose(m, BodyParams::PoseLatent::Zero())) EXPECT_EQ(r.norm(), 0.0);
  Rng rng(21);
  BodyParams::PoseLatent z;
  for (int i = 0; i < kPoseLatentDim; ++i) z[i] = rng.normal();
  const auto a = decode_pose(m, z);
  const auto b = decode_pose(m, 2.0 * z);
  for (int j = 0; j < m.joint_count(); ++j) EXPECT_LE((b[j] - 2.0 * a[j]).norm(), 1e-14);
  for (int j : m.hand_joints) EXPECT_EQ(a[j].norm(), 0.0);
  for (int j : m.face_joints) EXPECT_EQ(a[j].norm(), 0.0);
}

TEST(DecodePose, ScaledOrthonormalStructure) {
  const BodyModel& m = toy();
  const Eigen::MatrixXd rest = m.pose_decoder.bottomRightCorner(m.pose_decoder.rows() - 3, 29);
  const Eigen::MatrixXd gram = rest.transpose() * rest;
  EXPECT_LE((gram - 0.09 * Eigen::MatrixXd::Identity(29, 29)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DecodePose, PinnedGoldValues) {
  const BodyModel& m = toy();
  BodyParams::PoseLatent e1 = BodyParams::PoseLatent::Zero();
  e1[0] = 1.0;
  const auto r1 = decode_pose(m, e1);
  EXPECT_EQ(r1[0], Vec3(1, 0, 0));
  for (int j = 1; j < m.joint_count(); ++j) EXPECT_EQ(r1[j].norm(), 0.0);

  BodyParams::PoseLatent e4 = BodyParams::PoseLatent::Zero();
  e4[3] = 1.0;
  const auto r4 = decode_pose(m, e4);
  const Vec3 gold_spine(-0.040998818470876539, 0.045571558051330292, -0.059127529306361858);
  const Vec3 gold_l_elbow(-0.029692819822710874, 0.0099143161709062313, 0.0092404007455386683);
  EXPECT_LE((r4[1] - gold_spine).norm(), 1e-12);
  EXPECT_LE((r4[8] - gold_l_elbow).norm(), 1e-12);
}

TEST(ShapedJoints, TemplateLinearityAndGold) {
  const BodyModel& m = toy();
  const auto j0 = shaped_joints(m, BodyParams::Shape::Zero());
  for (int j = 0; j < m.joint_count(); ++j) EXPECT_EQ(j0[j], m.rest_joints_base[j]);
  Rng rng(22);
  BodyParams::Shape b1, b2;
  for (int i = 0; i < kShapeDim; ++i) {
    b1[i] = rng.normal();
    b2[i] = rng.normal();
  }
  const auto j1 = shaped_joints(m, b1), j2 = shaped_joints(m, b2), j12 = shaped_joints(m, b1 + b2);
  for (int j = 0; j < m.joint_count(); ++j)
    EXPECT_LE(((j12[j] - j0[j]) - (j1[j] - j0[j]) - (j2[j] - j0[j])).norm(), 1e-14);

  BodyParams::Shape e1 = BodyParams::Shape::Zero();
  e1[0] = 1.0;
  const auto je = shaped_joints(m, e1);
  EXPECT_LE((je[0] - Vec3(0, 0, 0.95 * 1.03)).norm(), 1e-12);
  EXPECT_LE((je[20] - Vec3(0.70 * 1.03, 0, 1.45 * 1.03)).norm(), 1e-12);

  BodyParams::Shape e5 = BodyParams::Shape::Zero();
  e5[4] = 1.0;
  const auto j5 = shaped_joints(m, e5);
  const Vec3 gold_head(-0.014585899955291227, -0.01626371090615145, 1.5802616829150147);
  EXPECT_LE((j5[4] - gold_head).norm(), 1e-12);
}

TEST(PoseBody, RestPoseReturnsTemplate) {
  const BodyModel& m = toy();
  const BodyState s = pose_body(m, BodyParams{});
  for (int v = 0; v < m.vertex_count(); ++v)
    EXPECT_LE((s.posed_vertices[v] - m.template_mesh.vertices[v]).norm(), 1e-15);
  for (int j = 0; j < m.joint_count(); ++j)
    EXPECT_LE((s.posed_joints[j] - m.rest_joints_base[j]).norm(), 1e-15);
}

TEST(PoseBody, RootRotationIsRigid) {
  const BodyModel& m = toy();
  BodyParams p;
  p.theta_b.head<3>() = Vec3(0.2, -0.4, 0.7);
  const BodyState s = pose_body(m, p);
  const Mat3 r = rodrigues(p.theta_b.head<3>());
  const Vec3 root = m.rest_joints_base[0];
  for (int v = 0; v < m.vertex_count(); ++v)
    EXPECT_LE((s.posed_vertices[v] - (r * (m.template_mesh.vertices[v] - root) + root)).norm(),
              1e-12);
}

TEST(PoseBody, EquivariantUnderGlobalMotion) {
  const BodyModel& m = toy();
  Rng rng(23);
  for (int k = 0; k < 5; ++k) {
    BodyParams p = random_params(rng);
    p.theta_b.head<3>().setZero();
    p.gamma.setZero();
    const BodyState base = pose_body(m, p);
    BodyParams q = p;
    q.theta_b.head<3>() = Vec3(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5));
    q.gamma = Vec3(rng.normal(), rng.normal(), rng.normal());
    const BodyState moved = pose_body(m, q);
    const Mat3 r = rodrigues(q.theta_b.head<3>());
    const Vec3 root = base.rest_joints[0];
    for (int v = 0; v < m.vertex_count(); v += 7)
      EXPECT_LE((moved.posed_vertices[v] - (r * (base.posed_vertices[v] - root) + root + q.gamma))
                    .norm(),
                1e-12);
  }
}

TEST(PoseBody, SingleJointRowAppliesThatTransform) {
  const BodyModel& m = toy();
  Rng rng(24);
  const BodyParams p = random_params(rng);
  const BodyState s = pose_body(m, p);
  int checked = 0;
  for (int v = 0; v < m.vertex_count(); ++v) {
    for (int j = 0; j < m.joint_count(); ++j) {
      if (m.skinning_weights(v, j) != 1.0) continue;
      const Vec3 expect = s.world_rotations[j] * (s.shaped_vertices[v] - s.rest_joints[j]) +
                          s.world_translations[j] + p.gamma;
      EXPECT_LE((s.posed_vertices[v] - expect).norm(), 1e-12);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(PoseBody, SkinnedVertexInsideConvexHullOfBoneImages) {
  const BodyModel& m = toy();
  Rng rng(25);
  for (int k = 0; k < 5; ++k) {
    const BodyParams p = random_params(rng);
    const BodyState s = pose_body(m, p);
    for (int v = 0; v < m.vertex_count(); ++v) {
      const auto& inf = m.influences[v];
      if (inf.size() == 1) continue;
      // With two or three influences the combination weights are recovered
      // by least squares and must be a convex combination.
      Eigen::MatrixXd a(4, inf.size());
      Eigen::Vector4d b;
      for (std::size_t i = 0; i < inf.size(); ++i) {
        const int j = inf[i].joint;
        const Vec3 img = s.world_rotations[j] * (s.shaped_vertices[v] - s.rest_joints[j]) +
                         s.world_translations[j] + p.gamma;
        a.block(0, i, 3, 1) = img;
        a(3, i) = 1.0;
      }
      b << s.posed_vertices[v], 1.0;
      const Eigen::VectorXd w = a.colPivHouseholderQr().solve(b);
      EXPECT_LE((a * w - b).norm(), 1e-9);
      EXPECT_GE(w.minCoeff(), -1e-6);
    }
  }
}

TEST(PoseBodyVjp, MatchesCentralFiniteDifferences) {
  const BodyModel& m = toy();
  Rng rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const BodyParams p = random_params(rng);
    const BodyState s = pose_body(m, p);
    BodyCotangent cot = BodyCotangent::zeros(m);
    for (Vec3& c : cot.vertices) c = Vec3(rng.normal(), rng.normal(), rng.normal());
    for (Vec3& c : cot.joints) c = Vec3(rng.normal(), rng.normal(), rng.normal());
    for (Vec3& c : cot.spheres) c = Vec3(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd g = pose_body_vjp(m, p, s, cot).pack();
    auto objective = [&](const Eigen::VectorXd& x) {
      const BodyState st = pose_body(m, BodyParams::unpack(x));
      double acc = 0.0;
      for (int v = 0; v < m.vertex_count(); ++v) acc += cot.vertices[v].dot(st.posed_vertices[v]);
      for (int j = 0; j < m.joint_count(); ++j) acc += cot.joints[j].dot(st.posed_joints[j]);
      for (std::size_t k = 0; k < st.sphere_centers.size(); ++k)
        acc += cot.spheres[k].dot(st.sphere_centers[k]);
      return acc;
    };
    const Eigen::VectorXd x = p.pack();
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += 1e-5;
      xm[i] -= 1e-5;
      const double fd = (objective(xp) - objective(xm)) / 2e-5;
      EXPECT_LE(std::abs(fd - g[i]) / scale, 1e-4) << "parameter " << i;
    }
  }
}

TEST(ContactSubset, OrderAndCardinality) {
  const BodyModel& m = toy();
  Rng rng(27);
  const BodyState s = pose_body(m, random_params(rng));
  const auto pts = contact_subset(s, m);
  ASSERT_EQ(pts.size(), m.contact_region_ids.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    EXPECT_EQ(pts[i], s.posed_vertices[m.contact_region_ids[i]]);
  BodyModel single = m;
  single.contact_region_ids = {0};
  const auto one = contact_subset(s, single);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], s.posed_vertices[0]);
  single.contact_region_ids.clear();
  EXPECT_TRUE(contact_subset(s, single).empty());
}

TEST(CollisionPairs, SkipTreeNeighbours) {
  const BodyModel& m = toy();
  const auto pairs = m.collision_pairs();
  EXPECT_FALSE(pairs.empty());
  for (const auto& [a, b] : pairs) {
    const int ja = m.proxy_spheres[a].joint, jb = m.proxy_spheres[b].joint;
    EXPECT_NE(m.parents[ja], jb);
    EXPECT_NE(m.parents[jb], ja);
    EXPECT_NE(ja, jb);
  }
}

TEST(BodyParamsPacking, RoundTrip) {
  Rng rng(28);
  const BodyParams p = random_params(rng);
  const BodyParams q = BodyParams::unpack(p.pack());
  EXPECT_EQ(p.pack(), q.pack());
  EXPECT_THROW(BodyParams::unpack(Eigen::VectorXd::Zero(3)), DomainError);
}
