#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "interfit/io.hpp"

using namespace interfit;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("interfit_io_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Obj, RoundTripIsExact) {
  const ObjectModel cyl = make_object({ObjectKind::cylinder, Vec3(0.05, 0.15, 0), 12});
  const fs::path p = scratch("obj") / "m.obj";
  write_obj(p, cyl.mesh);
  const TriMesh back = read_obj(p);
  ASSERT_EQ(back.vertices.size(), cyl.mesh.vertices.size());
  for (std::size_t i = 0; i < back.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], cyl.mesh.vertices[i]);
  EXPECT_EQ(back.faces, cyl.mesh.faces);
}

TEST(Obj, FanTriangulatesPolygonsAndIgnoresOtherRecords) {
  const fs::path p = scratch("quad") / "q.obj";
  std::ofstream(p) << "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
  const TriMesh m = read_obj(p);
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
}

TEST(Obj, MissingFileNamesPath) {
  try {
    read_obj("/nonexistent/dir/x.obj");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.obj"), std::string::npos);
  }
}

TEST(Xyz, RoundTripKeepsLabels) {
  PointCloud c;
  c.points = {Vec3(0.1, -0.2, 1.0 / 3.0), Vec3(1e-9, 2.5, -7.0)};
  c.labels = {SegmentLabel::body, SegmentLabel::ground};
  const fs::path p = scratch("xyz") / "c.xyz";
  write_xyz(p, c);
  EXPECT_EQ(bytes(p).substr(bytes(p).find('\n') + 1), "1.0000000000000001e-09 2.5 -7 ground\n");
  const PointCloud back = read_xyz(p);
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.labels, c.labels);
}

TEST(Pgm, MultipleImagesInOneFile) {
  Silhouette a(3, 2), b(2, 2);
  a.at(0, 0) = a.at(2, 1) = 1.0f;
  b.at(1, 0) = 1.0f;
  const std::vector<Silhouette> masks{a, b};
  const fs::path p = scratch("pgm") / "m.pgm";
  write_pgm(p, masks);
  const std::string raw = bytes(p);
  EXPECT_EQ(raw.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(static_cast<unsigned char>(raw[11]), 255);
  EXPECT_EQ(static_cast<unsigned char>(raw[12]), 0);
  const auto back = read_pgm(p);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, a.values);
  EXPECT_EQ(back[1].values, b.values);
  write_pgm(p, {});
  EXPECT_TRUE(read_pgm(p).empty());
}

TEST(Dpt, HeaderAndLittleEndianFloats) {
  DepthImage d(2, 1);
  d.values = {1.0f, 0.0f};
  const fs::path p = scratch("dpt") / "d.dpt";
  write_dpt(p, d);
  const std::string raw = bytes(p);
  ASSERT_EQ(raw.size(), 16u);
  EXPECT_EQ(raw.substr(0, 8), std::string("\x02\0\0\0\x01\0\0\0", 8));
  EXPECT_EQ(raw.substr(8, 4), std::string("\0\0\x80\x3f", 4));
  const DepthImage back = read_dpt(p);
  EXPECT_EQ(back.width, 2);
  EXPECT_EQ(back.values, d.values);
  std::ofstream(p, std::ios::binary | std::ios::app) << "x";
  EXPECT_THROW(read_dpt(p), IoError);
}

TEST(BodyModelFile, RoundTripPosesIdentically) {
  const BodyModel m = make_toy_body({}, 3);
  const fs::path p = scratch("ifbm") / "body.ifbm";
  write_body_model(p, m);
  EXPECT_EQ(bytes(p).substr(0, 4), "IFBM");
  const BodyModel back = read_body_model(p);
  EXPECT_EQ(back.joint_names, m.joint_names);
  EXPECT_EQ(back.seed, 3u);
  BodyParams params;
  params.theta_b[4] = 0.7;
  params.theta_h[1] = -0.3;
  params.beta[2] = 1.1;
  const BodyState a = pose_body(m, params), b = pose_body(back, params);
  EXPECT_EQ(a.posed_vertices, b.posed_vertices);
  EXPECT_EQ(a.sphere_centers, b.sphere_centers);
  EXPECT_EQ(back.collision_pairs(), m.collision_pairs());
}

TEST(BodyModelFile, RejectsWrongMagic) {
  const fs::path p = scratch("ifbm_bad") / "x.ifbm";
  std::ofstream(p) << "NOPE";
  EXPECT_THROW(read_body_model(p), IoError);
}

TEST(FittedJson, RoundTrip) {
  FittedSequence f;
  f.beta_star[0] = 0.25;
  for (int t = 0; t < 3; ++t) {
    BodyParams p;
    p.beta = f.beta_star;
    p.theta_b[t] = 0.1 * t + 1.0 / 7.0;
    p.gamma = Vec3(t, -t, 0.5);
    f.frames.push_back(p);
    RigidTransform xi;
    xi.rotation = Vec3(0.01 * t, 0, 0.2);
    f.object.xi.push_back(xi);
    f.object.coasting.push_back(t == 1);
  }
  f.schedule.q = {0, 1, 1};
  f.frame_energy = {1.5, 2.5, 3.5};
  f.diagnostics["e_total"] = 42.0;
  const fs::path p = scratch("fitted") / "f.json";
  write_fitted(p, f);
  const FittedSequence back = read_fitted(p);
  EXPECT_EQ(back.beta_star, f.beta_star);
  ASSERT_EQ(back.frame_count(), 3);
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(back.frames[t].pack(), f.frames[t].pack());
    EXPECT_EQ(back.object.xi[t].as_vector(), f.object.xi[t].as_vector());
  }
  EXPECT_EQ(back.object.coasting, f.object.coasting);
  EXPECT_EQ(back.schedule.q, f.schedule.q);
  EXPECT_EQ(back.frame_energy, f.frame_energy);
  EXPECT_EQ(back.diagnostics.at("e_total"), 42.0);
  write_fitted(p, back);
  const std::string once = bytes(p);
  write_fitted(p, read_fitted(p));
  EXPECT_EQ(bytes(p), once);
}

TEST(SequenceDir, ObservationRoundTripsBitExactly) {
  Scenario sc = default_scenario(ObjectKind::handle_box, 2, 4);
  sc.rig.count = 2;
  NoiseConfig noise;
  noise.distractors = 2;
  noise.depth_sigma_m = 0.002;
  noise.keypoint_sigma_px = 1.0;
  noise.seed = 9;
  const BodyModel body = make_toy_body({}, 0);
  const ObjectModel obj = make_object(sc.object);
  const SyntheticSequence syn = synth_sequence(sc, noise, body, obj);
  const fs::path dir = scratch("seq");
  write_sequence(dir, syn, sc, noise, body, obj);
  EXPECT_TRUE(fs::exists(dir / "frame_0003" / "view_1.kp.json"));
  EXPECT_TRUE(fs::exists(dir / "scenario.json"));

  const SequenceObservation back = read_observation(dir);
  const SequenceObservation& obs = syn.observation;
  ASSERT_EQ(back.frame_count(), obs.frame_count());
  ASSERT_EQ(back.view_count(), obs.view_count());
  EXPECT_EQ(back.ground_points, obs.ground_points);
  for (int v = 0; v < obs.view_count(); ++v)
    EXPECT_EQ(back.cameras[v].extrinsic.as_vector(), obs.cameras[v].extrinsic.as_vector());
  for (int t = 0; t < obs.frame_count(); ++t)
    for (int v = 0; v < obs.view_count(); ++v) {
      const ViewObservation &a = obs.frames[t].views[v], &b = back.frames[t].views[v];
      ASSERT_EQ(a.candidates.size(), b.candidates.size());
      for (std::size_t c = 0; c < a.candidates.size(); ++c)
        EXPECT_EQ(a.candidates[c].values, b.candidates[c].values);
      EXPECT_EQ(a.depth.values, b.depth.values);
      EXPECT_EQ(a.cloud.points, b.cloud.points);
      for (std::size_t j = 0; j < a.keypoints.joints.size(); ++j) {
        EXPECT_EQ(a.keypoints.joints[j].position, b.keypoints.joints[j].position);
        EXPECT_EQ(a.keypoints.joints[j].confidence, b.keypoints.joints[j].confidence);
      }
    }

  ContactAnnotation ann;
  ContactSchedule q;
  read_contacts(dir / "contacts.json", ann, q);
  EXPECT_EQ(ann.body_vertex_ids, syn.annotation.body_vertex_ids);
  EXPECT_EQ(q.q, syn.ground_truth.schedule.q);
  const ObjectModel obj_back = read_object_model(dir);
  EXPECT_EQ(obj_back.contact_vertex_ids, obj.contact_vertex_ids);
  EXPECT_TRUE(obj_back.mesh.watertight);
  EXPECT_EQ(read_pose(dir / "object_init.json").as_vector(), syn.object_init.as_vector());
}
