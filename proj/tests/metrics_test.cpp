#include <gtest/gtest.h>

#include <fstream>
#include <limits>

#include "interfit/energy.hpp"
#include "interfit/io.hpp"
#include "interfit/metrics.hpp"
#include "interfit/synth.hpp"
#include "oracles.hpp"

using namespace interfit;

namespace {

TriMesh unit_triangle() {
  TriMesh m;
  m.vertices = {Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  return m;
}

}  // namespace

TEST(ContactMap, ThresholdIsInclusiveAtFourPointFiveMillimeters) {
  EXPECT_EQ(kContactThreshold, 0.0045);
  const MeshIndex surface(unit_triangle());
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0, 0, 0.0045), Vec3(0, 0, 0.010),
                              Vec3(0, 0, -0.0045)};
  const auto flags = contact_map(pts, surface);
  EXPECT_EQ(flags, (std::vector<std::uint8_t>{1, 1, 0, 1}));
  const auto tight = contact_map(pts, surface, {}, 0.0044999);
  EXPECT_EQ(tight, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(ContactMap, UsesObjectPoseAndIsMonotoneInThreshold) {
  Rng rng(5);
  const TriMesh blob = oracle::random_blob(rng, 8, 12, 0.1, 0.2);
  const MeshIndex surface(blob);
  RigidTransform pose{Vec3(0.3, -0.2, 0.5), Vec3(0.1, 0.2, 1.0)};
  std::vector<Vec3> pts;
  for (int i = 0; i < 400; ++i) pts.push_back(pose.apply(oracle::random_point(rng, 0.13)));
  std::vector<std::uint8_t> prev(pts.size(), 0);
  for (double th : {0.0, 0.002, 0.0045, 0.01, 0.03}) {
    const auto flags = contact_map(pts, surface, pose, th);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = oracle::point_mesh_distance(pose.inverse().apply(pts[i]), blob);
      if (std::abs(d - th) > 1e-12) EXPECT_EQ(flags[i], d <= th) << i;
      EXPECT_GE(flags[i], prev[i]);
    }
    prev = flags;
  }
}

TEST(Heatmap, FractionsOfFrames) {
  std::vector<std::vector<std::uint8_t>> maps;
  for (int t = 0; t < 60; ++t) maps.push_back({1, 0, static_cast<std::uint8_t>(t % 2), static_cast<std::uint8_t>(t < 7)});
  const auto h = heatmap(maps);
  EXPECT_EQ(h, (std::vector<double>{1.0, 0.0, 0.5, 7.0 / 60.0}));
  EXPECT_THROW(heatmap(std::span<const std::vector<std::uint8_t>>{}), DomainError);
  maps.push_back({1});
  EXPECT_THROW(heatmap(maps), DomainError);
}

TEST(Penetration, FrameOrderStatistics) {
  const FramePenetration f = frame_penetration({9.0, 1.0, 2.0}, 4);
  EXPECT_EQ(f.frame, 4);
  EXPECT_EQ(f.penetrating, 3);
  EXPECT_EQ(f.max_mm, 9.0);
  EXPECT_EQ(f.mean_mm, 4.0);
  EXPECT_EQ(f.median_mm, 2.0);
  const FramePenetration none = frame_penetration({});
  EXPECT_EQ(none.max_mm, 0.0);
  EXPECT_EQ(none.median_mm, 0.0);
}

TEST(Penetration, NoContactFramesGivesEmptyReport) {
  const PenetrationReport r = summarize_penetration({}, 12);
  EXPECT_EQ(r.frame_count, 12);
  EXPECT_EQ(r.contact_frame_count(), 0);
  EXPECT_EQ(r.mean_mm, 0.0);
  EXPECT_TRUE(r.cumulative.threshold_mm.empty());
}

TEST(Penetration, CurvesAreMonotoneAndEndAtOne) {
  std::vector<FramePenetration> frames;
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> d;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) d.push_back(rng.uniform(0.0, 35.0));
    frames.push_back(frame_penetration(d, t));
  }
  const PenetrationReport r = summarize_penetration(frames, 80, 0.5);
  EXPECT_EQ(r.contact_frame_count(), 50);
  for (const auto* curve : {&r.cumulative.max, &r.cumulative.mean, &r.cumulative.median}) {
    ASSERT_EQ(curve->size(), r.cumulative.threshold_mm.size());
    for (std::size_t k = 1; k < curve->size(); ++k) EXPECT_GE((*curve)[k], (*curve)[k - 1]);
    EXPECT_EQ(curve->back(), 1.0);
  }
  EXPECT_GE(r.cumulative.threshold_mm.back(), r.max_mm);
  int total = 0;
  for (int c : r.histogram_mean) total += c;
  EXPECT_EQ(total, 50);
  // Cumulative value at a bin edge equals the count of frames at or below it.
  int below5 = 0;
  for (const auto& f : frames) below5 += f.mean_mm <= 5.0;
  EXPECT_EQ(r.cumulative.mean[10], below5 / 50.0);
}

TEST(Penetration, DepthsMatchBruteForce) {
  Rng rng(11);
  const TriMesh blob = oracle::random_blob(rng, 10, 14, 0.08, 0.25);
  const SolidIndex solid(blob);
  const RigidTransform pose{Vec3(-0.2, 0.4, 0.1), Vec3(0.0, 0.3, 0.9)};
  BodyState state;
  for (int i = 0; i < 500; ++i) state.posed_vertices.push_back(pose.apply(oracle::random_point(rng, 0.1)));
  const auto depths = penetration_depths_mm(state, solid, pose);
  std::vector<double> expected;
  for (const Vec3& v : state.posed_vertices) {
    const Vec3 local = pose.inverse().apply(v);
    if (oracle::inside(local, blob)) expected.push_back(oracle::point_mesh_distance(local, blob) * 1000.0);
  }
  ASSERT_EQ(depths.size(), expected.size());
  for (std::size_t i = 0; i < depths.size(); ++i) EXPECT_NEAR(depths[i], expected[i], 1e-9);
}

TEST(VertexToPcl, IdentityAndUniformOffset) {
  PointCloud c;
  std::vector<Vec3> verts;
  for (int i = 0; i < 20; ++i) {
    verts.push_back(Vec3(0.05 * i, 0.0, 0.0));
    c.points.push_back(verts.back());
    c.labels.push_back(SegmentLabel::body);
  }
  EXPECT_EQ(vertex_to_pcl(verts, c, SegmentLabel::body), 0.0);
  for (auto& p : c.points) p += Vec3(0, 0, 0.003);
  EXPECT_NEAR(vertex_to_pcl(verts, c, SegmentLabel::body), 3.0, 1e-12);
  EXPECT_THROW(vertex_to_pcl(verts, c, SegmentLabel::object), DomainError);
}

TEST(VertexToPcl, MatchesExhaustiveScan) {
  Rng rng(21);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) {
    c.points.push_back(oracle::random_point(rng, 0.5));
    c.labels.push_back(rng.below(3) == 0 ? SegmentLabel::object : SegmentLabel::body);
  }
  std::vector<Vec3> verts;
  for (int i = 0; i < 300; ++i) verts.push_back(oracle::random_point(rng, 0.6));
  double sum = 0.0;
  for (const Vec3& v : verts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.points.size(); ++i)
      if (c.labels[i] == SegmentLabel::object) best = std::min(best, (v - c.points[i]).norm());
    sum += best;
  }
  EXPECT_NEAR(vertex_to_pcl(verts, c, SegmentLabel::object), sum / verts.size() * 1000.0, 1e-9);
}

class SequenceMetrics : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    body_ = new BodyModel(make_toy_body({}, 0));
    Scenario sc = default_scenario(ObjectKind::cube, 1, 12);
    sc.rig.count = 2;
    object_ = new ObjectModel(make_object(sc.object));
    syn_ = new SyntheticSequence(synth_sequence(sc, {}, *body_, *object_));
  }
  static void TearDownTestSuite() {
    delete body_;
    delete object_;
    delete syn_;
  }
  static BodyModel* body_;
  static ObjectModel* object_;
  static SyntheticSequence* syn_;
};
BodyModel* SequenceMetrics::body_ = nullptr;
ObjectModel* SequenceMetrics::object_ = nullptr;
SyntheticSequence* SequenceMetrics::syn_ = nullptr;

TEST_F(SequenceMetrics, GroundTruthHasContactWithoutPenetration) {
  const SequenceContact c = evaluate_contact(syn_->ground_truth, *body_, *object_, 3);
  EXPECT_GT(c.penetration.contact_frame_count(), 0);
  EXPECT_LE(c.penetration.mean_mm, 0.01);
  const int T = syn_->ground_truth.frame_count();
  for (const auto* h : {&c.heatmap.body, &c.heatmap.object})
    for (double v : *h) {
      const double k = v * T;
      EXPECT_NEAR(k, std::round(k), 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_EQ(c.heatmap.object.size(), object_->mesh.vertices.size());
  EXPECT_EQ(c.penetration.cumulative.mean.back(), 1.0);
  const SequenceContact serial = evaluate_contact(syn_->ground_truth, *body_, *object_, 1);
  EXPECT_EQ(serial.heatmap.body, c.heatmap.body);
  EXPECT_EQ(serial.penetration.mean_mm, c.penetration.mean_mm);
  EXPECT_LE(contact_gap_mm(syn_->ground_truth, *body_, *object_, syn_->annotation.body_vertex_ids),
            kContactThreshold * 1000.0);
}

TEST_F(SequenceMetrics, AccelerationTraces) {
  FittedSequence f = syn_->ground_truth;
  const BodyParams p0 = f.frames[0];
  const double a = 0.004;
  for (int t = 0; t < f.frame_count(); ++t) {
    f.frames[t] = p0;
    f.frames[t].gamma = p0.gamma + Vec3(0.5 * a * t * t, 0.01 * t, 0.0);
  }
  for (double v : accel_trace(f, *body_, 17)) EXPECT_NEAR(v, a, 1e-12);
  for (int t = 0; t < f.frame_count(); ++t) f.frames[t].gamma = p0.gamma + Vec3(0.02 * t, 0, 0);
  const auto trace = accel_trace(f, *body_, 3);
  EXPECT_EQ(trace.size(), static_cast<std::size_t>(f.frame_count() - 2));
  for (double v : trace) EXPECT_NEAR(v, 0.0, 1e-13);
  EXPECT_NEAR(mean_acceleration(f, *body_, 7), 0.0, 1e-13);
  f.frames.resize(2);
  EXPECT_THROW(accel_trace(f, *body_, 3), DomainError);
}

TEST_F(SequenceMetrics, PoseErrorDefinitions) {
  const FittedSequence& gt = syn_->ground_truth;
  PoseError same = pose_error(gt, gt, body_);
  EXPECT_EQ(same.mean_joint_mm, 0.0);
  for (double r : same.rotation_deg) EXPECT_EQ(r, 0.0);

  FittedSequence f = gt;
  const Vec3 axis = Vec3(1, 2, -0.5).normalized();
  const RigidTransform tilt{axis * (5.0 * M_PI / 180.0), Vec3::Zero()};
  for (auto& xi : f.object.xi) {
    xi = compose(xi, tilt);
    xi.translation += Vec3(0, 0.003, 0);
  }
  for (auto& p : f.frames) p.gamma += Vec3(0.002, 0, 0);
  const PoseError e = pose_error(f, gt, body_);
  for (double r : e.rotation_deg) EXPECT_NEAR(r, 5.0, 1e-6);
  for (double t : e.translation_mm) EXPECT_NEAR(t, 3.0, 1e-9);
  EXPECT_NEAR(e.mean_joint_mm, 2.0, 1e-9);

  f.frames.pop_back();
  EXPECT_THROW(pose_error(f, gt, body_), DomainError);
}

TEST_F(SequenceMetrics, ReportsAreWritten) {
  const SequenceContact c = evaluate_contact(syn_->ground_truth, *body_, *object_);
  const fs::path dir = fs::temp_directory_path() / "interfit_metrics_report";
  fs::remove_all(dir);
  write_reports(dir, c, {{"note", 1.5}});
  std::ifstream pen(dir / "penetration.csv");
  std::string header;
  std::getline(pen, header);
  EXPECT_EQ(header.rfind("threshold_mm,fraction", 0), 0u);
  std::ifstream heat(dir / "heatmap_body.csv");
  std::getline(heat, header);
  EXPECT_EQ(header, "vertex_id,likelihood");
  int rows = 0;
  for (std::string line; std::getline(heat, line);) ++rows;
  EXPECT_EQ(rows, static_cast<int>(body_->template_mesh.vertices.size()));
  EXPECT_TRUE(fs::exists(dir / "heatmap_object.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}
