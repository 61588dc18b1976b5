// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion numbers as arguments to
// run a subset, e.g. `acceptance 1 6`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "interfit/io.hpp"
#include "interfit/metrics.hpp"
#include "interfit/optimizer.hpp"
#include "interfit/pipeline.hpp"
#include "interfit/synth.hpp"
#include "oracles.hpp"

using namespace interfit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: object tracking under depth noise and distractor masks.

struct TrackingRun {
  std::string object;
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
  double selection = 0.0;
  double seconds = 0.0;
};

std::vector<TrackingRun>& tracking_runs() {
  static std::vector<TrackingRun> runs = [] {
    std::vector<TrackingRun> out;
    const BodyModel body = make_toy_body({}, 0);
    const RigidTransform start{Vec3::Zero(), Vec3(0.0, 0.0, 1.0)};
    const RigidTransform end{Vec3(0.4, 0.6, 0.2), Vec3(0.3, 0.1, 1.1)};
    for (ObjectKind kind : {ObjectKind::cube, ObjectKind::cylinder, ObjectKind::handle_box}) {
      Scenario sc = object_only_scenario(kind, start, end, 60);
      sc.rig.count = 4;
      sc.rig.radius = 1.0;
      sc.rig.height = 1.5;
      sc.rig.focal = 160.0;
      sc.rig.target = Vec3(0.15, 0.05, 1.05);
      NoiseConfig noise;
      noise.depth_sigma_m = 0.002;
      noise.distractors = 3;
      noise.seed = 1;
      const ObjectModel object = make_object(sc.object);
      const SyntheticSequence syn = synth_sequence(sc, noise, body, object);

      const auto t0 = Clock::now();
      const TrackingResult r = track_object(syn.observation, object, syn.object_init);
      TrackingRun run;
      run.seconds = seconds_since(t0);
      run.object = object_kind_name(kind);
      const PoseError e = pose_error(FittedSequence{.object = r.trajectory}, syn.ground_truth);
      run.rotation_deg = median(e.rotation_deg);
      run.translation_mm = median(e.translation_mm);
      int hit = 0, total = 0;
      for (int t = 0; t < syn.observation.frame_count(); ++t)
        for (int v = 0; v < syn.observation.view_count(); ++v, ++total)
          hit += r.selected[t][v] == syn.true_candidate[t][v];
      run.selection = static_cast<double>(hit) / total;
      out.push_back(run);
    }
    return out;
  }();
  return runs;
}

Outcome criterion_tracking() {
  Outcome o{true, ""};
  for (const TrackingRun& r : tracking_runs()) {
    o.pass = o.pass && r.rotation_deg <= 2.0 && r.translation_mm <= 5.0 && r.seconds <= 300.0;
    o.detail += fmt("%s rot %.3f deg, trans %.3f mm, %.1f s; ", r.object.c_str(), r.rotation_deg,
                    r.translation_mm, r.seconds);
  }
  o.detail += "limits 2 deg / 5 mm / 300 s";
  return o;
}

Outcome criterion_selection() {
  Outcome o{true, ""};
  for (const TrackingRun& r : tracking_runs()) {
    o.pass = o.pass && r.selection >= 0.95;
    o.detail += fmt("%s %.1f%%; ", r.object.c_str(), 100.0 * r.selection);
  }
  o.detail += "true mask picked in >= 95% of frame-views";
  return o;
}

// ---------------------------------------------------------------------------
// Criterion 3: per-frame body fitting accuracy.

Outcome criterion_body_fit() {
  const BodyModel body = make_toy_body({}, 0);
  const Scenario sc = default_scenario(ObjectKind::cube, 1, 60);
  const ObjectModel object = make_object(sc.object);
  auto run = [&](const NoiseConfig& noise) {
    const SyntheticSequence syn = synth_sequence(sc, noise, body, object);
    FittedSequence f;
    f.frames = fit_body_frames(syn.observation, body, {});
    f.object = syn.ground_truth.object;
    std::vector<BodyParams::Shape> betas;
    for (const BodyParams& p : f.frames) betas.push_back(p.beta);
    f.beta_star = mean_shape(betas);
    // Joint error uses each frame's own fitted shape.
    double sum = 0.0;
    for (int t = 0; t < f.frame_count(); ++t) {
      const auto a = pose_body(body, f.frames[t]).posed_joints;
      const auto b = pose_body(body, syn.ground_truth.frame_params(t)).posed_joints;
      for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - b[j]).norm();
    }
    return sum / (f.frame_count() * body.joint_names.size()) * 1000.0;
  };
  NoiseConfig clean;
  clean.seed = 1;
  NoiseConfig noisy = clean;
  noisy.keypoint_sigma_px = 2.0;
  noisy.keypoint_dropout = 0.1;
  const double e_clean = run(clean);
  const double e_noisy = run(noisy);
  return {e_clean <= 5.0 && e_noisy <= 15.0,
          fmt("mean joint error noiseless %.2f mm (<= 5), 2 px + 10%% dropout %.2f mm (<= 15)",
              e_clean, e_noisy)};
}

// ---------------------------------------------------------------------------
// Joint refinement ablations on a noisy 60-frame sequence (contact, smoothing
// and the report checks share these runs).

struct RefineRuns {
  BodyModel body;
  ObjectModel object;
  SyntheticSequence syn;
  FittedSequence full, no_contact, no_smoothing;
  SequenceContact contact_full;
};

const RefineRuns& refine_runs() {
  static const RefineRuns runs = [] {
    RefineRuns r;
    r.body = make_toy_body({}, 0);
    const Scenario sc = default_scenario(ObjectKind::cube, 1, 60);
    r.object = make_object(sc.object);
    NoiseConfig noise;
    noise.keypoint_sigma_px = 2.0;
    noise.keypoint_dropout = 0.1;
    noise.depth_sigma_m = 0.002;
    noise.distractors = 3;
    noise.seed = 1;
    r.syn = synth_sequence(sc, noise, r.body, r.object);

    const TrackingResult track = track_object(r.syn.observation, r.object, r.syn.object_init);
    FittedSequence init;
    init.frames = fit_body_frames(r.syn.observation, r.body, {}, &r.object, &track.trajectory);
    std::vector<BodyParams::Shape> betas;
    for (const BodyParams& p : init.frames) betas.push_back(p.beta);
    init.beta_star = mean_shape(betas);
    for (BodyParams& p : init.frames) p.beta = init.beta_star;
    init.object = track.trajectory;
    init.schedule = r.syn.ground_truth.schedule;

    auto refine = [&](const EnergyWeights& w, bool contact) {
      ContactAnnotation annotation = r.syn.annotation;
      if (!contact) annotation.body_vertex_ids.clear();
      const SceneData scene = make_scene(r.syn.observation, r.body, r.object, annotation,
                                         init.schedule, track.targets, w, 2);
      RefineOptions opts;
      opts.weights = w;
      return joint_refine(init, scene, opts);
    };
    const EnergyWeights defaults;
    r.full = refine(defaults, true);
    r.no_contact = refine(defaults, false);
    EnergyWeights unsmoothed = defaults;
    unsmoothed.lambda_S = 0.0;
    unsmoothed.lambda_A = 0.0;
    r.no_smoothing = refine(unsmoothed, true);
    r.contact_full = evaluate_contact(r.full, r.body, r.object, 2);
    return r;
  }();
  return runs;
}

Outcome criterion_contact() {
  const RefineRuns& r = refine_runs();
  const auto& ids = r.syn.annotation.body_vertex_ids;
  const double gap_on = contact_gap_mm(r.full, r.body, r.object, ids);
  const double gap_off = contact_gap_mm(r.no_contact, r.body, r.object, ids);
  const double reduction = 1.0 - gap_on / gap_off;
  const double pen = r.contact_full.penetration.mean_mm;
  return {reduction >= 0.5 && pen <= 10.0,
          fmt("contact gap %.2f mm with contact vs %.2f mm without (%.0f%% reduction, >= 50%%); "
              "mean penetration %.2f mm over %d contact frames (<= 10)",
              gap_on, gap_off, 100.0 * reduction, pen,
              r.contact_full.penetration.contact_frame_count())};
}

Outcome criterion_smoothing() {
  const RefineRuns& r = refine_runs();
  const double on = mean_acceleration(r.full, r.body, 7, 2) * 1000.0;
  const double off = mean_acceleration(r.no_smoothing, r.body, 7, 2) * 1000.0;
  const double reduction = 1.0 - on / off;
  return {reduction >= 0.4,
          fmt("mean vertex acceleration %.3f mm/frame^2 smoothed vs %.3f unsmoothed "
              "(%.0f%% reduction, >= 40%%)",
              on, off, 100.0 * reduction)};
}

// ---------------------------------------------------------------------------
// Criterion 6: analytic gradients against central differences.

Outcome criterion_gradients() {
  const BodyModel body = make_toy_body({}, 0);
  double worst = 0.0;
  std::string worst_term;
  int configurations = 0;
  for (ObjectKind kind : {ObjectKind::cube, ObjectKind::cylinder, ObjectKind::handle_box}) {
    const ObjectModel object = make_object(default_scenario(kind, 0).object);
    for (const GradcheckEntry& e : gradcheck(body, object, 7, 20)) {
      configurations = std::max(configurations, e.configurations);
      if (e.max_relative_error >= worst) {
        worst = e.max_relative_error;
        worst_term = e.term;
      }
    }
  }
  PipelineConfig cfg;
  std::ostringstream log;
  const int status = run_gradcheck(cfg, log);
  return {worst <= 1e-4 && status == 0,
          fmt("max relative error %.2e (%s) over %d configurations x 3 objects (<= 1e-4); "
              "gradcheck exit %d",
              worst, worst_term.c_str(), configurations, status)};
}

// ---------------------------------------------------------------------------
// Criterion 7: accelerated queries against exhaustive scans.

Outcome criterion_oracles() {
  Rng rng(77);
  const TriMesh mesh = oracle::random_blob(rng, 30, 34, 0.2, 0.15);
  std::vector<Vec3> points;
  for (int i = 0; i < 5000; ++i) points.push_back(oracle::random_point(rng, 0.3));

  double err_ptm = 0.0;
  double chamfer_ref = 0.0;
  std::vector<int> subset;
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); f += 3) subset.push_back(f);
  double chamfer_sub_ref = 0.0;
  for (const Vec3& p : points) {
    const double d = oracle::point_mesh_distance(p, mesh);
    err_ptm = std::max(err_ptm, std::abs(point_to_mesh(p, mesh).distance - d));
    chamfer_ref += d * d;
    const double ds = oracle::point_mesh_distance(p, mesh, subset);
    chamfer_sub_ref += ds * ds;
  }
  chamfer_ref /= points.size();
  chamfer_sub_ref /= points.size();
  const double err_chamfer = std::max(std::abs(chamfer(points, mesh) - chamfer_ref),
                                      std::abs(chamfer(points, mesh, subset) - chamfer_sub_ref));

  PointCloud cloud;
  for (const Vec3& p : points) {
    cloud.points.push_back(p);
    cloud.labels.push_back(rng.below(2) ? SegmentLabel::body : SegmentLabel::object);
  }
  double pcl_ref = 0.0;
  for (const Vec3& v : mesh.vertices) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
      if (cloud.labels[i] == SegmentLabel::body) best = std::min(best, (v - cloud.points[i]).norm());
    pcl_ref += best;
  }
  pcl_ref = pcl_ref / mesh.vertices.size() * 1000.0;
  const double err_pcl = std::abs(vertex_to_pcl(mesh.vertices, cloud, SegmentLabel::body) - pcl_ref);

  const SolidIndex solid(mesh);
  double err_pen = 0.0;
  int classification_mismatch = 0, inside = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec3& p = points[i];
    const auto hit = solid.penetration(p);
    const bool ref_inside = oracle::inside(p, mesh);
    if (hit.has_value() != ref_inside) {
      ++classification_mismatch;
      continue;
    }
    if (hit) {
      ++inside;
      err_pen = std::max(err_pen, std::abs(hit->distance - oracle::point_mesh_distance(p, mesh)));
    }
  }
  const double worst = std::max({err_ptm, err_chamfer, err_pcl / 1000.0, err_pen});
  return {worst <= 1e-9 && classification_mismatch == 0,
          fmt("%zu faces, %zu points: max |diff| point_to_mesh %.1e, chamfer %.1e, "
              "vertex_to_pcl %.1e mm, penetration %.1e (%d inside, %d inside/outside mismatches); "
              "tolerance 1e-9",
              mesh.faces.size(), points.size(), err_ptm, err_chamfer, err_pcl, err_pen, inside,
              classification_mismatch)};
}

// ---------------------------------------------------------------------------
// Criterion 8: protocol constants.

Outcome criterion_protocol() {
  bool ok = kContactThreshold == 0.0045;
  TriMesh plane;
  plane.vertices = {Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0)};
  plane.faces = {{0, 1, 2}};
  const std::vector<Vec3> probes{Vec3(0, 0, 0.0045), Vec3(0, 0, std::nextafter(0.0045, 1.0))};
  const auto flags = contact_map(probes, MeshIndex(plane));
  ok = ok && flags[0] == 1 && flags[1] == 0;

  const RefineRuns& r = refine_runs();
  const PenetrationReport& p = r.contact_full.penetration;
  bool monotone = !p.cumulative.threshold_mm.empty();
  for (const auto* curve : {&p.cumulative.max, &p.cumulative.mean, &p.cumulative.median}) {
    for (std::size_t k = 1; k < curve->size(); ++k) monotone = monotone && (*curve)[k] >= (*curve)[k - 1];
    monotone = monotone && !curve->empty() && curve->back() == 1.0;
  }

  // Heatmap against contact counts from exhaustive distance scans.
  const int T = r.full.frame_count();
  std::vector<int> counts(r.body.template_mesh.vertices.size(), 0);
  std::vector<std::uint8_t> borderline(counts.size(), 0);
  for (int t = 0; t < T; ++t) {
    const BodyState s = pose_body(r.body, r.full.frame_params(t));
    const RigidTransform to_local = r.full.object.xi[t].inverse();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double d = oracle::point_mesh_distance(to_local.apply(s.posed_vertices[i]), r.object.mesh);
      counts[i] += d <= kContactThreshold;
      if (std::abs(d - kContactThreshold) < 1e-12) borderline[i] = 1;
    }
  }
  int mismatches = 0, touched = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    touched += counts[i] > 0;
    if (!borderline[i] && r.contact_full.heatmap.body[i] != static_cast<double>(counts[i]) / T) ++mismatches;
  }
  ok = ok && monotone && mismatches == 0;
  return {ok, fmt("threshold %.4f m inclusive (%s); cumulative curves monotone ending at 1.0 (%s); "
                  "heatmap equals contact-frame fraction for all %zu body vertices (%d in contact, "
                  "%d mismatches)",
                  kContactThreshold, flags[0] && !flags[1] ? "yes" : "no", monotone ? "yes" : "no",
                  counts.size(), touched, mismatches)};
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical pipeline output.

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files.emplace_back(fs::relative(entry.path(), root).string(), ss.str());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome criterion_determinism() {
  const fs::path base = fs::temp_directory_path() / "interfit_acceptance_determinism";
  auto run = [&](const std::string& name, int threads) {
    const fs::path root = base / name;
    fs::remove_all(root);
    PipelineConfig cfg = parse_config("[synth]\nframes = 20\nviews = 4\n[noise]\nkeypoint_sigma_px = 2\n"
                                      "depth_sigma_m = 0.002\ndistractors = 2\n");
    cfg.seed = 5;
    cfg.threads = threads;
    cfg.seq_dir = root / "seq";
    cfg.out_dir = root / "out";
    std::ostringstream log;
    for (const char* cmd : {"synth", "track-object", "fit-body", "refine", "eval"})
      if (run_command(cmd, cfg, log) != 0) throw std::runtime_error(std::string(cmd) + " failed");
    return snapshot(root);
  };
  const auto a = run("a", 3);
  const auto b = run("b", 3);
  const auto c = run("c", 1);
  const bool same_ab = a == b;
  const bool same_ac = a == c;
  std::size_t bytes = 0;
  for (const auto& f : a) bytes += f.second.size();
  return {same_ab && same_ac && !a.empty(),
          fmt("synth, track-object, fit-body, refine, eval: %zu files (%zu bytes); two runs with "
              "3 threads identical: %s; identical to 1 thread: %s",
              a.size(), bytes, same_ab ? "yes" : "no", same_ac ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion_tracking},  {2, criterion_selection}, {3, criterion_body_fit},
      {4, criterion_contact},   {5, criterion_smoothing}, {6, criterion_gradients},
      {7, criterion_oracles},   {8, criterion_protocol},  {9, criterion_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << fmt("  [%.1f s]", seconds_since(t0)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
