#include "interfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "interfit/energy.hpp"
#include "interfit/io.hpp"
#include "interfit/parallel.hpp"

namespace interfit {

namespace {

constexpr double kMm = 1000.0;

void check_frames(const FittedSequence& fitted, const ObjectModel& object) {
  fitted.validate();
  if (fitted.object.size() != fitted.frame_count())
    throw DomainError("fitted sequence has " + std::to_string(fitted.frame_count()) +
                      " body frames but " + std::to_string(fitted.object.size()) +
                      " object poses");
  object.validate();
}

std::vector<int> bin_counts(std::span<const double> values, double bin, std::size_t bins) {
  std::vector<int> counts(bins, 0);
  for (double v : values) {
    const auto k = std::min(bins - 1, static_cast<std::size_t>(std::floor(v / bin)));
    ++counts[k];
  }
  return counts;
}

std::vector<double> cumulative(std::span<const double> values, std::span<const double> thresholds) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back(static_cast<double>(n) / static_cast<double>(sorted.size()));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> contact_map(std::span<const Vec3> points, const MeshIndex& surface,
                                      const RigidTransform& pose, double threshold) {
  if (surface.empty()) throw DomainError("contact_map: empty surface");
  const RigidTransform to_local = pose.inverse();
  const Mat3 r = to_local.matrix();
  std::vector<std::uint8_t> flags(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i)
    flags[i] = surface.closest(r * points[i] + to_local.translation).distance <= threshold;
  return flags;
}

std::vector<std::uint8_t> contact_map(const BodyState& state, const TriMesh& object_mesh,
                                      const RigidTransform& pose, double threshold) {
  return contact_map(state.posed_vertices, MeshIndex(object_mesh), pose, threshold);
}

std::vector<double> heatmap(std::span<const std::vector<std::uint8_t>> maps) {
  if (maps.empty()) throw DomainError("heatmap: no frames");
  const std::size_t n = maps.front().size();
  std::vector<int> counts(n, 0);
  for (const auto& m : maps) {
    if (m.size() != n) throw DomainError("heatmap: contact maps differ in length");
    for (std::size_t i = 0; i < n; ++i) counts[i] += m[i] != 0;
  }
  std::vector<double> out(n);
  const double frames = static_cast<double>(maps.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = counts[i] / frames;
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FramePenetration frame_penetration(std::vector<double> depths_mm, int frame) {
  FramePenetration f;
  f.frame = frame;
  f.penetrating = static_cast<int>(depths_mm.size());
  if (depths_mm.empty()) return f;
  f.max_mm = *std::max_element(depths_mm.begin(), depths_mm.end());
  f.mean_mm = std::accumulate(depths_mm.begin(), depths_mm.end(), 0.0) / depths_mm.size();
  f.median_mm = median(std::move(depths_mm));
  return f;
}

PenetrationReport summarize_penetration(std::vector<FramePenetration> contact_frames,
                                        int frame_count, double bin_mm) {
  if (!(bin_mm > 0.0)) throw DomainError("summarize_penetration: bin width must be positive");
  PenetrationReport r;
  r.frame_count = frame_count;
  r.bin_mm = bin_mm;
  r.contact_frames = std::move(contact_frames);
  if (r.contact_frames.empty()) return r;

  std::vector<double> maxs, means, medians;
  for (const auto& f : r.contact_frames) {
    maxs.push_back(f.max_mm);
    means.push_back(f.mean_mm);
    medians.push_back(f.median_mm);
  }
  r.max_mm = *std::max_element(maxs.begin(), maxs.end());
  r.mean_mm = std::accumulate(means.begin(), means.end(), 0.0) / means.size();

  // The curves run from 0 to at least 20 mm and always past the largest
  // value, so the last entry of every cumulative curve is exactly 1.
  const std::size_t bins =
      static_cast<std::size_t>(std::floor(std::max(20.0, r.max_mm) / bin_mm)) + 1;
  r.histogram_max = bin_counts(maxs, bin_mm, bins);
  r.histogram_mean = bin_counts(means, bin_mm, bins);
  r.histogram_median = bin_counts(medians, bin_mm, bins);
  for (std::size_t k = 0; k <= bins; ++k) r.cumulative.threshold_mm.push_back(k * bin_mm);
  r.cumulative.max = cumulative(maxs, r.cumulative.threshold_mm);
  r.cumulative.mean = cumulative(means, r.cumulative.threshold_mm);
  r.cumulative.median = cumulative(medians, r.cumulative.threshold_mm);
  return r;
}

std::vector<double> penetration_depths_mm(const BodyState& state, const SolidIndex& solid,
                                          const RigidTransform& pose) {
  const RigidTransform to_local = pose.inverse();
  const Mat3 r = to_local.matrix();
  std::vector<double> depths;
  for (const Vec3& v : state.posed_vertices)
    if (auto hit = solid.penetration(r * v + to_local.translation)) depths.push_back(hit->distance * kMm);
  return depths;
}

SequenceContact evaluate_contact(const FittedSequence& fitted, const BodyModel& body,
                                 const ObjectModel& object, int threads) {
  check_frames(fitted, object);
  const int T = fitted.frame_count();
  const MeshIndex object_surface(object.mesh);
  const SolidIndex solid(object.mesh);

  std::vector<std::vector<std::uint8_t>> body_maps(T), object_maps(T);
  std::vector<std::vector<double>> depths(T);
  parallel_for(T, threads, [&](int t) {
    const BodyState state = pose_body(body, fitted.frame_params(t));
    const RigidTransform& xi = fitted.object.xi[t];
    body_maps[t] = contact_map(state.posed_vertices, object_surface, xi);
    const TriMesh body_mesh = posed_mesh(body, state);
    std::vector<Vec3> object_points;
    object_points.reserve(object.mesh.vertices.size());
    for (const Vec3& p : object.mesh.vertices) object_points.push_back(xi.apply(p));
    object_maps[t] = contact_map(object_points, MeshIndex(body_mesh));
    depths[t] = penetration_depths_mm(state, solid, xi);
  });

  SequenceContact out;
  if (T > 0) {
    out.heatmap.body = heatmap(body_maps);
    out.heatmap.object = heatmap(object_maps);
  }
  std::vector<FramePenetration> frames;
  for (int t = 0; t < T; ++t)
    if (std::any_of(body_maps[t].begin(), body_maps[t].end(), [](auto f) { return f != 0; }))
      frames.push_back(frame_penetration(std::move(depths[t]), t));
  out.penetration = summarize_penetration(std::move(frames), T);
  return out;
}

PenetrationReport penetration_stats(const FittedSequence& fitted, const BodyModel& body,
                                    const ObjectModel& object, int threads) {
  return evaluate_contact(fitted, body, object, threads).penetration;
}

double vertex_to_pcl(std::span<const Vec3> vertices, const PointCloud& cloud, SegmentLabel label) {
  std::vector<Vec3> region;
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    if (cloud.labels[i] == label) region.push_back(cloud.points[i]);
  if (region.empty())
    throw DomainError("vertex_to_pcl: cloud has no points labelled " +
                      std::string(label_name(label)));
  if (vertices.empty()) throw DomainError("vertex_to_pcl: no vertices");
  const PointIndex index(region);
  double sum = 0.0;
  for (const Vec3& v : vertices) sum += index.nearest(v).second;
  return sum / static_cast<double>(vertices.size()) * kMm;
}

std::vector<double> accel_trace(const FittedSequence& fitted, const BodyModel& body,
                                int vertex_id) {
  const int T = fitted.frame_count();
  if (T < 3) throw DomainError("accel_trace: need at least 3 frames, got " + std::to_string(T));
  if (vertex_id < 0 || vertex_id >= static_cast<int>(body.template_mesh.vertices.size()))
    throw DomainError("accel_trace: vertex id " + std::to_string(vertex_id) + " out of range");
  std::vector<Vec3> v(T);
  for (int t = 0; t < T; ++t) v[t] = pose_body(body, fitted.frame_params(t)).posed_vertices[vertex_id];
  std::vector<double> out;
  for (int t = 1; t + 1 < T; ++t) out.push_back((v[t + 1] - 2.0 * v[t] + v[t - 1]).norm());
  return out;
}

double mean_acceleration(const FittedSequence& fitted, const BodyModel& body, int stride,
                         int threads) {
  const int T = fitted.frame_count();
  if (T < 3) throw DomainError("mean_acceleration: need at least 3 frames");
  if (stride < 1) throw DomainError("mean_acceleration: stride must be >= 1");
  std::vector<std::vector<Vec3>> verts(T);
  parallel_for(T, threads, [&](int t) {
    verts[t] = pose_body(body, fitted.frame_params(t)).posed_vertices;
  });
  double sum = 0.0;
  long count = 0;
  for (int t = 1; t + 1 < T; ++t)
    for (std::size_t i = 0; i < verts[t].size(); i += stride) {
      sum += (verts[t + 1][i] - 2.0 * verts[t][i] + verts[t - 1][i]).norm();
      ++count;
    }
  return sum / static_cast<double>(count);
}

PoseError pose_error(const FittedSequence& fitted, const FittedSequence& truth,
                     const BodyModel* body) {
  PoseError e;
  if (body) {
    if (fitted.frame_count() != truth.frame_count())
      throw DomainError("pose_error: " + std::to_string(fitted.frame_count()) +
                        " fitted frames vs " + std::to_string(truth.frame_count()) +
                        " ground-truth frames");
    for (int t = 0; t < fitted.frame_count(); ++t) {
      const auto a = pose_body(*body, fitted.frame_params(t)).posed_joints;
      const auto b = pose_body(*body, truth.frame_params(t)).posed_joints;
      double s = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]).norm();
      e.joint_mm.push_back(s / a.size() * kMm);
    }
    if (!e.joint_mm.empty())
      e.mean_joint_mm =
          std::accumulate(e.joint_mm.begin(), e.joint_mm.end(), 0.0) / e.joint_mm.size();
  }
  if (fitted.object.size() > 0 || truth.object.size() > 0) {
    if (fitted.object.size() != truth.object.size())
      throw DomainError("pose_error: " + std::to_string(fitted.object.size()) +
                        " fitted object poses vs " + std::to_string(truth.object.size()) +
                        " ground-truth poses");
    for (int t = 0; t < fitted.object.size(); ++t) {
      const RigidTransform &a = fitted.object.xi[t], &b = truth.object.xi[t];
      e.rotation_deg.push_back(rotation_distance(a.matrix(), b.matrix()) * 180.0 / M_PI);
      e.translation_mm.push_back((a.translation - b.translation).norm() * kMm);
    }
  }
  return e;
}

double contact_gap_mm(const FittedSequence& fitted, const BodyModel& body,
                      const ObjectModel& object, std::span<const int> body_ids) {
  check_frames(fitted, object);
  const auto faces = object.contact_faces();
  const MeshIndex surface(object.mesh, faces);
  double sum = 0.0;
  long count = 0;
  for (int t = 0; t < fitted.frame_count(); ++t) {
    if (t >= fitted.schedule.size() || !fitted.schedule.q[t]) continue;
    const BodyState state = pose_body(body, fitted.frame_params(t));
    const RigidTransform to_local = fitted.object.xi[t].inverse();
    for (int id : body_ids) {
      sum += surface.closest(to_local.apply(state.posed_vertices.at(id))).distance;
      ++count;
    }
  }
  return count ? sum / count * kMm : 0.0;
}

void write_reports(const std::filesystem::path& dir, const SequenceContact& contact,
                   const std::map<std::string, double>& scalars) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  char buf[128];
  {
    auto out = open("penetration.csv");
    out << "threshold_mm,fraction,fraction_max,fraction_median\n";
    const auto& c = contact.penetration.cumulative;
    for (std::size_t k = 0; k < c.threshold_mm.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", c.threshold_mm[k], c.mean[k],
                    c.max[k], c.median[k]);
      out << buf;
    }
  }
  auto write_heat = [&](const char* name, const std::vector<double>& h) {
    auto out = open(name);
    out << "vertex_id,likelihood\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, h[i]);
      out << buf;
    }
  };
  write_heat("heatmap_body.csv", contact.heatmap.body);
  write_heat("heatmap_object.csv", contact.heatmap.object);

  const PenetrationReport& p = contact.penetration;
  nlohmann::ordered_json j;
  j["frame_count"] = p.frame_count;
  j["contact_frame_count"] = p.contact_frame_count();
  j["contact_threshold_mm"] = kContactThreshold * kMm;
  j["penetration_mean_mm"] = p.mean_mm;
  j["penetration_max_mm"] = p.max_mm;
  j["penetration_bin_mm"] = p.bin_mm;
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& f : p.contact_frames)
    frames.push_back({{"frame", f.frame},
                      {"penetrating", f.penetrating},
                      {"max_mm", f.max_mm},
                      {"mean_mm", f.mean_mm},
                      {"median_mm", f.median_mm}});
  j["penetration_histogram"] = {{"max", p.histogram_max},
                                {"mean", p.histogram_mean},
                                {"median", p.histogram_median}};
  j["contact_frames"] = std::move(frames);
  for (const auto& [k, v] : scalars) j["scalars"][k] = v;
  auto out = open("summary.json");
  out << j.dump(2) << '\n';
}

}  // namespace interfit
