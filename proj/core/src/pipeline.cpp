#include "interfit/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "interfit/io.hpp"
#include "interfit/metrics.hpp"

namespace interfit {

namespace {

namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Value conversion

std::string type_error(const std::string& path, const std::string& value, const char* expected) {
  return path + ": expected " + expected + ", got '" + value + "'";
}

template <class T>
T parse_number(const std::string& path, const std::string& s, const char* expected) {
  T out{};
  const char* end = s.data() + s.size();
  const char* begin = s.data();
  if (!s.empty() && s.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end || s.empty()) throw ConfigError(type_error(path, s, expected));
  return out;
}

void parse_value(const std::string& path, const std::string& s, double& out) {
  out = parse_number<double>(path, s, "a number");
}
void parse_value(const std::string& path, const std::string& s, int& out) {
  out = parse_number<int>(path, s, "an integer");
}
void parse_value(const std::string& path, const std::string& s, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(path, s, "a non-negative integer");
}
void parse_value(const std::string& path, const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") out = true;
  else if (s == "false" || s == "0" || s == "no" || s == "off") out = false;
  else throw ConfigError(type_error(path, s, "true or false"));
}
void parse_value(const std::string&, const std::string& s, std::string& out) { out = s; }
void parse_value(const std::string&, const std::string& s, std::filesystem::path& out) { out = s; }
void parse_value(const std::string& path, const std::string& s, DescentMethod& out) {
  if (s == "gradient") out = DescentMethod::gradient;
  else if (s == "lbfgs") out = DescentMethod::lbfgs;
  else throw ConfigError(type_error(path, s, "gradient or lbfgs"));
}
void parse_value(const std::string& path, const std::string& s, ObjectKind& out) {
  try {
    out = parse_object_kind(s);
  } catch (const std::exception&) {
    throw ConfigError(type_error(path, s, "cube, cylinder or handle_box"));
  }
}

std::string format_value(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(DescentMethod m) { return m == DescentMethod::lbfgs ? "lbfgs" : "gradient"; }
std::string format_value(ObjectKind k) { return object_kind_name(k); }

// ---------------------------------------------------------------------------
// Schema

struct Entry {
  std::string section;
  std::string key;
  std::function<void(const std::string& path, const std::string& value)> set;
  std::function<std::string()> get;
};

class Schema {
 public:
  template <class T>
  void bind(const std::string& section, const std::string& key, T& field) {
    entries_.push_back({section, key,
                        [&field](const std::string& path, const std::string& v) {
                          parse_value(path, v, field);
                        },
                        [&field] { return format_value(field); }});
  }

  void bind_optim(const std::string& section, OptimOptions& o) {
    bind(section, "method", o.method);
    bind(section, "memory", o.memory);
    bind(section, "max_iters", o.max_iters);
    bind(section, "outer_iters", o.outer_iters);
    bind(section, "initial_step", o.initial_step);
    bind(section, "backtrack", o.backtrack);
    bind(section, "growth", o.growth);
    bind(section, "armijo", o.armijo);
    bind(section, "max_backtracks", o.max_backtracks);
    bind(section, "tolerance", o.tolerance);
    bind(section, "patience", o.patience);
    bind(section, "rotation_scale", o.rotation_scale);
    bind(section, "translation_scale", o.translation_scale);
    bind(section, "shape_scale", o.shape_scale);
    bind(section, "pose_scale", o.pose_scale);
    bind(section, "max_move", o.max_move);
  }

  const std::vector<Entry>& entries() const { return entries_; }

  const Entry* find(const std::string& section, const std::string& key) const {
    for (const Entry& e : entries_)
      if (e.section == section && e.key == key) return &e;
    return nullptr;
  }

  std::vector<const Entry*> find_key(const std::string& key) const {
    std::vector<const Entry*> out;
    for (const Entry& e : entries_)
      if (e.key == key) out.push_back(&e);
    return out;
  }

  bool has_section(const std::string& section) const {
    for (const Entry& e : entries_)
      if (e.section == section) return true;
    return false;
  }

 private:
  std::vector<Entry> entries_;
};

Schema make_schema(PipelineConfig& c) {
  Schema s;
  s.bind("paths", "seq", c.seq_dir);
  s.bind("paths", "out", c.out_dir);
  s.bind("run", "seed", c.seed);
  s.bind("run", "threads", c.threads);

  EnergyWeights& w = c.weights;
  s.bind("weights", "lambda_segm", w.lambda_segm);
  s.bind("weights", "lambda_depth", w.lambda_depth);
  s.bind("weights", "lambda_D", w.lambda_D);
  s.bind("weights", "lambda_theta_b", w.lambda_theta_b);
  s.bind("weights", "lambda_theta_h", w.lambda_theta_h);
  s.bind("weights", "lambda_theta_f", w.lambda_theta_f);
  s.bind("weights", "lambda_alpha", w.lambda_alpha);
  s.bind("weights", "lambda_beta", w.lambda_beta);
  s.bind("weights", "lambda_E", w.lambda_E);
  s.bind("weights", "lambda_P", w.lambda_P);
  s.bind("weights", "lambda_G", w.lambda_G);
  s.bind("weights", "lambda_Q", w.lambda_Q);
  s.bind("weights", "lambda_S", w.lambda_S);
  s.bind("weights", "lambda_A", w.lambda_A);
  s.bind("weights", "sigma_gm", w.sigma_gm);
  s.bind("weights", "k_body", w.k_body);
  s.bind("weights", "k_hand", w.k_hand);
  s.bind("weights", "k_face", w.k_face);

  s.bind_optim("tracking", c.tracking.optim);
  s.bind("tracking", "iou_floor", c.tracking.iou_floor);
  s.bind("tracking", "polish", c.tracking.polish);

  s.bind_optim("body", c.body.optim);

  s.bind_optim("refine", c.refine.optim);
  s.bind("refine", "refine_object", c.refine.refine_object);
  s.bind("refine", "contact", c.contact);
  s.bind("refine", "fd_rotation", c.refine.fd.rotation);
  s.bind("refine", "fd_translation", c.refine.fd.translation);

  s.bind("synth", "object", c.object);
  s.bind("synth", "frames", c.frames);
  s.bind("synth", "views", c.views);
  s.bind("synth", "rig_radius", c.rig_radius);
  s.bind("synth", "focal", c.focal);
  s.bind("synth", "width", c.width);
  s.bind("synth", "height", c.height);
  s.bind("synth", "cloud_stride", c.cloud_stride);
  s.bind("synth", "body_seed", c.body_seed);

  NoiseConfig& n = c.noise;
  s.bind("noise", "keypoint_sigma_px", n.keypoint_sigma_px);
  s.bind("noise", "keypoint_dropout", n.keypoint_dropout);
  s.bind("noise", "depth_sigma_m", n.depth_sigma_m);
  s.bind("noise", "mask_px", n.mask_px);
  s.bind("noise", "distractors", n.distractors);
  s.bind("noise", "init_rotation_deg", n.init_rotation_deg);
  s.bind("noise", "init_translation_m", n.init_translation_m);

  s.bind("eval", "source", c.eval_source);
  s.bind("eval", "accel_stride", c.accel_stride);

  s.bind("gradcheck", "configurations", c.gradcheck_configurations);
  s.bind("gradcheck", "tolerance", c.gradcheck_tolerance);
  return s;
}

void validate_config(const PipelineConfig& c) {
  try {
    c.weights.validate();
    c.tracking.optim.validate();
    c.body.optim.validate();
    c.refine.optim.validate();
    c.noise.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.threads >= 1, "run.threads: must be >= 1");
  require(c.frames >= 1, "synth.frames: must be >= 1");
  require(c.views >= 1, "synth.views: must be >= 1");
  require(c.width > 0 && c.height > 0, "synth.width/height: must be positive");
  require(c.cloud_stride >= 1, "synth.cloud_stride: must be >= 1");
  require(c.eval_source == "auto" || c.eval_source == "fitted" || c.eval_source == "ground_truth",
          "eval.source: expected auto, fitted or ground_truth, got '" + c.eval_source + "'");
  require(c.accel_stride >= 1, "eval.accel_stride: must be >= 1");
  require(c.gradcheck_configurations >= 1, "gradcheck.configurations: must be >= 1");
}

// ---------------------------------------------------------------------------
// Command helpers

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::filesystem::path& require_seq(const PipelineConfig& cfg) {
  if (cfg.seq_dir.empty()) throw ConfigError("no sequence directory given (--seq or paths.seq)");
  return cfg.seq_dir;
}

std::filesystem::path prepare_out(const PipelineConfig& cfg) {
  const auto out = cfg.output_dir();
  if (out.empty()) throw ConfigError("no output directory given (--out or paths.out)");
  std::filesystem::create_directories(out);
  return out;
}

struct LoadedSequence {
  SequenceObservation obs;
  ObjectModel object;
  BodyModel body;
};

LoadedSequence load_sequence(const std::filesystem::path& dir, bool need_body) {
  LoadedSequence s;
  s.obs = read_observation(dir);
  s.object = read_object_model(dir);
  if (need_body) s.body = read_body_model(dir / "body.ifbm");
  return s;
}

std::vector<ObjectFrameTarget> rebuild_targets(const SequenceObservation& obs,
                                               const std::vector<std::vector<int>>& selected) {
  if (static_cast<int>(selected.size()) != obs.frame_count())
    throw DomainError("object track covers " + std::to_string(selected.size()) +
                      " frames but the sequence has " + std::to_string(obs.frame_count()));
  std::vector<ObjectFrameTarget> targets(obs.frame_count());
  for (int t = 0; t < obs.frame_count(); ++t)
    for (int v = 0; v < obs.view_count() && v < static_cast<int>(selected[t].size()); ++v) {
      const int pick = selected[t][v];
      if (pick < 0) continue;
      const ViewObservation& view = obs.frames[t].views[v];
      if (pick >= static_cast<int>(view.candidates.size()))
        throw DomainError("selected candidate " + std::to_string(pick) + " missing in frame " +
                          std::to_string(t) + " view " + std::to_string(v));
      targets[t].views.push_back(make_object_view_target(obs.cameras[v], view.candidates[pick], view.depth));
    }
  return targets;
}

}  // namespace

// ---------------------------------------------------------------------------

PipelineConfig parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  PipelineConfig cfg;
  const Schema schema = make_schema(cfg);
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      const auto matches = schema.find_key(name);
      if (matches.empty()) throw ConfigError("unknown key '" + name + "'");
      if (matches.size() > 1)
        throw ConfigError("key '" + name + "' is ambiguous outside a section; put it under [" +
                          matches.front()->section + "] or another section that defines it");
      matches.front()->set(matches.front()->section + "." + name, node.data());
      continue;
    }
    if (!schema.has_section(name)) throw ConfigError("unknown section '[" + name + "]'");
    for (const auto& [key, leaf] : node) {
      const std::string path = name + "." + key;
      const Entry* e = schema.find(name, key);
      if (!e) throw ConfigError("unknown key '" + path + "'");
      e->set(path, leaf.data());
    }
  }
  validate_config(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string default_config_text() {
  PipelineConfig cfg;
  const Schema schema = make_schema(cfg);
  std::ostringstream out;
  std::string section;
  for (const Entry& e : schema.entries()) {
    if (e.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << e.section << "]\n";
      section = e.section;
    }
    out << e.key << " = " << e.get() << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

int run_synth(const PipelineConfig& cfg, std::ostream& log) {
  const auto& dir = cfg.seq_dir.empty() ? cfg.out_dir : cfg.seq_dir;
  if (dir.empty()) throw ConfigError("synth needs a target directory (--seq or --out)");
  Scenario sc = default_scenario(cfg.object, cfg.seed, cfg.frames);
  sc.rig.count = cfg.views;
  sc.rig.radius = cfg.rig_radius;
  sc.rig.focal = cfg.focal;
  sc.rig.width = cfg.width;
  sc.rig.height_px = cfg.height;
  sc.cloud_stride = cfg.cloud_stride;
  NoiseConfig noise = cfg.noise;
  noise.seed = cfg.seed;
  const BodyModel body = make_toy_body({}, cfg.body_seed);
  const ObjectModel object = make_object(sc.object);
  const SyntheticSequence syn = synth_sequence(sc, noise, body, object);
  write_sequence(dir, syn, sc, noise, body, object);
  log << "synth: wrote " << sc.frames << " frames x " << sc.rig.count << " views to " << dir.string()
      << '\n';
  return 0;
}

int run_track_object(const PipelineConfig& cfg, std::ostream& log) {
  const auto start = Clock::now();
  const auto& seq = require_seq(cfg);
  const auto out = prepare_out(cfg);
  const LoadedSequence s = load_sequence(seq, false);
  const RigidTransform xi_0 = read_pose(seq / "object_init.json");
  TrackingOptions opts = cfg.tracking;
  opts.weights = cfg.weights;
  const TrackingResult r = track_object(s.obs, s.object, xi_0, opts);
  write_trajectory(out / kTrackFile, r.trajectory, r.selected);
  const int coasting = std::accumulate(r.trajectory.coasting.begin(), r.trajectory.coasting.end(), 0);
  log << "track-object: " << r.trajectory.size() << " frames, " << coasting << " coasting ("
      << seconds_since(start) << " s)\n";
  return 0;
}

int run_fit_body(const PipelineConfig& cfg, std::ostream& log) {
  const auto start = Clock::now();
  const auto& seq = require_seq(cfg);
  const auto out = prepare_out(cfg);
  const LoadedSequence s = load_sequence(seq, true);

  FittedSequence f;
  const bool have_track = std::filesystem::exists(out / kTrackFile);
  if (have_track) {
    f.object = read_trajectory(out / kTrackFile);
    if (f.object.size() != s.obs.frame_count())
      throw DomainError((out / kTrackFile).string() + " does not match the sequence length");
  } else {
    const RigidTransform xi_0 = read_pose(seq / "object_init.json");
    f.object.xi.assign(s.obs.frame_count(), xi_0);
    f.object.coasting.assign(s.obs.frame_count(), 1);
  }
  BodyFitOptions opts = cfg.body;
  opts.weights = cfg.weights;
  f.frames = fit_body_frames(s.obs, s.body, opts, have_track ? &s.object : nullptr,
                             have_track ? &f.object : nullptr);
  std::vector<BodyParams::Shape> betas;
  for (const BodyParams& p : f.frames) betas.push_back(p.beta);
  f.beta_star = mean_shape(betas);
  for (BodyParams& p : f.frames) p.beta = f.beta_star;
  write_fitted(out / kFittedFramesFile, f);
  log << "fit-body: " << f.frame_count() << " frames" << (have_track ? " (object occlusion on)" : "")
      << " (" << seconds_since(start) << " s)\n";
  return 0;
}

int run_refine(const PipelineConfig& cfg, std::ostream& log) {
  const auto start = Clock::now();
  const auto& seq = require_seq(cfg);
  const auto out = cfg.output_dir();
  std::string missing;
  for (const char* name : {kTrackFile, kFittedFramesFile})
    if (!std::filesystem::exists(out / name))
      missing += (missing.empty() ? "" : ", ") + (out / name).string();
  if (!missing.empty())
    throw IoError("refine needs the outputs of track-object and fit-body; missing " + missing);

  const LoadedSequence s = load_sequence(seq, true);
  std::vector<std::vector<int>> selected;
  const ObjectTrajectory track = read_trajectory(out / kTrackFile, &selected);
  const auto targets = rebuild_targets(s.obs, selected);
  ContactAnnotation annotation;
  ContactSchedule schedule;
  read_contacts(seq / "contacts.json", annotation, schedule);
  if (!cfg.contact) annotation.body_vertex_ids.clear();

  FittedSequence init = read_fitted(out / kFittedFramesFile);
  if (init.frame_count() != s.obs.frame_count())
    throw DomainError((out / kFittedFramesFile).string() + " does not match the sequence length");
  init.object = track;
  init.schedule = schedule;
  for (BodyParams& p : init.frames) p.beta = init.beta_star;

  const SceneData scene = make_scene(s.obs, s.body, s.object, annotation, schedule, targets,
                                     cfg.weights, cfg.threads);
  RefineOptions opts = cfg.refine;
  opts.weights = cfg.weights;
  const FittedSequence result = joint_refine(init, scene, opts);
  write_fitted(out / kFittedFile, result);
  log << "refine: " << result.frame_count() << " frames, energy "
      << result.diagnostics.at("e_total") << " (" << seconds_since(start) << " s)\n";
  return 0;
}

int run_eval(const PipelineConfig& cfg, std::ostream& log) {
  const auto& seq = require_seq(cfg);
  const auto out = prepare_out(cfg);
  std::filesystem::path source;
  if (cfg.eval_source == "ground_truth") source = seq / "gt.json";
  else if (cfg.eval_source == "fitted") source = out / kFittedFile;
  else source = std::filesystem::exists(out / kFittedFile) ? out / kFittedFile : seq / "gt.json";
  require_file(source);

  const LoadedSequence s = load_sequence(seq, true);
  const FittedSequence fitted = read_fitted(source);
  const SequenceContact contact = evaluate_contact(fitted, s.body, s.object, cfg.threads);

  std::map<std::string, double> scalars;
  scalars["frame_count"] = fitted.frame_count();
  if (source != seq / "gt.json" && std::filesystem::exists(seq / "gt.json")) {
    const FittedSequence gt = read_fitted(seq / "gt.json");
    const PoseError e = pose_error(fitted, gt, &s.body);
    scalars["joint_error_mean_mm"] = e.mean_joint_mm;
    scalars["object_rotation_median_deg"] = median(e.rotation_deg);
    scalars["object_translation_median_mm"] = median(e.translation_mm);
  }

  // Vertex-to-cloud distances over the merged views of each frame.
  double body_sum = 0.0, object_sum = 0.0;
  int body_n = 0, object_n = 0;
  const int T = std::min(fitted.frame_count(), s.obs.frame_count());
  for (int t = 0; t < T; ++t) {
    PointCloud merged;
    for (const ViewObservation& v : s.obs.frames[t].views) {
      merged.points.insert(merged.points.end(), v.cloud.points.begin(), v.cloud.points.end());
      merged.labels.insert(merged.labels.end(), v.cloud.labels.begin(), v.cloud.labels.end());
    }
    auto has = [&](SegmentLabel l) {
      return std::find(merged.labels.begin(), merged.labels.end(), l) != merged.labels.end();
    };
    if (has(SegmentLabel::body)) {
      body_sum += vertex_to_pcl(pose_body(s.body, fitted.frame_params(t)).posed_vertices, merged,
                                SegmentLabel::body);
      ++body_n;
    }
    if (has(SegmentLabel::object)) {
      std::vector<Vec3> verts;
      for (const Vec3& p : s.object.mesh.vertices) verts.push_back(fitted.object.xi[t].apply(p));
      object_sum += vertex_to_pcl(verts, merged, SegmentLabel::object);
      ++object_n;
    }
  }
  if (body_n) scalars["vertex_to_pcl_body_mm"] = body_sum / body_n;
  if (object_n) scalars["vertex_to_pcl_object_mm"] = object_sum / object_n;
  if (fitted.frame_count() >= 3)
    scalars["acceleration_mean_m"] = mean_acceleration(fitted, s.body, cfg.accel_stride, cfg.threads);
  if (std::filesystem::exists(seq / "contacts.json")) {
    ContactAnnotation annotation;
    ContactSchedule schedule;
    read_contacts(seq / "contacts.json", annotation, schedule);
    FittedSequence gated = fitted;
    if (gated.schedule.q.empty()) gated.schedule = schedule;
    scalars["contact_gap_mm"] = contact_gap_mm(gated, s.body, s.object, annotation.body_vertex_ids);
  }
  for (const auto& [k, v] : fitted.diagnostics) scalars["diagnostics." + k] = v;

  write_reports(out / kReportDir, contact, scalars);
  log << "eval: " << source.filename().string() << ", " << contact.penetration.contact_frame_count()
      << " contact frames, mean penetration " << contact.penetration.mean_mm << " mm\n";
  return 0;
}

int run_gradcheck(const PipelineConfig& cfg, std::ostream& log) {
  const bool from_seq = !cfg.seq_dir.empty() && std::filesystem::exists(cfg.seq_dir / "body.ifbm");
  const BodyModel body = from_seq ? read_body_model(cfg.seq_dir / "body.ifbm")
                                  : make_toy_body({}, cfg.body_seed);
  const ObjectModel object = from_seq ? read_object_model(cfg.seq_dir)
                                      : make_object(default_scenario(cfg.object, cfg.seed).object);
  const auto entries = gradcheck(body, object, cfg.seed, cfg.gradcheck_configurations);
  bool ok = true;
  for (const GradcheckEntry& e : entries) {
    const bool pass = e.max_relative_error <= cfg.gradcheck_tolerance;
    ok = ok && pass;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s %.3e  (%d configurations)  %s\n", e.term.c_str(),
                  e.max_relative_error, e.configurations, pass ? "ok" : "FAIL");
    log << buf;
  }
  log << "gradcheck: " << (ok ? "all terms within " : "some terms exceed ")
      << format_value(cfg.gradcheck_tolerance) << '\n';
  return ok ? 0 : 1;
}

int run_command(std::string_view command, const PipelineConfig& cfg, std::ostream& log) {
  if (command == "synth") return run_synth(cfg, log);
  if (command == "track-object") return run_track_object(cfg, log);
  if (command == "fit-body") return run_fit_body(cfg, log);
  if (command == "refine") return run_refine(cfg, log);
  if (command == "eval") return run_eval(cfg, log);
  if (command == "gradcheck") return run_gradcheck(cfg, log);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

}  // namespace interfit
