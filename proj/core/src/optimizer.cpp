#include "interfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "interfit/parallel.hpp"

namespace interfit {

void OptimOptions::validate() const {
  if (max_iters < 0) throw DomainError("max_iters must be non-negative");
  if (!(initial_step > 0.0)) throw DomainError("initial_step must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw DomainError("backtrack must lie in (0, 1)");
  if (!(growth >= 1.0)) throw DomainError("growth must be at least 1");
  if (!(armijo > 0.0 && armijo < 1.0)) throw DomainError("armijo must lie in (0, 1)");
  if (max_backtracks < 1) throw DomainError("max_backtracks must be positive");
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be non-negative");
  if (patience < 1) throw DomainError("patience must be positive");
  if (!(rotation_scale >= 0.0 && translation_scale >= 0.0 && shape_scale >= 0.0 &&
        pose_scale >= 0.0))
    throw DomainError("block scales must be non-negative");
  if (outer_iters < 1) throw DomainError("outer_iters must be positive");
  if (!(max_move >= 0.0)) throw DomainError("max_move must be non-negative");
  if (memory < 1) throw DomainError("memory must be positive");
}

MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& init,
                        const OptimOptions& opts, const Eigen::VectorXd& scales) {
  opts.validate();
  const Eigen::Index n = init.size();
  if (scales.size() != 0 && scales.size() != n)
    throw DomainError("scales must match the parameter count");
  const Eigen::VectorXd s = scales.size() == 0 ? Eigen::VectorXd::Ones(n) : scales;

  MinimizeResult r;
  r.x = init;
  Eigen::VectorXd g(n);
  r.value = objective(r.x, opts.max_iters > 0 ? &g : nullptr);
  if (!std::isfinite(r.value)) throw DomainError("objective is not finite at the initial point");
  r.history.push_back(r.value);

  double step = opts.initial_step;
  int small = 0;
  Eigen::VectorXd gn(n);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y), newest last
  const bool lbfgs = opts.method == DescentMethod::lbfgs;
  while (r.iterations < opts.max_iters) {
    Eigen::VectorXd d;
    if (lbfgs && !pairs.empty()) {
      // Two-loop recursion.
      Eigen::VectorXd q = g;
      std::vector<double> alpha(pairs.size());
      for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
        const auto& [si, yi] = pairs[i];
        alpha[i] = si.dot(q) / yi.dot(si);
        q -= alpha[i] * yi;
      }
      const auto& [sl, yl] = pairs.back();
      const double gamma = sl.dot(yl) / yl.cwiseProduct(s).dot(yl);
      d = gamma * s.cwiseProduct(q);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [si, yi] = pairs[i];
        const double beta = yi.dot(d) / yi.dot(si);
        d += (alpha[i] - beta) * si;
      }
      d = -d;
      if (!(g.dot(d) < 0.0)) {
        pairs.clear();
        d = -s.cwiseProduct(g);
      }
    } else {
      d = -s.cwiseProduct(g);
    }
    const double slope = g.dot(d);
    if (!(slope < 0.0)) break;  // stationary in the scaled metric

    double t = lbfgs && !pairs.empty() ? 1.0 : step;
    if (opts.max_move > 0.0) t = std::min(t, opts.max_move / d.cwiseAbs().maxCoeff());
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (int k = 0; k < opts.max_backtracks; ++k) {
      xn = r.x + t * d;
      fn = objective(xn, nullptr);
      if (std::isfinite(fn) && fn <= r.value + opts.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= opts.backtrack;
    }
    if (!accepted) break;

    fn = objective(xn, &gn);
    if (lbfgs) {
      Eigen::VectorXd sk = xn - r.x;
      Eigen::VectorXd yk = gn - g;
      if (sk.dot(yk) > 1e-12 * sk.norm() * yk.norm()) {
        pairs.emplace_back(std::move(sk), std::move(yk));
        if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
      }
    }
    const double decrease = r.value - fn;
    r.x = xn;
    r.value = fn;
    g = gn;
    r.history.push_back(fn);
    ++r.iterations;
    step = t * opts.growth;

    if (decrease <= opts.tolerance * std::max(std::abs(fn), 1e-300)) {
      if (++small >= opts.patience) break;
    } else {
      small = 0;
    }
  }
  return r;
}

std::optional<int> select_candidate(const Silhouette& prev_render,
                                    std::span<const Silhouette> candidates, double iou_floor) {
  int best = -1;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].width != prev_render.width || candidates[i].height != prev_render.height)
      throw DomainError("candidate mask size differs from the rendered mask");
    const double iou = mask_iou(prev_render, candidates[i]);
    if (iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  if (best < 0 || best_iou < iou_floor) return std::nullopt;
  return best;
}

// ---------------------------------------------------------------------------

namespace {

// Axis-aligned probing at the finite-difference scale. The rasterized object
// term is piecewise constant at pixel level, so a descent direction built
// from differences can stall where a single-coordinate move still helps.
Eigen::VectorXd compass_polish(const Objective& objective, Eigen::VectorXd x,
                               const FiniteDifferenceSteps& fd) {
  double f = objective(x, nullptr);
  double shrink = 1.0;
  for (int round = 0; round < 3; ++round, shrink *= 0.5) {
    bool moved = true;
    for (int sweep = 0; sweep < 8 && moved; ++sweep) {
      moved = false;
      for (int i = 0; i < 6; ++i) {
        const double h = shrink * (i < 3 ? fd.rotation : fd.translation);
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd y = x;
          y[i] += sign * h;
          const double fy = objective(y, nullptr);
          if (fy < f) {
            x = y;
            f = fy;
            moved = true;
            break;
          }
        }
      }
    }
  }
  return x;
}

}  // namespace

RigidTransform fit_object_frame(const TriMesh& mesh, const ObjectFrameTarget& target,
                                const RigidTransform& init, const TrackingOptions& opts,
                                double* energy) {
  Eigen::VectorXd scales(6);
  scales << Eigen::Vector3d::Constant(opts.optim.rotation_scale),
      Eigen::Vector3d::Constant(opts.optim.translation_scale);
  Eigen::VectorXd x = init.as_vector();
  for (const FiniteDifferenceSteps& fd : opts.fd_levels) {
    auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
      const RigidTransform xi = RigidTransform::from_vector(v);
      if (!grad) return e_object(xi, mesh, target, opts.weights);
      double value = 0.0;
      *grad = e_object_gradient(xi, mesh, target, opts.weights, fd, &value);
      return value;
    };
    x = minimize(objective, x, opts.optim, scales).x;
    if (opts.polish) x = compass_polish(objective, x, fd);
  }
  const RigidTransform out = RigidTransform::from_vector(x);
  if (energy) *energy = e_object(out, mesh, target, opts.weights);
  return out;
}

TrackingResult track_object(const SequenceObservation& seq, const ObjectModel& object,
                            const RigidTransform& xi_0, const TrackingOptions& opts) {
  const int T = seq.frame_count();
  if (T == 0) throw DomainError("cannot track an empty sequence");
  seq.validate();
  object.validate();
  opts.weights.validate();
  const int V = seq.view_count();

  TrackingResult out;
  out.trajectory.xi.resize(T);
  out.trajectory.coasting.assign(T, 0);
  out.selected.assign(T, std::vector<int>(V, -1));
  out.targets.resize(T);
  out.energy.assign(T, 0.0);

  RigidTransform prev = xi_0;
  for (int t = 0; t < T; ++t) {
    const FrameObservation& frame = seq.frames[t];
    ObjectFrameTarget& target = out.targets[t];
    for (int v = 0; v < V; ++v) {
      const PinholeCamera& cam = seq.cameras[v];
      const Silhouette rendered = render_silhouette(object.mesh, prev, cam);
      const auto pick = select_candidate(rendered, frame.views[v].candidates, opts.iou_floor);
      if (!pick) continue;
      out.selected[t][v] = *pick;
      target.views.push_back(
          make_object_view_target(cam, frame.views[v].candidates[*pick], frame.views[v].depth));
    }
    if (target.views.empty()) {
      out.trajectory.xi[t] = prev;
      out.trajectory.coasting[t] = 1;
      continue;
    }
    prev = fit_object_frame(object.mesh, target, prev, opts, &out.energy[t]);
    out.trajectory.xi[t] = prev;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd body_scales(const OptimOptions& o, bool with_shape) {
  BodyParams s;
  s.beta.setConstant(with_shape ? o.shape_scale : 0.0);
  s.theta_b.setConstant(o.pose_scale);
  s.theta_b.head<3>().setConstant(o.rotation_scale);  // root orientation
  s.theta_h.setConstant(o.pose_scale);
  s.theta_f.setZero();  // inert face parameters stay where they are
  s.psi.setZero();
  s.gamma.setConstant(o.translation_scale);
  return s.pack();
}

}  // namespace

std::vector<BodyParams> fit_body_frames(const SequenceObservation& seq, const BodyModel& model,
                                        const BodyFitOptions& opts, const ObjectModel* object,
                                        const ObjectTrajectory* object_poses) {
  const int T = seq.frame_count();
  if (T == 0) throw DomainError("cannot fit an empty sequence");
  opts.weights.validate();
  bool any = false;
  for (const auto& f : seq.frames)
    for (const auto& v : f.views)
      for (const auto& k : v.keypoints.joints) any = any || k.confidence > 0.0;
  if (!any) throw DomainError("no keypoint detections in the sequence");
  if (object_poses && object_poses->size() != T)
    throw DomainError("object trajectory length differs from the sequence");

  SceneData scene;
  scene.body = &model;
  scene.cameras = seq.cameras;
  scene.joint_weights = opts.weights.joint_weights(model);
  scene.keypoints.resize(T);
  for (int t = 0; t < T; ++t)
    for (const auto& v : seq.frames[t].views) scene.keypoints[t].push_back(v.keypoints);

  const Eigen::VectorXd scales = body_scales(opts.optim, true);
  std::vector<BodyParams> out(T);
  BodyParams current;
  {
    // Rest pose placed at the centroid of the first frame's body points.
    Vec3 c = Vec3::Zero();
    std::size_t n = 0;
    for (int v = 0; v < seq.view_count(); ++v)
      for (const Vec3& p : seq.body_points(0, v)) {
        c += p;
        ++n;
      }
    Vec3 rest = Vec3::Zero();
    for (const Vec3& p : model.template_mesh.vertices) rest += p;
    rest /= static_cast<double>(model.vertex_count());
    if (n > 0) current.gamma = c / static_cast<double>(n) - rest;
  }

  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<Vec3>> points(seq.view_count());
    for (int v = 0; v < seq.view_count(); ++v) points[v] = seq.body_points(t, v);
    std::vector<SceneItem> occ;
    if (object && object_poses) occ.push_back({&object->mesh, object_poses->xi[t], 1});

    std::vector<std::vector<int>> previous;
    for (int outer = 0; outer < opts.optim.outer_iters; ++outer) {
      DepthMatches matches;
      if (opts.weights.lambda_D > 0.0) {
        const BodyState st = pose_body(model, current);
        matches = match_depth(st, points, body_visibility(model, st, seq.cameras, occ));
        // Unchanged correspondences mean the next pass would repeat the last one.
        if (outer > 0 && matches.vertex == previous) break;
        previous = matches.vertex;
      } else if (outer > 0) {
        break;
      }
      auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const BodyParams p = BodyParams::unpack(x);
        const BodyState st = pose_body(model, p);
        if (!grad) return e_body_frame(scene, p, st, matches, opts.weights, t);
        BodyCotangent ct = BodyCotangent::zeros(model);
        BodyParams pg;
        const double e = e_body_frame(scene, p, st, matches, opts.weights, t, &ct, &pg);
        pg += pose_body_vjp(model, p, st, ct);
        *grad = pg.pack();
        return e;
      };
      current = BodyParams::unpack(minimize(objective, current.pack(), opts.optim, scales).x);
    }
    out[t] = current;
  }
  return out;
}

BodyParams::Shape mean_shape(std::span<const BodyParams::Shape> betas) {
  if (betas.empty()) throw DomainError("mean shape of an empty list");
  // Running mean: returns the input exactly when all entries agree.
  BodyParams::Shape m = betas.front();
  for (std::size_t k = 1; k < betas.size(); ++k) m += (betas[k] - m) / static_cast<double>(k + 1);
  return m;
}

// ---------------------------------------------------------------------------

SceneData make_scene(const SequenceObservation& seq, const BodyModel& body,
                     const ObjectModel& object, const ContactAnnotation& annotation,
                     const ContactSchedule& schedule, std::span<const ObjectFrameTarget> targets,
                     const EnergyWeights& weights, int threads) {
  const int T = seq.frame_count();
  if (static_cast<int>(targets.size()) != T || schedule.size() != T)
    throw DomainError("scene inputs disagree on the number of frames");
  SceneData s;
  s.body = &body;
  s.object = &object;
  s.cameras = seq.cameras;
  s.contact_body_ids = annotation.body_vertex_ids;
  s.schedule = schedule;
  s.threads = threads;
  s.object_targets.assign(targets.begin(), targets.end());
  s.keypoints.resize(T);
  s.body_points.resize(T);
  for (int t = 0; t < T; ++t) {
    for (int v = 0; v < seq.view_count(); ++v) {
      s.keypoints[t].push_back(seq.frames[t].views[v].keypoints);
      s.body_points[t].push_back(seq.body_points(t, v));
    }
  }
  Vec3 centroid = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& pts : s.body_points.front())
    for (const Vec3& p : pts) {
      centroid += p;
      ++n;
    }
  if (n > 0) {
    centroid /= static_cast<double>(n);
    s.ground = fit_ground_plane(seq.ground_points, &centroid);
  } else {
    s.ground = fit_ground_plane(seq.ground_points);
  }
  s.prepare(weights);
  return s;
}

namespace {

constexpr int kFrameVars = BodyParams::kSize - kShapeDim + 6;

Eigen::VectorXd pack_sequence(const FittedSequence& f) {
  const int T = f.frame_count();
  Eigen::VectorXd x(static_cast<Eigen::Index>(T) * kFrameVars);
  for (int t = 0; t < T; ++t) {
    x.segment(static_cast<Eigen::Index>(t) * kFrameVars, BodyParams::kSize - kShapeDim) =
        f.frames[t].pack().tail(BodyParams::kSize - kShapeDim);
    x.segment<6>(static_cast<Eigen::Index>(t) * kFrameVars + BodyParams::kSize - kShapeDim) =
        f.object.xi[t].as_vector();
  }
  return x;
}

void unpack_sequence(const Eigen::VectorXd& x, FittedSequence& f) {
  const int T = f.frame_count();
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd p(BodyParams::kSize);
    p << f.beta_star,
        x.segment(static_cast<Eigen::Index>(t) * kFrameVars, BodyParams::kSize - kShapeDim);
    f.frames[t] = BodyParams::unpack(p);
    f.object.xi[t] = RigidTransform::from_vector(
        x.segment<6>(static_cast<Eigen::Index>(t) * kFrameVars + BodyParams::kSize - kShapeDim));
  }
}

}  // namespace

FittedSequence joint_refine(const FittedSequence& init, const SceneData& scene,
                            const RefineOptions& opts) {
  const int T = scene.frame_count();
  if (init.frame_count() != T || init.object.size() != T || init.schedule.size() != T)
    throw DomainError("refinement inputs disagree on the number of frames");
  opts.weights.validate();
  const EnergyWeights& w = opts.weights;
  const BodyModel& model = *scene.body;
  const TriMesh& mesh = scene.object->mesh;

  FittedSequence fit = init;
  for (BodyParams& p : fit.frames) p.beta = fit.beta_star;

  // Per-frame preconditioning: body block then object pose block.
  Eigen::VectorXd frame_scale(kFrameVars);
  frame_scale << body_scales(opts.optim, false).tail(BodyParams::kSize - kShapeDim),
      Eigen::Vector3d::Constant(opts.refine_object ? opts.optim.rotation_scale : 0.0),
      Eigen::Vector3d::Constant(opts.refine_object ? opts.optim.translation_scale : 0.0);
  const Eigen::VectorXd scales = frame_scale.replicate(T, 1);
  const double inv_t = 1.0 / T;
  const bool object_term = opts.refine_object && (w.lambda_segm > 0.0 || w.lambda_depth > 0.0);

  std::vector<DepthMatches> matches;
  for (int outer = 0; outer < opts.optim.outer_iters; ++outer) {
    matches = refresh_matches(scene, fit);
    FittedSequence work = fit;
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      unpack_sequence(x, work);
      std::vector<BodyState> states(T);
      std::vector<double> value(T, 0.0);
      std::vector<BodyCotangent> cts(T);
      std::vector<BodyParams> pgs(T);
      std::vector<Vec6> xgs(T, Vec6::Zero());
      parallel_for(T, scene.threads, [&](int t) {
        const BodyParams& p = work.frames[t];
        const RigidTransform& xi = work.object.xi[t];
        states[t] = pose_body(model, p);
        BodyCotangent* ct = nullptr;
        Vec6* xg = nullptr;
        if (grad) {
          cts[t] = BodyCotangent::zeros(model);
          ct = &cts[t];
          xg = &xgs[t];
        }
        double e = 0.0;
        if (object_term) {
          if (grad) {
            double eo = 0.0;
            xgs[t] += inv_t * e_object_gradient(xi, mesh, scene.object_targets[t], w, opts.fd, &eo);
            e += eo;
          } else {
            e += e_object(xi, mesh, scene.object_targets[t], w);
          }
        }
        // Body energy: gradients are accumulated at scale 1 and rescaled below.
        BodyCotangent body_ct;
        BodyParams body_pg;
        if (grad) body_ct = BodyCotangent::zeros(model);
        e += e_body_frame(scene, p, states[t], matches[t], w, t, grad ? &body_ct : nullptr,
                          grad ? &body_pg : nullptr);
        if (grad) {
          for (std::size_t i = 0; i < body_ct.vertices.size(); ++i)
            ct->vertices[i] += inv_t * body_ct.vertices[i];
          for (std::size_t i = 0; i < body_ct.joints.size(); ++i)
            ct->joints[i] += inv_t * body_ct.joints[i];
          for (std::size_t i = 0; i < body_ct.spheres.size(); ++i)
            ct->spheres[i] += inv_t * body_ct.spheres[i];
          pgs[t] = body_pg * inv_t;
        }
        if (w.lambda_P > 0.0)
          e += w.lambda_P * e_object_penetration(states[t], scene.object_solid, xi, ct,
                                                 opts.refine_object ? xg : nullptr,
                                                 inv_t * w.lambda_P);
        if (work.schedule.q[t] && !scene.contact_body_ids.empty()) {
          const double cw = 1.0 + w.lambda_Q;
          e += cw * e_contact(states[t], scene.contact_body_ids, scene.object_contact, xi, ct,
                              opts.refine_object ? xg : nullptr, inv_t * cw);
        }
        if (w.lambda_G > 0.0) {
          std::vector<Vec3> pg;
          e += w.lambda_G * e_ground(states[t].posed_vertices, scene.ground,
                                     grad ? &pg : nullptr, inv_t * w.lambda_G);
          if (grad)
            for (std::size_t i = 0; i < pg.size(); ++i) ct->vertices[i] += pg[i];
          e += w.lambda_G * e_ground_object(mesh, xi, scene.ground,
                                            opts.refine_object ? xg : nullptr,
                                            inv_t * w.lambda_G);
        }
        value[t] = e;
      });

      double total = 0.0;
      for (int t = 0; t < T; ++t) total += inv_t * value[t];
      std::vector<BodyCotangent> smooth_ct;
      if (T >= 3 && w.lambda_S > 0.0)
        total += w.lambda_S *
                 e_smooth_body(model, states, grad ? &smooth_ct : nullptr, w.lambda_S);
      std::vector<Vec6> accel_g;
      if (T >= 3 && w.lambda_A > 0.0 && opts.refine_object)
        total += w.lambda_A * e_accel_object(work.object.xi, mesh, grad ? &accel_g : nullptr,
                                             w.lambda_A);
      else if (T >= 3 && w.lambda_A > 0.0)
        total += w.lambda_A * e_accel_object(work.object.xi, mesh);

      if (grad) {
        grad->resize(x.size());
        parallel_for(T, scene.threads, [&](int t) {
          if (!smooth_ct.empty())
            for (std::size_t i = 0; i < smooth_ct[t].vertices.size(); ++i)
              cts[t].vertices[i] += smooth_ct[t].vertices[i];
          BodyParams g = pgs[t];
          g += pose_body_vjp(model, work.frames[t], states[t], cts[t]);
          Vec6 xg = xgs[t];
          if (!accel_g.empty()) xg += accel_g[t];
          grad->segment(static_cast<Eigen::Index>(t) * kFrameVars,
                        BodyParams::kSize - kShapeDim) = g.pack().tail(BodyParams::kSize - kShapeDim);
          grad->segment<6>(static_cast<Eigen::Index>(t) * kFrameVars + BodyParams::kSize -
                           kShapeDim) = xg;
        });
      }
      return total;
    };
    const MinimizeResult r = minimize(objective, pack_sequence(fit), opts.optim, scales);
    unpack_sequence(r.x, fit);
  }

  if (matches.empty()) matches = refresh_matches(scene, fit);
  const EnergyBreakdown e = e_total(scene, fit, matches, w);
  fit.frame_energy = e.per_frame;
  fit.diagnostics["e_total"] = e.total();
  fit.diagnostics["e_object"] = e.object;
  fit.diagnostics["e_body"] = e.body;
  fit.diagnostics["e_penetration"] = e.penetration;
  fit.diagnostics["e_contact"] = e.contact + e.contact_gated;
  fit.diagnostics["e_ground"] = e.ground;
  fit.diagnostics["e_smooth"] = e.smooth;
  fit.diagnostics["e_accel"] = e.accel;
  return fit;
}

}  // namespace interfit
