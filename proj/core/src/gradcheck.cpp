#include <algorithm>
#include <functional>

#include "interfit/energy.hpp"
#include "interfit/random.hpp"
#include "interfit/synth.hpp"

namespace interfit {

namespace {

constexpr double kStep = 1e-5;
// Closest-feature distances are only piecewise smooth (medial surfaces of the
// solid), so those terms use a smaller step to keep the stencil on one piece.
constexpr double kDistanceStep = 1e-7;

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step = kStep) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

BodyParams random_params(Rng& rng, double pose_scale) {
  BodyParams p;
  for (int i = 0; i < kShapeDim; ++i) p.beta[i] = rng.normal();
  for (int i = 0; i < kPoseLatentDim; ++i) p.theta_b[i] = rng.normal(0.0, pose_scale);
  for (int i = 0; i < kHandDim; ++i) p.theta_h[i] = rng.normal(0.0, 0.3);
  for (int i = 0; i < kFaceDim; ++i) p.theta_f[i] = rng.normal(0.0, 0.1);
  for (int i = 0; i < kExpressionDim; ++i) p.psi[i] = rng.normal(0.0, 0.1);
  for (int i = 0; i < 3; ++i) p.gamma[i] = rng.uniform(-0.5, 0.5);
  return p;
}

RigidTransform random_pose(Rng& rng, const Vec3& center, double spread) {
  RigidTransform xi;
  for (int i = 0; i < 3; ++i) {
    xi.rotation[i] = rng.normal(0.0, 0.8);
    xi.translation[i] = center[i] + rng.normal(0.0, spread);
  }
  return xi;
}

Eigen::VectorXd pack_with(const BodyParams& p, const RigidTransform& xi) {
  Eigen::VectorXd v(BodyParams::kSize + 6);
  v << p.pack(), xi.as_vector();
  return v;
}

/// Checks a term whose analytic gradient flows through the body state and,
/// optionally, an object pose.
class BodyTermChecker {
 public:
  using Term = std::function<double(const BodyState&, const RigidTransform&, BodyCotangent*,
                                    Vec6*)>;

  explicit BodyTermChecker(const BodyModel& model) : model_(model) {}

  double check(const BodyParams& p, const RigidTransform& xi, const Term& term,
               bool with_pose, double step = kStep) const {
    const BodyState st = pose_body(model_, p);
    BodyCotangent ct = BodyCotangent::zeros(model_);
    Vec6 gx = Vec6::Zero();
    term(st, xi, &ct, with_pose ? &gx : nullptr);
    const BodyParams gp = pose_body_vjp(model_, p, st, ct);
    auto value = [&](const Eigen::VectorXd& v) {
      const BodyParams q = BodyParams::unpack(v.head(BodyParams::kSize));
      const RigidTransform x = with_pose ? RigidTransform::from_vector(v.tail(6)) : xi;
      return term(pose_body(model_, q), x, nullptr, nullptr);
    };
    if (with_pose) {
      Eigen::VectorXd analytic(BodyParams::kSize + 6);
      analytic << gp.pack(), gx;
      return relative_error(analytic, central_difference(value, pack_with(p, xi), step));
    }
    Eigen::VectorXd x(BodyParams::kSize + 6);
    x << p.pack(), xi.as_vector();
    auto body_only = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd full = x;
      full.head(BodyParams::kSize) = v;
      return value(full);
    };
    return relative_error(gp.pack(), central_difference(body_only, p.pack(), step));
  }

 private:
  const BodyModel& model_;
};

}  // namespace

std::vector<GradcheckEntry> gradcheck(const BodyModel& model, const ObjectModel& object,
                                      std::uint64_t seed, int configurations) {
  if (configurations < 1) throw DomainError("gradcheck needs at least one configuration");
  Rng rng(derive_seed(seed, 0x6ead));
  const BodyTermChecker checker(model);
  const std::vector<PinholeCamera> cams = CameraRig{}.cameras();
  const std::vector<double> kw = joint_class_weights(model, 1.0, 0.5, 0.0);

  BodyModel inflated = model;  // larger spheres so the self term is active
  for (ProxySphere& s : inflated.proxy_spheres) s.radius *= 2.5;
  const BodyTermChecker inflated_checker(inflated);

  // Object scaled up so that random placements on the body overlap it.
  ObjectModel big = object;
  for (Vec3& v : big.mesh.vertices) v *= 3.0;
  const SolidIndex solid(big.mesh);
  const MeshIndex contact_surface(big.mesh, big.contact_faces());

  std::vector<std::string> names = {"keypoint",      "depth_body",         "priors",
                                    "joint_limits",  "self_penetration",   "object_penetration",
                                    "contact",       "ground_body",        "ground_object",
                                    "smooth_body",   "accel_object"};
  std::vector<GradcheckEntry> out;
  for (const auto& n : names) out.push_back({n, 0.0, configurations});
  auto record = [&](int k, double err) {
    out[k].max_relative_error = std::max(out[k].max_relative_error, err);
  };

  for (int c = 0; c < configurations; ++c) {
    const BodyParams p = random_params(rng, 1.0);
    const RigidTransform none;

    // Keypoints: detections from another pose with large offsets.
    {
      const BodyState other = pose_body(model, random_params(rng, 1.0));
      std::vector<KeypointDetection> det(cams.size());
      for (std::size_t v = 0; v < cams.size(); ++v) {
        det[v].joints.resize(model.joint_count());
        for (int j = 0; j < model.joint_count(); ++j) {
          const Vec3 cc = cams[v].to_camera(other.posed_joints[j]);
          if (cc.z() <= 0.0) continue;
          det[v].joints[j].position =
              cams[v].project_camera_point(cc) + Vec2(rng.normal(0, 20), rng.normal(0, 20));
          det[v].joints[j].confidence = std::min(1.0, rng.uniform(0.0, 1.5));
        }
      }
      record(0, checker.check(p, none, [&](const BodyState& s, const RigidTransform&,
                                            BodyCotangent* g, Vec6*) {
               return e_keypoint(s, cams, det, kw, 50.0, g);
             }, false));
    }
    // Depth with frozen correspondences.
    {
      const BodyState st = pose_body(model, p);
      BodyParams near = p;
      near += random_params(rng, 0.05) * 0.1;
      const BodyState other = pose_body(model, near);
      std::vector<std::vector<Vec3>> pts(cams.size());
      for (std::size_t v = 0; v < cams.size(); ++v)
        for (std::size_t i = v; i < other.posed_vertices.size(); i += 7)
          pts[v].push_back(other.posed_vertices[i] + Vec3(0.01, -0.004, 0.006));
      const auto vis = body_visibility(model, st, cams);
      const DepthMatches m = match_depth(st, pts, vis);
      record(1, checker.check(p, none, [&](const BodyState& s, const RigidTransform&,
                                            BodyCotangent* g, Vec6*) {
               return e_depth_body(s, m, g);
             }, false));
    }
    // Priors with every weight on and poses far enough out to hit limits.
    {
      EnergyWeights w;
      w.lambda_beta = 0.7;
      w.lambda_theta_b = 0.3;
      w.lambda_theta_h = 0.2;
      w.lambda_theta_f = 0.1;
      w.lambda_E = 0.4;
      w.lambda_alpha = 2.0;
      const BodyParams q = random_params(rng, 6.0);
      BodyParams g;
      e_priors(model, q, w, &g);
      auto f = [&](const Eigen::VectorXd& v) {
        return e_priors(model, BodyParams::unpack(v), w).total();
      };
      record(2, relative_error(g.pack(), central_difference(f, q.pack())));
      BodyParams gl;
      e_joint_limits(model, q, &gl);
      auto fl = [&](const Eigen::VectorXd& v) {
        return e_joint_limits(model, BodyParams::unpack(v));
      };
      record(3, relative_error(gl.pack(), central_difference(fl, q.pack())));
    }
    // Self penetration on the inflated proxies.
    record(4, inflated_checker.check(random_params(rng, 1.5), none,
                                     [&](const BodyState& s, const RigidTransform&,
                                         BodyCotangent* g, Vec6*) {
                                       return e_self_penetration(inflated, s, g);
                                     },
                                     false));
    // Object terms: the object sits on a random body vertex.
    {
      const BodyState st = pose_body(model, p);
      const Vec3 at =
          st.posed_vertices[rng.below(static_cast<std::uint64_t>(model.vertex_count()))];
      const RigidTransform xi = random_pose(rng, at, 0.05);
      record(5, checker.check(p, xi, [&](const BodyState& s, const RigidTransform& x,
                                          BodyCotangent* g, Vec6* gx) {
               return e_object_penetration(s, solid, x, g, gx);
             }, true, kDistanceStep));
      std::vector<int> ids;
      for (int k = 0; k < 30; ++k)
        ids.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(model.vertex_count()))));
      record(6, checker.check(p, xi, [&](const BodyState& s, const RigidTransform& x,
                                          BodyCotangent* g, Vec6* gx) {
               return e_contact(s, ids, contact_surface, x, g, gx);
             }, true, kDistanceStep));
    }
    // Ground planes cutting through the body and the object.
    {
      GroundPlane plane;
      plane.normal = Vec3(rng.normal(0, 0.2), rng.normal(0, 0.2), 1.0).normalized();
      plane.point = Vec3(0.0, 0.0, rng.uniform(0.2, 1.0)) + p.gamma;
      record(7, checker.check(p, none, [&](const BodyState& s, const RigidTransform&,
                                            BodyCotangent* g, Vec6*) {
               std::vector<Vec3> pg;
               const double e = e_ground(s.posed_vertices, plane, g ? &pg : nullptr);
               if (g)
                 for (std::size_t i = 0; i < pg.size(); ++i) g->vertices[i] += pg[i];
               return e;
             }, false));
      GroundPlane low = plane;
      low.point = Vec3::Zero();
      const RigidTransform xi = random_pose(rng, Vec3::Zero(), 0.05);
      Vec6 gx = Vec6::Zero();
      e_ground_object(big.mesh, xi, low, &gx);
      auto f = [&](const Eigen::VectorXd& v) {
        return e_ground_object(big.mesh, RigidTransform::from_vector(v), low);
      };
      record(8, relative_error(gx, central_difference(f, xi.as_vector())));
    }
    // Temporal terms over a short random sequence.
    {
      const int T = 5;
      std::vector<BodyParams> ps;
      std::vector<RigidTransform> xs;
      for (int t = 0; t < T; ++t) {
        ps.push_back(random_params(rng, 0.5));
        xs.push_back(random_pose(rng, Vec3(0, 0, 1), 0.3));
      }
      std::vector<BodyState> states;
      for (const BodyParams& q : ps) states.push_back(pose_body(model, q));
      std::vector<BodyCotangent> cts;
      e_smooth_body(model, states, &cts);
      Eigen::VectorXd analytic(T * BodyParams::kSize), x(T * BodyParams::kSize);
      for (int t = 0; t < T; ++t) {
        analytic.segment(t * BodyParams::kSize, BodyParams::kSize) =
            pose_body_vjp(model, ps[t], states[t], cts[t]).pack();
        x.segment(t * BodyParams::kSize, BodyParams::kSize) = ps[t].pack();
      }
      auto fs = [&](const Eigen::VectorXd& v) {
        std::vector<BodyState> ss;
        for (int t = 0; t < T; ++t)
          ss.push_back(pose_body(
              model, BodyParams::unpack(v.segment(t * BodyParams::kSize, BodyParams::kSize))));
        return e_smooth_body(model, ss);
      };
      record(9, relative_error(analytic, central_difference(fs, x)));

      std::vector<Vec6> gx;
      e_accel_object(xs, big.mesh, &gx);
      Eigen::VectorXd ax(6 * T), xx(6 * T);
      for (int t = 0; t < T; ++t) {
        ax.segment<6>(6 * t) = gx[t];
        xx.segment<6>(6 * t) = xs[t].as_vector();
      }
      auto fa = [&](const Eigen::VectorXd& v) {
        std::vector<RigidTransform> ys;
        for (int t = 0; t < T; ++t) ys.push_back(RigidTransform::from_vector(v.segment<6>(6 * t)));
        return e_accel_object(ys, big.mesh);
      };
      record(10, relative_error(ax, central_difference(fa, xx)));
    }
  }
  return out;
}

}  // namespace interfit
