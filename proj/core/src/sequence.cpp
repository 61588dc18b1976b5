#include "interfit/sequence.hpp"

#include <algorithm>

namespace interfit {

void ObjectModel::validate() const {
  mesh.validate();
  if (!mesh.watertight) throw DomainError("object mesh must be watertight");
  for (int id : contact_vertex_ids)
    if (id < 0 || id >= static_cast<int>(mesh.vertices.size()))
      throw DomainError("object contact id out of range");
}

std::vector<int> ObjectModel::contact_faces() const {
  return faces_within(mesh, contact_vertex_ids);
}

int ContactSchedule::active_count() const {
  return static_cast<int>(std::count(q.begin(), q.end(), std::uint8_t{1}));
}

void ContactSchedule::validate() const {
  for (std::uint8_t v : q)
    if (v > 1) throw DomainError("contact schedule entries must be 0 or 1");
}

void KeypointDetection::validate() const {
  for (const Keypoint& k : joints)
    if (!(k.confidence >= 0.0 && k.confidence <= 1.0))
      throw DomainError("keypoint confidence outside [0, 1]");
}

void SequenceObservation::validate() const {
  if (cameras.empty()) throw DomainError("sequence has no cameras");
  for (const PinholeCamera& c : cameras) c.validate();
  for (const FrameObservation& f : frames) {
    if (f.views.size() != cameras.size())
      throw DomainError("frame view count does not match the camera rig");
    for (std::size_t v = 0; v < f.views.size(); ++v) {
      const ViewObservation& obs = f.views[v];
      const PinholeCamera& cam = cameras[v];
      for (const Silhouette& s : obs.candidates)
        if (s.width != cam.width || s.height != cam.height)
          throw DomainError("candidate mask dimensions do not match the camera");
      if (!obs.depth.values.empty() &&
          (obs.depth.width != cam.width || obs.depth.height != cam.height))
        throw DomainError("depth image dimensions do not match the camera");
      obs.keypoints.validate();
      obs.cloud.validate();
    }
  }
}

std::vector<Vec3> SequenceObservation::body_points(int frame, int view) const {
  return frames.at(frame).views.at(view).cloud.with_label(SegmentLabel::body);
}

void FittedSequence::validate() const {
  if (!beta_star.allFinite()) throw DomainError("beta_star is not finite");
  if (object.size() != frame_count())
    throw DomainError("object trajectory length differs from the body sequence");
  if (!object.coasting.empty() && static_cast<int>(object.coasting.size()) != frame_count())
    throw DomainError("coasting flags length differs from the sequence");
  if (!schedule.q.empty() && schedule.size() != frame_count())
    throw DomainError("contact schedule length differs from the sequence");
  schedule.validate();
}

BodyParams FittedSequence::frame_params(int t) const {
  BodyParams p = frames.at(t);
  p.beta = beta_star;
  return p;
}

}  // namespace interfit
