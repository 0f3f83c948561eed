#include "mf/track.hpp"

#include <algorithm>
#include <cmath>

#include "mf/errors.hpp"

namespace mf {

Manoeuvre manoeuvre_from_index(int idx) {
  if (idx < 0 || idx >= kNumManoeuvres) {
    throw InvalidSpec("manoeuvre index out of range: " + std::to_string(idx));
  }
  return static_cast<Manoeuvre>(idx);
}

const char* to_string(Manoeuvre m) {
  switch (m) {
    case Manoeuvre::Left: return "left";
    case Manoeuvre::Straight: return "straight";
    case Manoeuvre::Right: return "right";
  }
  return "?";
}

RoadSegment RoadSegment::straight(double length) {
  return RoadSegment{SegmentKind::Straight, length, 0.0, 0.0};
}

RoadSegment RoadSegment::left_turn(double radius, double angle) {
  return RoadSegment{SegmentKind::LeftTurn, radius * std::abs(angle), radius,
                     std::abs(angle)};
}

RoadSegment RoadSegment::right_turn(double radius, double angle) {
  return RoadSegment{SegmentKind::RightTurn, radius * std::abs(angle), radius,
                     std::abs(angle)};
}

Manoeuvre RoadSegment::label() const {
  switch (kind) {
    case SegmentKind::LeftTurn: return Manoeuvre::Left;
    case SegmentKind::RightTurn: return Manoeuvre::Right;
    case SegmentKind::Straight: break;
  }
  return Manoeuvre::Straight;
}

namespace {

bool illegal_pair(SegmentKind a, SegmentKind b) {
  return (a == SegmentKind::LeftTurn && b == SegmentKind::RightTurn) ||
         (a == SegmentKind::RightTurn && b == SegmentKind::LeftTurn);
}

}  // namespace

TrackMap build_track_map(std::span<const RoadSegment> segments) {
  if (segments.empty()) throw EmptyTrack();

  TrackMap map;
  map.segments_.assign(segments.begin(), segments.end());
  map.cumulative_s_.resize(segments.size() + 1);
  map.entry_poses_.resize(segments.size());
  map.cumulative_s_[0] = 0.0;

  TrackPose pose{};
  for (std::size_t i = 0; i < map.segments_.size(); ++i) {
    const RoadSegment& seg = map.segments_[i];
    if (!(seg.length > 0.0)) throw NonPositiveLength();
    if (seg.kind != SegmentKind::Straight && !(seg.radius > 0.0)) {
      throw NonPositiveLength("turn radius must be positive");
    }
    if (i > 0 && illegal_pair(map.segments_[i - 1].kind, seg.kind)) {
      throw IllegalAdjacency();
    }
    map.cumulative_s_[i + 1] = map.cumulative_s_[i] + seg.length;
    map.entry_poses_[i] = pose;

    // advance pose to the segment end
    if (seg.kind == SegmentKind::Straight) {
      pose.x += seg.length * std::cos(pose.heading);
      pose.y += seg.length * std::sin(pose.heading);
    } else {
      const double sign = seg.kind == SegmentKind::LeftTurn ? 1.0 : -1.0;
      const double dpsi = sign * seg.angle;
      // circular arc: centre sits at radius to the side of the heading
      const double cx = pose.x - sign * seg.radius * std::sin(pose.heading);
      const double cy = pose.y + sign * seg.radius * std::cos(pose.heading);
      const double h1 = pose.heading + dpsi;
      pose.x = cx + sign * seg.radius * std::sin(h1);
      pose.y = cy - sign * seg.radius * std::cos(h1);
      pose.heading = h1;
    }
  }
  return map;
}

std::size_t TrackMap::segment_index_at(double s) const {
  if (s < 0.0 || s >= total_length()) throw OutOfTrack();
  // first boundary strictly greater than s; s exactly on a boundary belongs
  // to the segment starting there
  auto it = std::upper_bound(cumulative_s_.begin(), cumulative_s_.end(), s);
  return static_cast<std::size_t>(it - cumulative_s_.begin()) - 1;
}

double TrackMap::curvature_at(double s) const {
  const RoadSegment& seg = segments_[segment_index_at(s)];
  switch (seg.kind) {
    case SegmentKind::LeftTurn: return 1.0 / seg.radius;
    case SegmentKind::RightTurn: return -1.0 / seg.radius;
    case SegmentKind::Straight: break;
  }
  return 0.0;
}

TrackPose TrackMap::pose_at(double s) const {
  const std::size_t i = segment_index_at(s);
  const RoadSegment& seg = segments_[i];
  const double ds = s - cumulative_s_[i];
  TrackPose pose = entry_poses_[i];
  if (seg.kind == SegmentKind::Straight) {
    pose.x += ds * std::cos(pose.heading);
    pose.y += ds * std::sin(pose.heading);
    return pose;
  }
  const double sign = seg.kind == SegmentKind::LeftTurn ? 1.0 : -1.0;
  const double dpsi = sign * ds / seg.radius;
  const double cx = pose.x - sign * seg.radius * std::sin(pose.heading);
  const double cy = pose.y + sign * seg.radius * std::cos(pose.heading);
  const double h1 = pose.heading + dpsi;
  return TrackPose{cx + sign * seg.radius * std::sin(h1),
                   cy - sign * seg.radius * std::cos(h1), h1};
}

Manoeuvre label_at(const TrackMap& map, double s) {
  return map.segments()[map.segment_index_at(s)].label();
}

std::pair<double, std::optional<Manoeuvre>> next_transition(const TrackMap& map,
                                                            double s) {
  const std::size_t i = map.segment_index_at(s);
  const double boundary = map.cumulative_s()[i + 1];
  if (i + 1 == map.segments().size()) {
    return {boundary - s, std::nullopt};
  }
  return {boundary - s, map.segments()[i + 1].label()};
}

std::array<double, 3> one_hot(Manoeuvre label) {
  std::array<double, 3> v{0.0, 0.0, 0.0};
  v[static_cast<std::size_t>(index_of(label))] = 1.0;
  return v;
}

bool validate_transitions(std::span<const Manoeuvre> labels) {
  for (std::size_t k = 1; k < labels.size(); ++k) {
    const Manoeuvre a = labels[k - 1];
    const Manoeuvre b = labels[k];
    if (a == b) continue;
    if (a != Manoeuvre::Straight && b != Manoeuvre::Straight) return false;
  }
  return true;
}

}  // namespace mf
