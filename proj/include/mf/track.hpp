#ifndef MF_TRACK_HPP
#define MF_TRACK_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mf {

// Manoeuvre indices are fixed project-wide: one-hot columns, confusion
// matrices and softmax outputs all share this ordering.
enum class Manoeuvre : int { Left = 0, Straight = 1, Right = 2 };

inline constexpr int kNumManoeuvres = 3;

constexpr int index_of(Manoeuvre m) { return static_cast<int>(m); }
Manoeuvre manoeuvre_from_index(int idx);
const char* to_string(Manoeuvre m);

enum class SegmentKind { Straight, LeftTurn, RightTurn };

// A single road section. Straights carry only a length; turns are circular
// arcs described by radius and the unsigned sweep angle, the direction being
// implied by the kind. Left turns increase heading (counter-clockwise in a
// right-handed ground frame).
struct RoadSegment {
  SegmentKind kind = SegmentKind::Straight;
  double length = 0.0;  // metres; for turns this is radius * |angle|
  double radius = 0.0;  // metres, turns only
  double angle = 0.0;   // radians, unsigned sweep, turns only

  static RoadSegment straight(double length);
  static RoadSegment left_turn(double radius, double angle);
  static RoadSegment right_turn(double radius, double angle);

  Manoeuvre label() const;
};

// Pose of the track centreline at a given arc length.
struct TrackPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, 0 along +x
};

// Ordered road segments with cumulative arc lengths. Immutable once built;
// all queries are pure.
class TrackMap {
 public:
  const std::vector<RoadSegment>& segments() const { return segments_; }
  const std::vector<double>& cumulative_s() const { return cumulative_s_; }
  double total_length() const { return cumulative_s_.back(); }

  // Index of the segment containing arc length s. A boundary value belongs
  // to the segment that starts there.
  std::size_t segment_index_at(double s) const;

  // signed curvature (1/m) of the segment containing s; left turns positive
  double curvature_at(double s) const;

  TrackPose pose_at(double s) const;

 private:
  friend TrackMap build_track_map(std::span<const RoadSegment> segments);

  std::vector<RoadSegment> segments_;
  std::vector<double> cumulative_s_;
  std::vector<TrackPose> entry_poses_;  // pose at each segment start
};

// Validates segment data and precomputes cumulative arc lengths plus entry
// poses. Throws EmptyTrack, NonPositiveLength or IllegalAdjacency (a left
// turn may never touch a right turn; turns branch only from straights).
TrackMap build_track_map(std::span<const RoadSegment> segments);

// Label of the segment containing s. Throws OutOfTrack for s < 0 or
// s >= total length.
Manoeuvre label_at(const TrackMap& map, double s);

// Distance to the next segment boundary and the label that follows it;
// the label is empty when s lies in the final segment (distance then runs
// to the end of the track).
std::pair<double, std::optional<Manoeuvre>> next_transition(const TrackMap& map,
                                                            double s);

std::array<double, 3> one_hot(Manoeuvre label);

// True iff every label change passes through Straight. Self-transitions are
// always legal; the empty sequence is valid.
bool validate_transitions(std::span<const Manoeuvre> labels);

}  // namespace mf

#endif  // MF_TRACK_HPP
