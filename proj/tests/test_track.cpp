#include "mf/track.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mf/errors.hpp"

using namespace mf;

namespace {

TrackMap straight_left_map() {
  std::vector<RoadSegment> segs{RoadSegment::straight(500.0),
                                RoadSegment::left_turn(30.0, M_PI / 2.0)};
  return build_track_map(segs);
}

TrackMap three_segment_map() {
  std::vector<RoadSegment> segs{RoadSegment::straight(500.0),
                                RoadSegment::left_turn(30.0, M_PI / 2.0),
                                RoadSegment::straight(300.0)};
  return build_track_map(segs);
}

}  // namespace

TEST_CASE("build_track_map computes cumulative arc lengths") {
  const TrackMap map = straight_left_map();
  REQUIRE(map.cumulative_s().size() == 3);
  CHECK(map.cumulative_s()[0] == 0.0);
  CHECK(map.cumulative_s()[1] == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(map.cumulative_s()[2] ==
        doctest::Approx(500.0 + 30.0 * M_PI / 2.0).epsilon(1e-12));
  CHECK(map.total_length() == doctest::Approx(547.1239).epsilon(1e-7));

  const std::vector<RoadSegment> one{RoadSegment::straight(100.0)};
  CHECK(build_track_map(one).total_length() == doctest::Approx(100.0));
}

TEST_CASE("build_track_map rejects bad input") {
  CHECK_THROWS_AS(build_track_map({}), EmptyTrack);
  const std::vector<RoadSegment> zero{RoadSegment::straight(0.0)};
  CHECK_THROWS_AS(build_track_map(zero), NonPositiveLength);
  const std::vector<RoadSegment> negative{RoadSegment::straight(-5.0)};
  CHECK_THROWS_AS(build_track_map(negative), NonPositiveLength);
  const std::vector<RoadSegment> bad_turn{RoadSegment::left_turn(0.0, 1.0)};
  CHECK_THROWS_AS(build_track_map(bad_turn), NonPositiveLength);
  const std::vector<RoadSegment> adjacent{
      RoadSegment::left_turn(30.0, M_PI / 2.0),
      RoadSegment::right_turn(30.0, M_PI / 2.0)};
  CHECK_THROWS_AS(build_track_map(adjacent), IllegalAdjacency);
}

TEST_CASE("turn length equals radius times sweep") {
  const RoadSegment turn = RoadSegment::right_turn(42.5, 1.3);
  CHECK(turn.length == doctest::Approx(42.5 * 1.3).epsilon(1e-9));
  CHECK(turn.label() == Manoeuvre::Right);
  CHECK(RoadSegment::straight(10.0).label() == Manoeuvre::Straight);
  CHECK(RoadSegment::left_turn(30.0, 1.0).label() == Manoeuvre::Left);
}

TEST_CASE("label_at picks the containing segment") {
  const TrackMap map = straight_left_map();
  CHECK(label_at(map, 250.0) == Manoeuvre::Straight);
  CHECK(label_at(map, 520.0) == Manoeuvre::Left);
  CHECK(label_at(map, 0.0) == Manoeuvre::Straight);
  // boundary belongs to the segment that starts there
  CHECK(label_at(map, 500.0) == Manoeuvre::Left);
  CHECK_THROWS_AS(label_at(map, 600.0), OutOfTrack);
  CHECK_THROWS_AS(label_at(map, -1.0), OutOfTrack);
  CHECK_THROWS_AS(label_at(map, map.total_length()), OutOfTrack);
}

TEST_CASE("next_transition reports distance and upcoming label") {
  const TrackMap map = three_segment_map();

  auto [d1, m1] = next_transition(map, 250.0);
  CHECK(d1 == doctest::Approx(250.0).epsilon(1e-12));
  REQUIRE(m1.has_value());
  CHECK(*m1 == Manoeuvre::Left);

  auto [d2, m2] = next_transition(map, 510.0);
  CHECK(d2 == doctest::Approx(500.0 + 30.0 * M_PI / 2.0 - 510.0).epsilon(1e-9));
  CHECK(d2 == doctest::Approx(37.1239).epsilon(1e-5));
  REQUIRE(m2.has_value());
  CHECK(*m2 == Manoeuvre::Straight);

  auto [d3, m3] = next_transition(map, 800.0);
  CHECK(d3 == doctest::Approx(map.total_length() - 800.0).epsilon(1e-9));
  CHECK(d3 == doctest::Approx(47.1239).epsilon(1e-5));
  CHECK(!m3.has_value());

  CHECK_THROWS_AS(next_transition(map, -0.5), OutOfTrack);
  CHECK_THROWS_AS(next_transition(map, map.total_length()), OutOfTrack);
}

TEST_CASE("one_hot produces the unit basis vectors") {
  CHECK(one_hot(Manoeuvre::Left) == std::array<double, 3>{1.0, 0.0, 0.0});
  CHECK(one_hot(Manoeuvre::Straight) == std::array<double, 3>{0.0, 1.0, 0.0});
  CHECK(one_hot(Manoeuvre::Right) == std::array<double, 3>{0.0, 0.0, 1.0});
  for (int i = 0; i < kNumManoeuvres; ++i) {
    const auto v = one_hot(manoeuvre_from_index(i));
    double sum = 0.0;
    int argmax = 0;
    for (int j = 0; j < 3; ++j) {
      sum += v[j];
      if (v[j] > v[argmax]) argmax = j;
    }
    CHECK(sum == 1.0);
    CHECK(argmax == i);
  }
  CHECK_THROWS_AS(manoeuvre_from_index(3), InvalidSpec);
  CHECK_THROWS_AS(manoeuvre_from_index(-1), InvalidSpec);
}

TEST_CASE("validate_transitions enforces the manoeuvre state machine") {
  using M = Manoeuvre;
  const std::vector<M> ok{M::Straight, M::Straight, M::Left, M::Left, M::Straight};
  CHECK(validate_transitions(ok));
  const std::vector<M> bad{M::Left, M::Right};
  CHECK(!validate_transitions(bad));
  CHECK(validate_transitions({}));
  const std::vector<M> through_base{M::Left, M::Straight, M::Right};
  CHECK(validate_transitions(through_base));
  const std::vector<M> reversed{M::Right, M::Left};
  CHECK(!validate_transitions(reversed));
  const std::vector<M> single{M::Right};
  CHECK(validate_transitions(single));
}

TEST_CASE("label scan over a fine grid obeys the state machine") {
  const std::vector<RoadSegment> segs{
      RoadSegment::straight(80.0),  RoadSegment::left_turn(25.0, 1.2),
      RoadSegment::straight(60.0),  RoadSegment::right_turn(35.0, 0.9),
      RoadSegment::straight(120.0)};
  const TrackMap map = build_track_map(segs);
  std::vector<Manoeuvre> labels;
  for (double s = 0.0; s < map.total_length(); s += 0.05) {
    labels.push_back(label_at(map, s));
  }
  CHECK(validate_transitions(labels));
  // all three labels actually appear
  CHECK(std::count(labels.begin(), labels.end(), Manoeuvre::Left) > 0);
  CHECK(std::count(labels.begin(), labels.end(), Manoeuvre::Right) > 0);
  CHECK(std::count(labels.begin(), labels.end(), Manoeuvre::Straight) > 0);
}

TEST_CASE("pose_at follows straights and arcs") {
  const TrackMap map = three_segment_map();

  const TrackPose start = map.pose_at(0.0);
  CHECK(start.x == 0.0);
  CHECK(start.y == 0.0);
  CHECK(start.heading == 0.0);

  const TrackPose mid = map.pose_at(250.0);
  CHECK(mid.x == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(mid.y == doctest::Approx(0.0));
  CHECK(mid.heading == doctest::Approx(0.0));

  // quarter-circle left turn of radius 30 starting at (500, 0) heading +x:
  // exit at (530, 30) heading pi/2
  const TrackPose exit = map.pose_at(500.0 + 30.0 * M_PI / 2.0);
  CHECK(exit.x == doctest::Approx(530.0).epsilon(1e-9));
  CHECK(exit.y == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(exit.heading == doctest::Approx(M_PI / 2.0).epsilon(1e-12));

  // halfway through the arc: heading pi/4
  const TrackPose half = map.pose_at(500.0 + 30.0 * M_PI / 4.0);
  CHECK(half.heading == doctest::Approx(M_PI / 4.0).epsilon(1e-12));
  CHECK(half.x == doctest::Approx(500.0 + 30.0 * std::sin(M_PI / 4.0)).epsilon(1e-9));
  CHECK(half.y == doctest::Approx(30.0 - 30.0 * std::cos(M_PI / 4.0)).epsilon(1e-9));

  // pose is continuous across the boundary
  const TrackPose before = map.pose_at(500.0 - 1e-9);
  const TrackPose at = map.pose_at(500.0);
  CHECK(before.x == doctest::Approx(at.x).epsilon(1e-9));
  CHECK(before.y == doctest::Approx(at.y).epsilon(1e-9));
}

TEST_CASE("curvature sign convention: left positive") {
  const TrackMap map = three_segment_map();
  CHECK(map.curvature_at(250.0) == 0.0);
  CHECK(map.curvature_at(520.0) == doctest::Approx(1.0 / 30.0));
  const std::vector<RoadSegment> segs{RoadSegment::straight(10.0),
                                      RoadSegment::right_turn(20.0, 1.0)};
  const TrackMap right = build_track_map(segs);
  CHECK(right.curvature_at(15.0) == doctest::Approx(-1.0 / 20.0));
}

TEST_CASE("right turn geometry bends clockwise") {
  const std::vector<RoadSegment> segs{RoadSegment::straight(100.0),
                                      RoadSegment::right_turn(30.0, M_PI / 2.0)};
  const TrackMap map = build_track_map(segs);
  const TrackPose exit = map.pose_at(map.total_length() - 1e-12);
  CHECK(exit.x == doctest::Approx(130.0).epsilon(1e-6));
  CHECK(exit.y == doctest::Approx(-30.0).epsilon(1e-6));
  CHECK(exit.heading == doctest::Approx(-M_PI / 2.0).epsilon(1e-6));
}
