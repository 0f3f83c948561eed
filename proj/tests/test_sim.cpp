#include "mf/sim.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mf/errors.hpp"
#include "mf/rng.hpp"
#include "mf/track.hpp"

using namespace mf;

namespace {

TrackMap simple_course() {
  const std::vector<RoadSegment> segs{RoadSegment::straight(300.0),
                                      RoadSegment::left_turn(30.0, 1.2),
                                      RoadSegment::straight(300.0)};
  return build_track_map(segs);
}

double stddev(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / xs.size());
}

}  // namespace

TEST_CASE("step_vehicle integrates the kinematic bicycle") {
  VehicleState s;
  s.v = 10.0;

  SUBCASE("straight motion") {
    const VehicleState n = step_vehicle(s, 0.0, 0.0, 0.033, 2.5);
    CHECK(n.x == doctest::Approx(0.33).epsilon(1e-12));
    CHECK(n.y == 0.0);
    CHECK(n.heading == 0.0);
    CHECK(n.v == 10.0);
    CHECK(n.s == doctest::Approx(0.33).epsilon(1e-12));
  }
  SUBCASE("yaw rate follows the update law") {
    const double dt = 0.01;
    const VehicleState n = step_vehicle(s, 0.1, 0.0, dt, 2.5);
    const double yaw_rate = (n.heading - s.heading) / dt;
    CHECK(yaw_rate == doctest::Approx((10.0 / 2.5) * std::tan(0.1)).epsilon(1e-12));
    CHECK(yaw_rate == doctest::Approx(0.40134).epsilon(1e-4));
  }
  SUBCASE("stationary vehicle stays put") {
    VehicleState z;
    const VehicleState n = step_vehicle(z, 0.3, 0.0, 0.033, 2.5);
    CHECK(n.x == 0.0);
    CHECK(n.y == 0.0);
    CHECK(n.heading == 0.0);
    CHECK(n.v == 0.0);
    CHECK(n.s == 0.0);
  }
  SUBCASE("speed saturates at zero") {
    VehicleState slow;
    slow.v = 0.1;
    const VehicleState n = step_vehicle(slow, 0.0, -50.0, 0.1, 2.5);
    CHECK(n.v == 0.0);
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(step_vehicle(s, 0.0, 0.0, 0.0, 2.5), InvalidSpec);
    CHECK_THROWS_AS(step_vehicle(s, 0.0, 0.0, 0.033, 0.0), InvalidSpec);
  }
}

TEST_CASE("zero commands conserve speed and heading") {
  VehicleState s;
  s.v = 13.7;
  s.heading = 0.4;
  for (int i = 0; i < 1000; ++i) s = step_vehicle(s, 0.0, 0.0, 1.0 / 30.0, 2.5);
  CHECK(s.v == 13.7);
  CHECK(s.heading == 0.4);
}

TEST_CASE("arm_pose geometry") {
  const DriverProfile p = default_profile(0, 1);

  SUBCASE("mirror symmetry at steering zero") {
    const SkeletonFrame f = arm_pose(p, 0.0);
    CHECK(f.left_shoulder.x() == doctest::Approx(-f.right_shoulder.x()).epsilon(1e-12));
    CHECK(f.left_elbow.x() == doctest::Approx(-f.right_elbow.x()).epsilon(1e-9));
    CHECK(f.left_elbow.y() == doctest::Approx(f.right_elbow.y()).epsilon(1e-9));
    CHECK(f.left_elbow.z() == doctest::Approx(f.right_elbow.z()).epsilon(1e-9));
    CHECK((f.left_shoulder - f.right_shoulder).norm() ==
          doctest::Approx(p.shoulder_width).epsilon(1e-12));
  }
  SUBCASE("opposite wheel angles mirror the arms") {
    const double theta = 1.1;
    const SkeletonFrame plus = arm_pose(p, theta);
    const SkeletonFrame minus = arm_pose(p, -theta);
    CHECK(plus.left_elbow.x() == doctest::Approx(-minus.right_elbow.x()).epsilon(1e-9));
    CHECK(plus.left_elbow.y() == doctest::Approx(minus.right_elbow.y()).epsilon(1e-9));
    CHECK(plus.left_elbow.z() == doctest::Approx(minus.right_elbow.z()).epsilon(1e-9));
  }
  SUBCASE("link lengths are preserved") {
    for (double theta : {-2.0, -0.7, 0.0, 0.9, 2.2}) {
      const SkeletonFrame f = arm_pose(p, theta);
      CHECK((f.right_elbow - f.right_shoulder).norm() ==
            doctest::Approx(p.upper_arm).epsilon(1e-9));
      CHECK((f.left_elbow - f.left_shoulder).norm() ==
            doctest::Approx(p.upper_arm).epsilon(1e-9));
      // forearm length from elbow to the grip the solver aimed at
      const auto grip = [&](double phi) {
        return Eigen::Vector3d(kWheelRadius * std::cos(phi),
                               kWheelCentreY + kWheelRadius * std::sin(phi),
                               kWheelCentreZ);
      };
      CHECK((grip(theta) - f.right_elbow).norm() ==
            doctest::Approx(p.forearm).epsilon(1e-9));
      CHECK((grip(theta + M_PI) - f.left_elbow).norm() ==
            doctest::Approx(p.forearm).epsilon(1e-9));
    }
  }
  SUBCASE("elbows point outward") {
    const SkeletonFrame f = arm_pose(p, 0.0);
    CHECK(f.right_elbow.x() > f.right_shoulder.x() - 1e-12);
    CHECK(f.left_elbow.x() < f.left_shoulder.x() + 1e-12);
  }
  SUBCASE("unreachable grip throws") {
    DriverProfile far = p;
    far.seat_distance = 1.2;
    CHECK_THROWS_AS(arm_pose(far, 0.0), Unreachable);
  }
}

TEST_CASE("profile validation") {
  CHECK_NOTHROW(validate_profile(default_profile(0, 1)));

  DriverProfile p = default_profile(0, 1);
  p.upper_arm = -0.1;
  CHECK_THROWS_AS(validate_profile(p), InvalidSpec);

  p = default_profile(0, 1);
  p.noise_joint_z = 0.001;  // below noise_joint_xy
  CHECK_THROWS_AS(validate_profile(p), InvalidSpec);

  p = default_profile(0, 1);
  p.seat_distance = 1.2;
  CHECK_THROWS_AS(validate_profile(p), Unreachable);
}

TEST_CASE("sampled profiles are deterministic and valid") {
  Rng a(42), b(42);
  const DriverProfile pa = sample_profile(3, 99, a);
  const DriverProfile pb = sample_profile(3, 99, b);
  CHECK(pa.upper_arm == pb.upper_arm);
  CHECK(pa.seat_distance == pb.seat_distance);
  CHECK(pa.lookahead_gain == pb.lookahead_gain);
  CHECK(pa.subject_id == 3);
  CHECK(pa.seed == 99);

  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    CHECK_NOTHROW(sample_profile(i, 1000 + i, rng));
  }
}

TEST_CASE("generate_track is deterministic and well formed") {
  const TrackGenSpec spec;
  const TrackMap a = generate_track(spec, 7);
  const TrackMap b = generate_track(spec, 7);
  REQUIRE(a.segments().size() == b.segments().size());
  for (std::size_t i = 0; i < a.segments().size(); ++i) {
    CHECK(a.segments()[i].kind == b.segments()[i].kind);
    CHECK(a.segments()[i].length == b.segments()[i].length);
  }

  TrackGenSpec five;
  five.n_turns = 5;
  CHECK(generate_track(five, 3).segments().size() == 11);

  std::vector<Manoeuvre> labels;
  for (double s = 0.0; s < a.total_length(); s += 0.5) {
    labels.push_back(label_at(a, s));
  }
  CHECK(validate_transitions(labels));

  TrackGenSpec bad;
  bad.straight_min = 50.0;
  bad.straight_max = 10.0;
  CHECK_THROWS_AS(generate_track(bad, 1), InvalidSpec);
}

TEST_CASE("simulate_session produces a uniform, labelled, deterministic log") {
  const TrackMap map = simple_course();
  const DriverProfile p = default_profile(0, 1234);
  const double dt = 1.0 / 30.0;
  const Session session = simulate_session(map, p, 60.0, dt);

  CHECK(session.rows.size() <= 1800);
  CHECK(session.rows.size() > 0);
  for (std::size_t k = 0; k < session.rows.size(); ++k) {
    CHECK(session.rows[k].t == static_cast<double>(k) * dt);
  }

  std::vector<Manoeuvre> labels;
  labels.reserve(session.rows.size());
  for (const auto& row : session.rows) labels.push_back(row.label);
  CHECK(validate_transitions(labels));
  for (const auto& row : session.rows) {
    CHECK(row.label == label_at(map, row.state.s));
    CHECK(row.gas >= 0.0);
    CHECK(row.gas <= 1.0);
  }

  const Session again = simulate_session(map, p, 60.0, dt);
  REQUIRE(again.rows.size() == session.rows.size());
  for (std::size_t k = 0; k < session.rows.size(); ++k) {
    CHECK(again.rows[k].state.x == session.rows[k].state.x);
    CHECK(again.rows[k].state.v == session.rows[k].state.v);
    CHECK(again.rows[k].steering_wheel == session.rows[k].steering_wheel);
    CHECK(again.rows[k].skeleton.right_elbow == session.rows[k].skeleton.right_elbow);
  }

  CHECK_THROWS_AS(simulate_session(map, p, -1.0, dt), InvalidSpec);
  CHECK_THROWS_AS(simulate_session(map, p, 60.0, 0.0), InvalidSpec);
}

TEST_CASE("skeletal noise stream never disturbs the trajectory") {
  const TrackMap map = simple_course();
  DriverProfile noisy = default_profile(0, 77);
  DriverProfile clean = noisy;
  clean.noise_joint_xy = 0.0;
  clean.noise_joint_z = 0.0;
  clean.outlier_rate = 0.0;

  const Session a = simulate_session(map, noisy, 40.0, 1.0 / 30.0);
  const Session b = simulate_session(map, clean, 40.0, 1.0 / 30.0);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].state.x == b.rows[k].state.x);
    CHECK(a.rows[k].state.y == b.rows[k].state.y);
    CHECK(a.rows[k].state.v == b.rows[k].state.v);
    CHECK(a.rows[k].steering_wheel == b.rows[k].steering_wheel);
    CHECK(a.rows[k].label == b.rows[k].label);
  }
  // clean run reproduces the ideal pose exactly
  const SkeletonFrame ideal = arm_pose(clean, b.rows[10].steering_wheel);
  CHECK(b.rows[10].skeleton.right_elbow == ideal.right_elbow);
}

TEST_CASE("injected depth noise dominates lateral noise") {
  const TrackMap map = simple_course();
  const DriverProfile noisy = default_profile(0, 5150);
  DriverProfile clean = noisy;
  clean.noise_joint_xy = 0.0;
  clean.noise_joint_z = 0.0;
  clean.outlier_rate = 0.0;
  const Session a = simulate_session(map, noisy, 60.0, 1.0 / 30.0);
  const Session b = simulate_session(map, clean, 60.0, 1.0 / 30.0);
  REQUIRE(a.rows.size() == b.rows.size());
  std::vector<double> dx, dz;
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    dx.push_back(a.rows[k].skeleton.right_elbow.x() -
                 b.rows[k].skeleton.right_elbow.x());
    dz.push_back(a.rows[k].skeleton.right_elbow.z() -
                 b.rows[k].skeleton.right_elbow.z());
  }
  CHECK(stddev(dz) > stddev(dx));
}

TEST_CASE("driver holds the lane on a long straight") {
  const std::vector<RoadSegment> segs{RoadSegment::straight(600.0)};
  const TrackMap map = build_track_map(segs);
  const DriverProfile p = default_profile(0, 31);
  const Session session = simulate_session(map, p, 40.0, 1.0 / 30.0);
  REQUIRE(session.rows.size() > 600);
  // skip the initial transient, stay clear of the end-of-track clamp
  for (std::size_t k = 150; k < session.rows.size() - 150; ++k) {
    CHECK(std::abs(session.rows[k].steering_wheel) <
          3.0 * kSteerNoiseStd * kSteeringRatio);
    CHECK(std::abs(session.rows[k].state.y) < 0.2);
  }
}

TEST_CASE("steering anticipates an upcoming turn") {
  const TrackMap map = simple_course();  // left turn after 300 m straight
  const DriverProfile p = default_profile(0, 9001);
  const Session session = simulate_session(map, p, 120.0, 1.0 / 30.0);

  std::size_t first_left = session.rows.size();
  for (std::size_t k = 0; k < session.rows.size(); ++k) {
    if (session.rows[k].label == Manoeuvre::Left) {
      first_left = k;
      break;
    }
  }
  REQUIRE(first_left < session.rows.size());
  REQUIRE(first_left > 30);

  // straight-segment steering spread, measured far from the turn
  std::vector<double> straight_steer;
  for (std::size_t k = 100; k + 200 < first_left; ++k) {
    straight_steer.push_back(session.rows[k].steering_wheel);
  }
  REQUIRE(straight_steer.size() > 100);
  const double sigma = stddev(straight_steer);

  // the wheel is already committed to the left at least 30 samples early
  int lead = 0;
  for (std::size_t k = first_left; k-- > 0;) {
    if (session.rows[k].steering_wheel > 3.0 * sigma) {
      ++lead;
    } else {
      break;
    }
  }
  CHECK(lead >= 30);
}

TEST_CASE("lct_mdev measures mean absolute deviation") {
  const std::vector<double> a{0.0, 0.5, 1.0};
  CHECK(lct_mdev(a, a) == 0.0);
  const std::vector<double> offset{0.5, 1.0, 1.5};
  CHECK(lct_mdev(offset, a) == doctest::Approx(0.5));
  const std::vector<double> shorter{0.0};
  CHECK_THROWS_AS(lct_mdev(a, shorter), LengthMismatch);
  CHECK_THROWS_AS(lct_mdev({}, {}), EmptyInput);
}

TEST_CASE("lane-change conditioning run stays within the deviation bound") {
  const DriverProfile p = default_profile(0, 2024);
  const LctResult r = run_lct(p, 1.0 / 30.0);
  REQUIRE(r.driver_lateral.size() == r.normative_lateral.size());
  REQUIRE(r.driver_lateral.size() > 1000);
  CHECK(r.mdev < 0.7);
  CHECK(r.mdev >= 0.0);
}
