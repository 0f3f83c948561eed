#include "mf/sim.hpp"

#include <algorithm>
#include <cmath>

#include "mf/errors.hpp"

namespace mf {

namespace {

constexpr double kSpeedKp = 1.2;   // 1/s, speed loop gain
constexpr double kMinChord = 2.0;  // m, pursuit chord floor

constexpr double kLctLength = 1800.0;      // m
constexpr double kLctSignSpacing = 150.0;  // m
constexpr double kLctVisibility = 40.0;    // m before the sign
constexpr double kLctSpeed = 60.0 / 3.6;   // m/s
constexpr double kLctLaneOffset = 3.5;     // m

double wrap_pi(double angle) { return std::remainder(angle, 2.0 * M_PI); }

double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

double target_speed_for(const DriverProfile& profile, SegmentKind kind) {
  return kind == SegmentKind::Straight ? profile.target_speed_straight
                                       : profile.target_speed_turn;
}

// Largest grip distance in the wheel plane over the steering lock range,
// measured from the right shoulder (the left side is its mirror image).
// The depth gap contributes seat_distance independently, so the reachable
// seat distance has the closed form sqrt(reach^2 - max_planar^2).
double max_planar_grip_sq(double shoulder_width, double torso) {
  const double sx = 0.5 * shoulder_width;
  const double sy = (kSeatBaseY + torso) - kWheelCentreY;
  const double lock = kMaxRoadWheel * kSteeringRatio;
  double worst = 0.0;
  for (double phi = -lock; phi <= lock + 1e-9; phi += 0.005) {
    const double dx = kWheelRadius * std::cos(phi) - sx;
    const double dy = kWheelRadius * std::sin(phi) - sy;
    worst = std::max(worst, dx * dx + dy * dy);
  }
  return worst;
}

// Two-link inverse kinematics from shoulder to grip; the elbow solution is
// pushed along `outward` (unit, lateral). Throws Unreachable.
Eigen::Vector3d solve_elbow(const Eigen::Vector3d& shoulder,
                            const Eigen::Vector3d& grip, double upper,
                            double fore, const Eigen::Vector3d& outward) {
  const Eigen::Vector3d delta = grip - shoulder;
  const double d = delta.norm();
  if (d > upper + fore) throw Unreachable("grip beyond arm length");
  if (d < std::abs(upper - fore)) throw Unreachable("grip inside arm fold");
  const Eigen::Vector3d u = delta / d;
  const double p = (upper * upper + d * d - fore * fore) / (2.0 * d);
  const double r2 = upper * upper - p * p;
  const double r = r2 > 0.0 ? std::sqrt(r2) : 0.0;
  Eigen::Vector3d n = outward - outward.dot(u) * u;
  if (n.norm() < 1e-9) {
    // outward parallel to the arm axis; drop the elbow instead
    n = Eigen::Vector3d(0.0, -1.0, 0.0) -
        Eigen::Vector3d(0.0, -1.0, 0.0).dot(u) * u;
  }
  n.normalize();
  return shoulder + p * u + r * n;
}

void inject_joint_noise(SkeletonFrame& f, const DriverProfile& profile,
                        Rng& rng) {
  Eigen::Vector3d* joints[5] = {&f.spine_shoulder, &f.left_shoulder,
                                &f.right_shoulder, &f.left_elbow,
                                &f.right_elbow};
  for (auto* j : joints) {
    (*j)(0) += profile.noise_joint_xy * rng.normal();
    (*j)(1) += profile.noise_joint_xy * rng.normal();
    (*j)(2) += profile.noise_joint_z * rng.normal();
  }
  // occasional spike: one joint displaced 3..10 sigma_z along a random axis
  if (rng.uniform() < profile.outlier_rate) {
    auto& joint = *joints[rng.uniform_int(5)];
    const int axis = static_cast<int>(rng.uniform_int(3));
    const double mag =
        rng.uniform(3.0 * profile.noise_joint_z, 10.0 * profile.noise_joint_z);
    joint(axis) += rng.uniform() < 0.5 ? -mag : mag;
  }
}

}  // namespace

void validate_profile(const DriverProfile& profile) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw InvalidSpec(std::string("profile field must be positive: ") + what);
  };
  positive(profile.upper_arm, "upper_arm");
  positive(profile.forearm, "forearm");
  positive(profile.torso, "torso");
  positive(profile.shoulder_width, "shoulder_width");
  positive(profile.seat_distance, "seat_distance");
  positive(profile.target_speed_straight, "target_speed_straight");
  positive(profile.target_speed_turn, "target_speed_turn");
  positive(profile.steering_lag, "steering_lag");
  if (profile.noise_joint_xy < 0.0 || profile.noise_joint_z < 0.0 ||
      profile.outlier_rate < 0.0 || profile.outlier_rate > 1.0) {
    throw InvalidSpec("noise parameters out of range");
  }
  if (profile.noise_joint_z < profile.noise_joint_xy) {
    throw InvalidSpec("noise_joint_z must dominate noise_joint_xy");
  }
  // grips must stay reachable over the whole steering lock range
  const double lock = kMaxRoadWheel * kSteeringRatio;
  for (double w = -lock; w <= lock + 1e-9; w += 0.05) {
    arm_pose(profile, w);  // throws Unreachable
  }
}

DriverProfile default_profile(int subject_id, std::uint64_t seed) {
  DriverProfile p;
  p.subject_id = subject_id;
  p.seed = seed;
  return p;
}

DriverProfile sample_profile(int subject_id, std::uint64_t seed, Rng& rng) {
  DriverProfile p;
  p.subject_id = subject_id;
  p.seed = seed;
  p.upper_arm = clamp(rng.normal(0.30, 0.02), 0.26, 0.34);
  p.forearm = clamp(rng.normal(0.27, 0.02), 0.23, 0.31);
  p.torso = clamp(rng.normal(0.43, 0.038), 0.36, 0.50);
  p.shoulder_width = clamp(rng.normal(0.40, 0.03), 0.34, 0.46);
  // drivers with shorter arms sit closer to the wheel; the cap keeps the
  // grips reachable over the whole lock range with a 3% reach margin
  const double reach = 0.97 * (p.upper_arm + p.forearm);
  const double planar = max_planar_grip_sq(p.shoulder_width, p.torso);
  const double seat_cap = std::sqrt(std::max(reach * reach - planar, 0.04));
  p.seat_distance = std::min(
      clamp(0.70 * (p.upper_arm + p.forearm) + rng.normal(0.0, 0.015), 0.30,
            0.48),
      seat_cap);
  p.lookahead_gain = clamp(rng.normal(0.8, 0.06), 0.65, 0.95);
  p.lookahead_base = clamp(rng.normal(5.0, 0.5), 3.5, 6.5);
  p.steering_lag = clamp(rng.normal(0.15, 0.03), 0.08, 0.25);
  p.target_speed_straight = clamp(rng.normal(12.5, 1.0), 10.5, 15.0);
  p.target_speed_turn = clamp(rng.normal(7.5, 0.6), 6.0, 9.5);
  validate_profile(p);
  return p;
}

VehicleState step_vehicle(const VehicleState& state, double road_wheel_angle,
                          double accel_cmd, double dt, double wheelbase) {
  if (!(dt > 0.0)) throw InvalidSpec("dt must be positive");
  if (!(wheelbase > 0.0)) throw InvalidSpec("wheelbase must be positive");
  VehicleState next;
  next.x = state.x + state.v * std::cos(state.heading) * dt;
  next.y = state.y + state.v * std::sin(state.heading) * dt;
  next.heading =
      state.heading + state.v / wheelbase * std::tan(road_wheel_angle) * dt;
  next.v = std::max(0.0, state.v + accel_cmd * dt);
  next.s = state.s + state.v * dt;
  return next;
}

SkeletonFrame arm_pose(const DriverProfile& profile, double steering_wheel) {
  SkeletonFrame f;
  const double chest_y = kSeatBaseY + profile.torso;
  const double chest_z = kWheelCentreZ + profile.seat_distance;
  f.spine_shoulder = {0.0, chest_y, chest_z};
  const double half = 0.5 * profile.shoulder_width;
  f.left_shoulder = {-half, chest_y, chest_z};
  f.right_shoulder = {half, chest_y, chest_z};

  // grips at +-90 degrees from the wheel top, turning with the wheel;
  // positive wheel angle rotates rim points counter-clockwise in the
  // sensor's X-Y plane
  auto grip_at = [&](double phi) {
    return Eigen::Vector3d(kWheelRadius * std::cos(phi),
                           kWheelCentreY + kWheelRadius * std::sin(phi),
                           kWheelCentreZ);
  };
  const Eigen::Vector3d right_grip = grip_at(steering_wheel);
  const Eigen::Vector3d left_grip = grip_at(steering_wheel + M_PI);

  f.right_elbow = solve_elbow(f.right_shoulder, right_grip, profile.upper_arm,
                              profile.forearm, Eigen::Vector3d(1, 0, 0));
  f.left_elbow = solve_elbow(f.left_shoulder, left_grip, profile.upper_arm,
                             profile.forearm, Eigen::Vector3d(-1, 0, 0));
  return f;
}

DriverController::DriverController(const DriverProfile& profile,
                                   const TrackMap& map,
                                   std::uint64_t noise_seed, double dt)
    : profile_(profile), map_(map), rng_(noise_seed), dt_(dt) {}

DriverCommand DriverController::control(const VehicleState& state) {
  const double total = map_.total_length();
  if (state.s < 0.0 || state.s >= total) throw OutOfTrack();

  const double lookahead =
      profile_.lookahead_gain * state.v + profile_.lookahead_base;
  const double s_look = std::min(state.s + lookahead, total - 1e-9);
  const TrackPose target = map_.pose_at(s_look);

  const double dx = target.x - state.x;
  const double dy = target.y - state.y;
  const double chord = std::max(std::hypot(dx, dy), kMinChord);
  const double alpha = wrap_pi(std::atan2(dy, dx) - state.heading);
  const double raw = clamp(std::atan2(2.0 * kWheelbase * std::sin(alpha), chord),
                           -kMaxRoadWheel, kMaxRoadWheel);

  // command tremor enters before the first-order actuator lag, so the
  // applied angle is a smoothed version of the noisy command
  const double blend = 1.0 - std::exp(-dt_ / profile_.steering_lag);
  lagged_road_wheel_ +=
      blend * (raw + kSteerNoiseStd * rng_.normal() - lagged_road_wheel_);
  const double applied = clamp(lagged_road_wheel_, -kMaxRoadWheel, kMaxRoadWheel);

  const SegmentKind ahead = map_.segments()[map_.segment_index_at(s_look)].kind;
  const double v_target = target_speed_for(profile_, ahead);
  double accel = clamp(kSpeedKp * (v_target - state.v), -kMaxAccel, kMaxAccel);
  accel = clamp(accel + kAccelNoiseStd * rng_.normal(), -kMaxAccel, kMaxAccel);

  DriverCommand cmd;
  cmd.road_wheel_angle = applied;
  cmd.steering_wheel = applied * kSteeringRatio;
  cmd.accel = accel;
  cmd.gas = clamp(accel / kMaxAccel, 0.0, 1.0);
  return cmd;
}

Session simulate_session(const TrackMap& map, const DriverProfile& profile,
                         double duration, double dt) {
  if (!(duration > 0.0) || !(dt > 0.0)) {
    throw InvalidSpec("duration and dt must be positive");
  }
  // independent streams: a zero-noise profile must reproduce the same
  // trajectory, so skeletal noise never touches the actuation stream
  Rng master(profile.seed);
  const std::uint64_t act_seed = master.fork_seed();
  const std::uint64_t joint_seed = master.fork_seed();

  DriverController controller(profile, map, act_seed, dt);
  Rng joint_rng(joint_seed);

  Session session;
  session.profile = profile;
  session.dt = dt;

  VehicleState state;
  const TrackPose start = map.pose_at(0.0);
  state.x = start.x;
  state.y = start.y;
  state.heading = start.heading;
  state.v = target_speed_for(profile, map.segments().front().kind);
  state.s = 0.0;

  const auto n_steps = static_cast<std::size_t>(duration / dt + 1e-9);
  session.rows.reserve(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    if (state.s >= map.total_length()) break;
    const DriverCommand cmd = controller.control(state);
    SkeletonFrame skel = arm_pose(profile, cmd.steering_wheel);
    inject_joint_noise(skel, profile, joint_rng);

    SessionRow row;
    row.t = static_cast<double>(k) * dt;
    row.state = state;
    row.steering_wheel = cmd.steering_wheel;
    row.gas = cmd.gas;
    row.skeleton = skel;
    row.label = label_at(map, state.s);
    session.rows.push_back(std::move(row));

    state = step_vehicle(state, cmd.road_wheel_angle, cmd.accel, dt, kWheelbase);
  }
  return session;
}

TrackMap generate_track(const TrackGenSpec& spec, std::uint64_t seed) {
  if (spec.n_turns < 0) throw InvalidSpec("n_turns must be non-negative");
  auto check_range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0) || !(hi >= lo)) {
      throw InvalidSpec(std::string("bad range: ") + what);
    }
  };
  check_range(spec.straight_min, spec.straight_max, "straight");
  check_range(spec.radius_min, spec.radius_max, "radius");
  check_range(spec.angle_min, spec.angle_max, "angle");

  Rng rng(seed);
  std::vector<RoadSegment> segments;
  segments.reserve(2 * static_cast<std::size_t>(spec.n_turns) + 1);
  segments.push_back(
      RoadSegment::straight(rng.uniform(spec.straight_min, spec.straight_max)));
  for (int i = 0; i < spec.n_turns; ++i) {
    const double radius = rng.uniform(spec.radius_min, spec.radius_max);
    const double angle = rng.uniform(spec.angle_min, spec.angle_max);
    segments.push_back(rng.uniform_int(2) == 0
                           ? RoadSegment::left_turn(radius, angle)
                           : RoadSegment::right_turn(radius, angle));
    segments.push_back(RoadSegment::straight(
        rng.uniform(spec.straight_min, spec.straight_max)));
  }
  return build_track_map(segments);
}

double lct_mdev(const std::vector<double>& lateral_positions,
                const std::vector<double>& normative) {
  if (lateral_positions.size() != normative.size()) throw LengthMismatch();
  if (lateral_positions.empty()) throw EmptyInput();
  double sum = 0.0;
  for (std::size_t i = 0; i < lateral_positions.size(); ++i) {
    sum += std::abs(lateral_positions[i] - normative[i]);
  }
  return sum / static_cast<double>(lateral_positions.size());
}

namespace {

// normative lane position: linear ramp over the 40 m of sign visibility,
// lanes alternating every 150 m
double lct_reference(double x) {
  if (x < kLctSignSpacing - kLctVisibility) return 0.0;
  const auto sign_index = static_cast<int>(
      std::floor((x + kLctVisibility) / kLctSignSpacing));  // 1-based
  const double sign_x = sign_index * kLctSignSpacing;
  const double before = (sign_index % 2 == 1) ? 0.0 : kLctLaneOffset;
  const double after = kLctLaneOffset - before;
  if (x >= sign_x) return after;
  return before + (after - before) * (x - (sign_x - kLctVisibility)) / kLctVisibility;
}

}  // namespace

LctResult run_lct(const DriverProfile& profile, double dt) {
  Rng rng(profile.seed ^ 0x4C43545F6D646576ULL);
  VehicleState state;
  state.v = kLctSpeed;

  LctResult result;
  double lagged = 0.0;
  const double blend = 1.0 - std::exp(-dt / profile.steering_lag);
  const std::size_t max_steps =
      static_cast<std::size_t>(2.0 * kLctLength / (kLctSpeed * dt));
  for (std::size_t k = 0; k < max_steps && state.x < kLctLength; ++k) {
    const double lookahead =
        profile.lookahead_gain * state.v + profile.lookahead_base;
    const double tx = state.x + lookahead;
    const double ty = lct_reference(tx);
    const double chord = std::max(std::hypot(tx - state.x, ty - state.y), kMinChord);
    const double alpha = wrap_pi(std::atan2(ty - state.y, tx - state.x) - state.heading);
    const double raw = clamp(std::atan2(2.0 * kWheelbase * std::sin(alpha), chord),
                             -kMaxRoadWheel, kMaxRoadWheel);
    lagged += blend * (raw + kSteerNoiseStd * rng.normal() - lagged);
    const double applied = clamp(lagged, -kMaxRoadWheel, kMaxRoadWheel);
    double accel = clamp(kSpeedKp * (kLctSpeed - state.v), -kMaxAccel, kMaxAccel);
    accel = clamp(accel + kAccelNoiseStd * rng.normal(), -kMaxAccel, kMaxAccel);

    result.driver_lateral.push_back(state.y);
    result.normative_lateral.push_back(lct_reference(state.x));
    state = step_vehicle(state, applied, accel, dt, kWheelbase);
  }
  result.mdev = lct_mdev(result.driver_lateral, result.normative_lateral);
  return result;
}

}  // namespace mf
