#ifndef MF_SIM_HPP
#define MF_SIM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mf/rng.hpp"
#include "mf/track.hpp"

namespace mf {

// Fixed vehicle and cockpit constants. Only label-relevant motion matters
// here, so a kinematic bicycle with a single steering ratio stands in for a
// full dynamics model.
inline constexpr double kWheelbase = 2.5;        // m
inline constexpr double kSteeringRatio = 15.0;   // wheel angle / road wheel
inline constexpr double kMaxRoadWheel = 0.15;    // rad, lock stop
inline constexpr double kMaxAccel = 2.5;         // m/s^2
inline constexpr double kDefaultDt = 1.0 / 30.0; // 30 Hz sampling
inline constexpr double kSteerNoiseStd = 0.0005;  // rad, road-wheel command tremor
inline constexpr double kAccelNoiseStd = 0.05;   // m/s^2

// Sensor frame: X lateral (driver's right positive), Y up, Z depth away
// from the sensor toward the driver. Right-handed.
inline constexpr double kWheelRadius = 0.19;   // grip circle radius, m
inline constexpr double kWheelCentreY = 0.05;  // m, sensor frame
inline constexpr double kWheelCentreZ = 0.60;  // m, sensor frame
inline constexpr double kSeatBaseY = -0.33;    // m, chest height minus torso

// Per-subject physical and behavioural parameters. Everything a session
// depends on lives here, so a Session is a pure function of
// (map, profile, duration, dt).
struct DriverProfile {
  int subject_id = 0;
  double upper_arm = 0.30;       // m, shoulder to elbow
  double forearm = 0.27;         // m, elbow to grip
  double torso = 0.43;           // m, seat base to spine-shoulder
  double shoulder_width = 0.40;  // m
  double seat_distance = 0.40;   // m, chest to wheel centre along depth
  double lookahead_gain = 0.8;   // s, lookahead = gain * speed + base
  double lookahead_base = 5.0;   // m
  double steering_lag = 0.15;    // s, first-order steering response
  double target_speed_straight = 12.5;  // m/s
  double target_speed_turn = 7.5;       // m/s
  double noise_joint_xy = 0.005;  // m std, lateral/vertical joint jitter
  double noise_joint_z = 0.02;    // m std, depth jitter (dominant axis)
  double outlier_rate = 0.005;    // probability per frame of a joint spike
  std::uint64_t seed = 0;
};

// Throws on invalid lengths, noise ordering, or grips unreachable anywhere
// inside the steering lock range.
void validate_profile(const DriverProfile& profile);

// Baseline profile for a subject, all behavioural defaults.
DriverProfile default_profile(int subject_id, std::uint64_t seed);

// Profile with per-subject variation of geometry and driving style drawn
// from rng (deterministic in the rng state).
DriverProfile sample_profile(int subject_id, std::uint64_t seed, Rng& rng);

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // rad
  double v = 0.0;        // m/s, never negative
  double s = 0.0;        // arc length along track, m
};

// Explicit-Euler kinematic bicycle step; all derivatives evaluated at the
// incoming state. Speed saturates at zero.
VehicleState step_vehicle(const VehicleState& state, double road_wheel_angle,
                          double accel_cmd, double dt, double wheelbase);

// Upper-body joint positions in the sensor frame.
struct SkeletonFrame {
  Eigen::Vector3d spine_shoulder;
  Eigen::Vector3d left_shoulder;
  Eigen::Vector3d right_shoulder;
  Eigen::Vector3d left_elbow;
  Eigen::Vector3d right_elbow;
};

// Noise-free pose of the upper body for a given steering wheel angle.
// Hands grip the rim at +-90 degrees from the wheel top and rotate with the
// wheel; elbows come from two-link inverse kinematics, picking the solution
// with the larger outward lateral offset. Throws Unreachable when a grip
// lies beyond upper_arm + forearm.
SkeletonFrame arm_pose(const DriverProfile& profile, double steering_wheel);

struct DriverCommand {
  double road_wheel_angle = 0.0;  // rad, after lag, noise and lock stop
  double steering_wheel = 0.0;    // rad, road wheel * steering ratio
  double accel = 0.0;             // m/s^2, signed
  double gas = 0.0;               // [0,1], positive part of accel command
};

// Pure-pursuit driver with a first-order steering lag. The lookahead point
// sits lookahead_gain * v + lookahead_base ahead along the centreline, so
// both steering and the speed target change before a segment boundary is
// reached; that anticipation is what makes future manoeuvres predictable.
class DriverController {
 public:
  DriverController(const DriverProfile& profile, const TrackMap& map,
                   std::uint64_t noise_seed, double dt);

  // Throws OutOfTrack when state.s lies outside the map.
  DriverCommand control(const VehicleState& state);

 private:
  const DriverProfile& profile_;
  const TrackMap& map_;
  Rng rng_;
  double dt_;
  double lagged_road_wheel_ = 0.0;
};

struct SessionRow {
  double t = 0.0;
  VehicleState state;
  double steering_wheel = 0.0;
  double gas = 0.0;
  SkeletonFrame skeleton;
  Manoeuvre label = Manoeuvre::Straight;
};

// One recorded drive on a uniform time grid.
struct Session {
  DriverProfile profile;
  double dt = kDefaultDt;
  std::vector<SessionRow> rows;
};

// Drives the profile over the map until duration runs out or the track
// ends. Deterministic in profile.seed; actuation and skeletal noise use
// independent streams so a zero-noise profile reproduces the exact same
// trajectory.
Session simulate_session(const TrackMap& map, const DriverProfile& profile,
                         double duration, double dt = kDefaultDt);

struct TrackGenSpec {
  int n_turns = 12;
  double straight_min = 120.0, straight_max = 300.0;  // m
  double radius_min = 20.0, radius_max = 45.0;        // m
  double angle_min = 0.6, angle_max = 1.6;            // rad
};

// Random alternating straight/turn track, straights first and last, turn
// directions uniform. Deterministic in seed. Throws InvalidSpec.
TrackMap generate_track(const TrackGenSpec& spec, std::uint64_t seed);

// Mean absolute deviation between a driven lateral trace and the normative
// one. Throws LengthMismatch or EmptyInput.
double lct_mdev(const std::vector<double>& lateral_positions,
                const std::vector<double>& normative);

// Lane-change-task conditioning run: successive signed lane changes on a
// straight course, cruise 60 km/h, each change becoming visible 40 m ahead
// of its sign. The normative profile ramps linearly over that 40 m.
struct LctResult {
  std::vector<double> driver_lateral;
  std::vector<double> normative_lateral;
  double mdev = 0.0;
};

LctResult run_lct(const DriverProfile& profile, double dt = kDefaultDt);

}  // namespace mf

#endif  // MF_SIM_HPP
