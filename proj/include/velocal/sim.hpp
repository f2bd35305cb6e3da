#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "velocal/state.hpp"
#include "velocal/tracking.hpp"

namespace velocal::sim {

/// One sinusoidal term amp * sin(2*pi*freq*t + phase).
struct Sinusoid {
    double amp = 0.0;    // m or rad
    double freq = 0.0;   // Hz
    double phase = 0.0;  // rad
};

/// Analytic sum-of-sinusoids trajectory. Position and the body orientation
/// rotation vector are independent per-axis sums, so every derivative the
/// forward models need is available in closed form (no spline involved).
struct TrajectorySpec {
    double duration = 30.0;                 // s
    std::vector<Sinusoid> position[3];      // m, world frame
    std::vector<Sinusoid> rotation[3];      // rad, axis-angle vector theta(t)

    /// Well-excited default: > 30 deg about at least two axes, acceleration
    /// swings of several m/s^2, frequencies low enough that three-point
    /// differentiation of the rendered flow stays accurate.
    static TrajectorySpec standard(double duration = 30.0);

    void validate() const;

    Vec3 position_at(double t) const;
    Vec3 velocity_at(double t) const;
    Vec3 acceleration_at(double t) const;

    Vec3 rotvec_at(double t) const;
    Vec3 rotvec_rate_at(double t) const;

    /// R_wb(t) = Exp(theta(t))
    Rotation3 rotation_at(double t) const;
    /// omega such that Rdot = R * hat(omega): Jr(theta) * thetadot.
    Vec3 angular_velocity_body(double t) const;
};

/// Static landmark field around the trajectory.
struct WorldSpec {
    enum class Shape { Shell, Box };
    Shape shape = Shape::Shell;
    int landmarks = 600;
    double near = 3.0;        // m, shell inner radius / box half-extent scale
    double far = 7.0;         // m
    std::uint64_t seed = 42;

    std::vector<Vec3> generate(const TrajectorySpec& traj) const;
};

/// Ground-truth sensor parameters plus measurement noise settings.
struct SensorRig {
    Rotation3 R_cb;
    Vec3 t_cb = Vec3::Zero();        // m
    double t_off = 0.0;              // s, imu clock = camera clock + t_off
    ImuIntrinsics biases;
    CameraIntrinsics intrinsics;
    double gravity_magnitude = 9.80665;
    Vec3 g_w = Vec3(0.0, 0.0, -9.80665);

    double imu_rate = 200.0;         // Hz
    double frame_rate = 30.0;        // Hz

    bool noisy = false;
    double sigma_gyro = 5e-3;        // rad/s
    double sigma_acc = 5e-2;         // m/s^2
    double sigma_pixel = 1.0;        // px
    double sigma_depth_rel = 0.01;   // relative
    double outlier_fraction = 0.0;   // observations replaced by uniform junk
    std::uint64_t seed = 1;

    double min_depth = 0.2;          // m, rendering visibility gates
    double max_depth = 30.0;

    void validate() const;
};

/// Inertial stream over the trajectory (IMU clock), with biases and, when
/// enabled, per-sample Gaussian noise.
std::vector<ImuMeasurement> sample_imu(const TrajectorySpec& traj, const SensorRig& rig);

/// Depth-annotated feature tracks. Frame k is exposed at IMU time k/frame_rate
/// but timestamped on the camera clock (t - t_off); landmarks keep their track
/// identity while continuously visible.
TrackSet render_tracks(const TrajectorySpec& traj, const WorldSpec& world, const SensorRig& rig);

struct ExcitationMetrics {
    Vec3 rotation_range_deg = Vec3::Zero();  // per-axis span of the rotation vector
    double accel_variation = 0.0;            // max - min of |a_w| samples, m/s^2
    int excited_axes = 0;                    // axes with >= 30 deg span
    bool sufficient = false;                 // >= 2 axes and >= 2 m/s^2
};

/// Observability self-check of a trajectory (sampled at 100 Hz).
ExcitationMetrics compute_excitation(const TrajectorySpec& traj);

/// Writes imu.csv, tracks.csv and a groundtruth.json sidecar with the rig
/// parameters and true poses at the frame times.
void write_dataset(const std::vector<ImuMeasurement>& imu, const TrackSet& tracks,
                   const TrajectorySpec& traj, const SensorRig& rig, const std::string& out_dir);

}  // namespace velocal::sim
