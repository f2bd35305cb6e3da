#pragma once

#include <optional>
#include <vector>

#include "velocal/state.hpp"
#include "velocal/tracking.hpp"

namespace velocal {

/// Camera-frame ego-velocity recovered from one frame's optical flow.
struct EgoVelocity {
    double t = 0.0;            // s, camera clock
    Vec3 v_c = Vec3::Zero();   // m/s, camera frame
    int features = 0;
    double residual_rms = 0.0; // px/s, after the reweighted pass
};

struct RotationFitConfig {
    int order = 4;
    double pad = 0.1;          // s, domain padding for time-offset-shifted queries
    double sigma_gyro = 5e-3;
    int max_iterations = 50;
    double gradient_tol = 1e-8;
    double min_span = 2.0;     // s
};

/// Fits the rotation B-spline to raw gyroscope samples (biases held at zero).
/// The first control point is fixed to identity to anchor the world frame.
So3Spline fit_rotation_spline(const std::vector<ImuMeasurement>& gyro, double knot_spacing,
                              const RotationFitConfig& cfg);

struct HandEyeConfig {
    double max_time_offset = 0.1;   // s
    double grid_step = 1e-3;        // s
    int max_iterations = 50;
    int min_pairs = 10;
    double min_total_rotation_deg = 15.0;
    double min_axis_eigenvalue = 0.02;  // rad, second-largest axis-covariance eigenvalue
};

struct HandEyeResult {
    Rotation3 R_cb;
    double t_off = 0.0;
    double grid_t_off = 0.0;   // best coarse grid cell, for diagnostics
    double rms = 0.0;          // rad
    int pairs_used = 0;
};

/// Rotation-only hand-eye alignment against the fitted rotation spline:
/// coarse 1 ms grid over the time offset with a closed-form quaternion solve
/// per cell, then joint Gauss-Newton refinement of (R_cb, t_off).
HandEyeResult hand_eye_rotation(const std::vector<RelativeRotation>& rel_rots,
                                const So3Spline& rot_spline, const HandEyeConfig& cfg);

struct EgoVelocityConfig {
    int min_features = 5;
    double sigma_pixel_vel = 40.0;
    double max_condition = 1e8;
};

/// Closed-form weighted linear LS for the camera ego-velocity of one frame,
/// with one reweighted pass dropping rows beyond 3 sigma. Returns nullopt when
/// fewer than min_features usable features exist.
std::optional<EgoVelocity> estimate_ego_velocity(const std::vector<FlowFeature>& features,
                                                 const Vec3& w_c, const CameraIntrinsics& intr,
                                                 const EgoVelocityConfig& cfg);

struct AlignResult {
    Vec3 t_cb = Vec3::Zero();
    Vec3 g_w = Vec3::Zero();
    double condition = 0.0;             // of the unregularized 6x6 normal matrix
    bool translation_observable = true; // condition <= 1e10
    int pairs_used = 0;
};

struct AlignConfig {
    double gravity_magnitude = 9.80665;
    double max_pair_gap = 0.2;      // s, consecutive ego-velocity pairs only
    double max_condition = 1e10;
};

/// Linear LS in (t_cb, g_w) aligning accelerometer-integrated velocity
/// deltas with ego-velocity-derived body velocities; g_w is solved as a free
/// vector and then projected to the configured magnitude.
AlignResult align_translation_gravity(const std::vector<EgoVelocity>& ego_velocities,
                                      const std::vector<ImuMeasurement>& imu,
                                      const So3Spline& rot_spline, const Rotation3& R_cb,
                                      double t_off, const AlignConfig& cfg);

struct VelocityFitConfig {
    int order = 4;
    double pad = 0.1;
    double tikhonov = 1e-8;
};

/// Linear LS over velocity control points from the ego-velocity sequence
/// (evaluation is linear in the control points). The spline domain matches
/// the rotation spline so that batch accelerometer queries stay in domain.
R3Spline fit_velocity_spline(const std::vector<EgoVelocity>& ego_velocities,
                             const So3Spline& rot_spline, const Rotation3& R_cb, const Vec3& t_cb,
                             double t_off, double knot_spacing, const VelocityFitConfig& cfg);

/// Accelerometer specific-force integral rotated into the world frame over
/// [a, b] (IMU clock), trapezoidal over the raw samples with linearly
/// interpolated endpoints.
Vec3 integrate_rotated_accel(const std::vector<ImuMeasurement>& imu, const So3Spline& rot_spline,
                             double a, double b);

}  // namespace velocal
