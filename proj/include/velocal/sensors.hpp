#pragma once

#include <array>
#include <vector>

#include "velocal/errors.hpp"
#include "velocal/so3.hpp"

namespace velocal {

using Vec2 = Eigen::Vector2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole camera, no distortion; inputs are assumed pre-undistorted.
struct CameraIntrinsics {
    double fx = 500.0, fy = 500.0;
    double cx = 320.0, cy = 240.0;
    int width = 640, height = 480;

    void validate() const {
        if (fx <= 0.0 || fy <= 0.0) throw ValidationError("focal lengths must be positive");
        if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
            throw ValidationError("principal point outside image");
    }
};

/// Additive inertial biases (no scale or misalignment).
struct ImuIntrinsics {
    Vec3 accel_bias = Vec3::Zero();   // m/s^2
    Vec3 gyro_bias = Vec3::Zero();    // rad/s
};

struct ImuMeasurement {
    double t = 0.0;   // s, IMU clock
    Vec3 gyro = Vec3::Zero();    // rad/s
    Vec3 accel = Vec3::Zero();   // m/s^2 (specific force)
};

struct FeatureObservation {
    double t = 0.0;   // s, camera clock
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;   // m
};

struct PixelVelocity {
    double t = 0.0;
    Vec2 vel = Vec2::Zero();   // px/s
};

/// First-order optical-flow interaction matrices:
/// pixel velocity = (1/z) * A * v_c + B * w_c.
struct InteractionMatrices {
    Mat23 A;
    Mat23 B;
};

Vec2 project(const Vec3& point_camera, const CameraIntrinsics& intr);
Vec3 back_project(const Vec2& pixel, double depth, const CameraIntrinsics& intr);

InteractionMatrices interaction_matrices(const Vec2& pixel, const CameraIntrinsics& intr);

/// Pixel velocity induced by camera motion (v_c, w_c in the camera frame)
/// for a static landmark at the given pixel/depth.
PixelVelocity optical_flow(const Vec2& pixel, double depth, const Vec3& v_c, const Vec3& w_c,
                           const CameraIntrinsics& intr, double t = 0.0);

/// Three-point first-order Lagrange differentiation evaluated at the middle
/// observation. Timestamps need not be uniform, only strictly increasing.
PixelVelocity pixel_velocity_lagrange(const std::array<FeatureObservation, 3>& window);

/// Noiseless additive-bias IMU forward model.
inline std::pair<Vec3, Vec3> imu_measure(const Vec3& accel_ideal, const Vec3& gyro_ideal,
                                         const ImuIntrinsics& intr) {
    return {accel_ideal + intr.accel_bias, gyro_ideal + intr.gyro_bias};
}

}  // namespace velocal
