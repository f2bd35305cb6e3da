#pragma once

#include "velocal/sensors.hpp"
#include "velocal/spline.hpp"

namespace velocal {

/// Per-sample measurement noise levels and robust-loss thresholds.
struct NoiseConfig {
    double sigma_gyro = 5e-3;        // rad/s per sample
    double sigma_acc = 5e-2;         // m/s^2 per sample
    double sigma_pixel_vel = 40.0;   // px/s
    double sigma_depth_rel = 0.01;   // relative

    // Huber thresholds; zero means 3 sigma of the corresponding family.
    double huber_gyro = 0.0;
    double huber_acc = 0.0;
    double huber_flow = 0.0;

    double gyro_huber() const { return huber_gyro > 0.0 ? huber_gyro : 3.0 * sigma_gyro; }
    double acc_huber() const { return huber_acc > 0.0 ? huber_acc : 3.0 * sigma_acc; }
    double flow_huber() const { return huber_flow > 0.0 ? huber_flow : 3.0 * sigma_pixel_vel; }

    void validate() const {
        if (sigma_gyro <= 0.0 || sigma_acc <= 0.0 || sigma_pixel_vel <= 0.0 ||
            sigma_depth_rel <= 0.0)
            throw ValidationError("noise sigmas must be positive");
    }
};

/// The full estimator state: extrinsics, time offset, gravity, both splines,
/// and the inertial biases. t_off satisfies tau_b = tau_c + t_off.
struct CalibrationState {
    Rotation3 R_cb;                // camera -> body
    Vec3 t_cb = Vec3::Zero();      // m
    double t_off = 0.0;            // s
    Vec3 g_w;                      // m/s^2, |g_w| == gravity_magnitude
    So3Spline rot_spline;
    R3Spline vel_spline;
    ImuIntrinsics imu;
    double gravity_magnitude = 9.80665;

    CalibrationState(So3Spline rot, R3Spline vel, double g_mag = 9.80665)
        : g_w(0.0, 0.0, -g_mag),
          rot_spline(std::move(rot)),
          vel_spline(std::move(vel)),
          gravity_magnitude(g_mag) {}

    /// Rescales g_w to the configured magnitude.
    void project_gravity() { g_w = gravity_magnitude * g_w.normalized(); }
};

/// Camera-frame kinematics derived from the state at camera-clock time tau:
/// angular velocity w_c = R_cb^T w_b and the rigid-body velocity transfer
/// v_c = R_cb^T (R_wb^T v_w + hat(w_b) t_cb), both at shifted time s = tau + t_off.
struct CameraKinematics {
    Vec3 v_c;
    Vec3 w_c;
};

inline CameraKinematics camera_kinematics(const CalibrationState& x, double tau_camera) {
    const double s = tau_camera + x.t_off;
    const So3SplineEval e = x.rot_spline.eval_full(s, false);
    const Vec3 v_w = x.vel_spline.eval(s);
    const Mat3 Rcb = x.R_cb.matrix();
    CameraKinematics k;
    k.w_c = Rcb.transpose() * e.omega_body;
    k.v_c = Rcb.transpose() * (e.R.matrix().transpose() * v_w + e.omega_body.cross(x.t_cb));
    return k;
}

}  // namespace velocal
