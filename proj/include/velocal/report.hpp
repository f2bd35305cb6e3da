#pragma once

#include <string>
#include <vector>

#include "velocal/batch.hpp"
#include "velocal/state.hpp"

namespace velocal {

/// Parameter estimates as of the end of one pipeline stage, for convergence
/// tracing. Quantities a stage has not yet produced carry the previous
/// stage's value (or the initial zero state).
struct StageSnapshot {
    std::string stage;
    Rotation3 R_cb;
    Vec3 t_cb = Vec3::Zero();
    double t_off = 0.0;
    Vec3 g_w = Vec3::Zero();
    Vec3 gyro_bias = Vec3::Zero();
    Vec3 accel_bias = Vec3::Zero();
    double wall_time_s = 0.0;
};

/// Final calibration result. Units follow the reporting convention:
/// rotations in degrees, translations in centimeters, time offsets in
/// milliseconds (raw SI values are kept alongside).
struct CalibrationReport {
    Rotation3 R_cb;
    Vec3 t_cb = Vec3::Zero();      // m
    double t_off = 0.0;            // s
    Vec3 g_w = Vec3::Zero();       // m/s^2
    Vec3 gyro_bias = Vec3::Zero();
    Vec3 accel_bias = Vec3::Zero();

    ResidualFamilyStats gyro, accel, flow;
    std::vector<StageSnapshot> stages;
    std::vector<std::pair<double, Vec2>> flow_residuals;   // (t, r) at convergence
    long active_flow_blocks = 0;
    long rejected_flow_blocks = 0;
    int batch_iterations = 0;
    std::string termination;

    double init_time_s = 0.0;
    double batch_time_s = 0.0;
    double total_time_s = 0.0;
};

/// Intrinsic Z-Y-X (yaw, pitch, roll) factorization of R = Rz(yaw) Ry(pitch)
/// Rx(roll), returned in degrees.
Vec3 zyx_euler_deg(const Rotation3& R);

/// Deterministic JSON: fixed 9-significant-digit float formatting, so the
/// same inputs produce byte-identical files.
void write_report_json(const CalibrationReport& report, const std::string& path);
std::string serialize_report_json(const CalibrationReport& report);

/// CSV `t,ru,rv` of the converged flow residuals.
void write_flow_residuals_csv(const CalibrationReport& report, const std::string& path);

/// CSV `stage,parameter,value` of the per-stage snapshots.
void write_convergence_csv(const CalibrationReport& report, const std::string& path);

}  // namespace velocal
