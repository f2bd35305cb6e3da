#pragma once

#include <optional>
#include <string>
#include <vector>

#include "velocal/config.hpp"
#include "velocal/report.hpp"

namespace velocal {

/// IMU file format: header "# velocal-imu v1", CSV rows t,wx,wy,wz,ax,ay,az.
std::vector<ImuMeasurement> read_imu(const std::string& path);
std::vector<ImuMeasurement> read_imu_stream(std::istream& in, const std::string& name);
void write_imu(const std::vector<ImuMeasurement>& imu, const std::string& path);

struct PipelineResult {
    CalibrationReport report;
    // Converged estimator state (splines included), for downstream analysis.
    std::optional<CalibrationState> state;
};

/// Full pipeline: rotation-spline fit, rotation-only visual odometry +
/// hand-eye, per-frame ego-velocities, translation/gravity alignment,
/// velocity-spline fit, then robust batch refinement rounds. Stage failures
/// are rethrown with the stage name prefixed.
PipelineResult calibrate(const std::vector<ImuMeasurement>& imu, const TrackSet& tracks,
                         const CalibConfig& cfg);

}  // namespace velocal
