#pragma once

#include <string>

#include "velocal/sim.hpp"
#include "velocal/state.hpp"
#include "velocal/tracking.hpp"

namespace velocal {

/// Everything the calibration pipeline needs besides the data files. JSON
/// round-trips losslessly; unknown keys are rejected with the key name.
struct CalibConfig {
    double dt_rot = 0.05;            // s, rotation spline knot spacing
    double dt_vel = 0.05;            // s, velocity spline knot spacing
    int spline_order = 4;
    NoiseConfig noise;
    RansacParams ransac;
    double max_time_offset = 0.1;    // s
    double gravity_magnitude = 9.80665;
    int outer_rounds = 2;
    int min_features = 5;            // per-frame minimum for ego-velocity
    double min_depth = 0.2;          // m, track gating
    double max_depth = 10.0;
    std::uint64_t seed = 1;
    CameraIntrinsics intrinsics;

    void validate() const;
};

/// Dataset synthesis settings: rig ground truth plus trajectory/world shape.
struct SimConfig {
    sim::TrajectorySpec trajectory = sim::TrajectorySpec::standard();
    sim::WorldSpec world;
    sim::SensorRig rig;

    void validate() const;
};

CalibConfig read_calib_config(const std::string& path);
void write_calib_config(const CalibConfig& cfg, const std::string& path);
CalibConfig parse_calib_config(const std::string& json_text, const std::string& name);
std::string serialize_calib_config(const CalibConfig& cfg);

SimConfig read_sim_config(const std::string& path);
void write_sim_config(const SimConfig& cfg, const std::string& path);
SimConfig parse_sim_config(const std::string& json_text, const std::string& name);
std::string serialize_sim_config(const SimConfig& cfg);

}  // namespace velocal
