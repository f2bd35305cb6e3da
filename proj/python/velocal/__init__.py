"""RGBD-inertial spatiotemporal calibration.

Continuous-time B-spline estimation of camera-IMU extrinsic rotation and
translation, clock time offset, gravity and inertial biases from raw
gyroscope/accelerometer streams plus depth-annotated feature tracks, with a
measurement simulator for ground-truth round trips.
"""

import json as _json

from ._velocal import (
    DegenerateGeometryError,
    IoError,
    ObservabilityError,
    SolverError,
    ValidationError,
    default_calib_config,
    default_sim_config,
    excitation,
    exp_so3,
    log_so3,
    simulate,
    zyx_euler_deg,
)
from ._velocal import calibrate as _calibrate_raw

__all__ = [
    "DegenerateGeometryError",
    "IoError",
    "ObservabilityError",
    "SolverError",
    "ValidationError",
    "calibrate",
    "default_calib_config",
    "default_sim_config",
    "excitation",
    "exp_so3",
    "log_so3",
    "simulate",
    "zyx_euler_deg",
]


def calibrate(imu_path, tracks_path, config_json=""):
    """Run the calibration pipeline; returns the report as a dict."""
    return _json.loads(_calibrate_raw(str(imu_path), str(tracks_path), config_json))
