#!/usr/bin/env python3
"""Smoke test of the python bindings: simulate, calibrate, sanity-check."""

import json
import math
import pathlib
import sys
import tempfile

import numpy as np

import velocal


def main():
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="velocal_py_"))

    # basic math bindings
    phi = np.array([0.3, -0.2, 0.5])
    R = velocal.exp_so3(phi)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.allclose(velocal.log_so3(R), phi, atol=1e-12)
    ypr = velocal.zyx_euler_deg(np.eye(3))
    assert np.allclose(ypr, 0.0)

    # configs are valid JSON that parse back in
    sim_cfg = json.loads(velocal.default_sim_config())
    assert sim_cfg["rig"]["imu_rate"] == 200.0
    calib_cfg = json.loads(velocal.default_calib_config())
    assert calib_cfg["spline_order"] == 4

    # simulate a short noiseless dataset with a known rig
    sim_cfg["trajectory"] = {"duration": 10.0}
    sim_cfg["world"]["landmarks"] = 400
    sim_cfg["rig"]["r_cb_rotvec"] = [0.3, -0.2, 0.5]
    sim_cfg["rig"]["t_cb"] = [0.10, -0.05, 0.02]
    sim_cfg["rig"]["t_off"] = 0.005
    info = velocal.simulate(json.dumps(sim_cfg), str(tmp))
    assert info["imu_samples"] == 2000, info
    assert info["excitation"]["sufficient"], info

    ex = velocal.excitation(json.dumps(sim_cfg))
    assert ex["sufficient"]

    # invalid config raises ValueError with the key named
    try:
        velocal.simulate('{"rig": {"bogus_key": 1}}', str(tmp))
    except ValueError as exc:
        assert "bogus_key" in str(exc)
    else:
        raise AssertionError("invalid config was accepted")

    # full pipeline against ground truth, loose functional tolerances
    report = velocal.calibrate(tmp / "imu.csv", tmp / "tracks.csv")
    truth = json.loads((tmp / "groundtruth.json").read_text())
    assert abs(report["time_offset_s"] - truth["t_off"]) < 1e-3, report["time_offset_s"]
    assert math.dist(report["translation_m"], truth["t_cb"]) < 0.01
    R_est = velocal.exp_so3(np.array(report["rotation_rotvec_rad"]))
    R_true = velocal.exp_so3(np.array([0.3, -0.2, 0.5]))
    rot_err = np.linalg.norm(velocal.log_so3(R_true.T @ R_est)) * 180.0 / math.pi
    assert rot_err < 0.5, f"rotation error {rot_err} deg"
    assert report["termination"]
    assert report["timing"]["total_s"] > 0.0

    # missing file maps to IOError
    try:
        velocal.calibrate(tmp / "missing.csv", tmp / "tracks.csv")
    except IOError:
        pass
    else:
        raise AssertionError("missing file did not raise")

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
