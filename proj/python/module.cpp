#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "velocal/calibrate.hpp"
#include "velocal/sim.hpp"

namespace py = pybind11;
using namespace velocal;

namespace {

py::dict excitation_dict(const sim::ExcitationMetrics& ex) {
    py::dict d;
    d["rotation_range_deg"] = ex.rotation_range_deg;
    d["accel_variation"] = ex.accel_variation;
    d["excited_axes"] = ex.excited_axes;
    d["sufficient"] = ex.sufficient;
    return d;
}

}  // namespace

PYBIND11_MODULE(_velocal, m) {
    m.doc() = "RGBD-inertial spatiotemporal calibration: continuous-time B-spline "
              "estimation of camera-IMU extrinsics, time offset, gravity and biases.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<ObservabilityError>(m, "ObservabilityError", PyExc_RuntimeError);
    py::register_exception<DegenerateGeometryError>(m, "DegenerateGeometryError",
                                                    PyExc_RuntimeError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    m.def("exp_so3", [](const Vec3& phi) { return exp_so3_matrix(phi); },
          "Rotation matrix of a rotation vector (Rodrigues).", py::arg("phi"));
    m.def("log_so3", [](const Mat3& R) { return log_so3_matrix(R); },
          "Principal rotation vector of a rotation matrix.", py::arg("R"));

    m.def("default_sim_config", [] { return serialize_sim_config(SimConfig{}); },
          "Default simulation config as a JSON string.");
    m.def("default_calib_config", [] { return serialize_calib_config(CalibConfig{}); },
          "Default calibration config as a JSON string.");

    m.def(
        "simulate",
        [](const std::string& config_json, const std::string& out_dir) {
            const SimConfig cfg = parse_sim_config(config_json, "sim_config");
            const auto imu = sim::sample_imu(cfg.trajectory, cfg.rig);
            const TrackSet tracks = sim::render_tracks(cfg.trajectory, cfg.world, cfg.rig);
            sim::write_dataset(imu, tracks, cfg.trajectory, cfg.rig, out_dir);
            py::dict d;
            d["imu_samples"] = imu.size();
            d["tracks"] = tracks.tracks.size();
            d["frames"] = tracks.frame_times.size();
            d["excitation"] = excitation_dict(sim::compute_excitation(cfg.trajectory));
            return d;
        },
        "Synthesize a dataset (imu.csv, tracks.csv, groundtruth.json) into out_dir.",
        py::arg("config_json"), py::arg("out_dir"));

    m.def(
        "calibrate",
        [](const std::string& imu_path, const std::string& tracks_path,
           const std::string& config_json) {
            const CalibConfig cfg =
                config_json.empty() ? CalibConfig{} : parse_calib_config(config_json, "config");
            const auto imu = read_imu(imu_path);
            const TrackSet tracks = read_tracks(tracks_path);
            PipelineResult result;
            {
                py::gil_scoped_release release;
                result = calibrate(imu, tracks, cfg);
            }
            return serialize_report_json(result.report);
        },
        "Run the full calibration pipeline; returns the report as a JSON string.",
        py::arg("imu_path"), py::arg("tracks_path"), py::arg("config_json") = std::string());

    m.def(
        "excitation",
        [](const std::string& config_json) {
            const SimConfig cfg = parse_sim_config(config_json, "sim_config");
            return excitation_dict(sim::compute_excitation(cfg.trajectory));
        },
        "Excitation self-check of a simulation config's trajectory.", py::arg("config_json"));

    m.def("zyx_euler_deg", [](const Mat3& R) { return zyx_euler_deg(Rotation3(R)); },
          "Intrinsic Z-Y-X (yaw, pitch, roll) angles of a rotation matrix, degrees.",
          py::arg("R"));
}
