#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "velocal/calibrate.hpp"
#include "velocal/sim.hpp"

namespace fs = std::filesystem;
using namespace velocal;

namespace {

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
    SimConfig cfg = config_path.empty() ? SimConfig{} : read_sim_config(config_path);
    if (seed) {
        cfg.rig.seed = *seed;
        cfg.world.seed = *seed ^ 0x5851f42d4c957f2dull;
    }
    cfg.validate();

    const auto imu = sim::sample_imu(cfg.trajectory, cfg.rig);
    const TrackSet tracks = sim::render_tracks(cfg.trajectory, cfg.world, cfg.rig);
    sim::write_dataset(imu, tracks, cfg.trajectory, cfg.rig, out_dir);

    const sim::ExcitationMetrics ex = sim::compute_excitation(cfg.trajectory);
    std::printf("wrote %s: %zu imu samples, %zu tracks, %zu frames\n", out_dir.c_str(), imu.size(),
                tracks.tracks.size(), tracks.frame_times.size());
    std::printf("excitation: rotation span (%.1f, %.1f, %.1f) deg, accel variation %.2f m/s^2%s\n",
                ex.rotation_range_deg.x(), ex.rotation_range_deg.y(), ex.rotation_range_deg.z(),
                ex.accel_variation, ex.sufficient ? "" : "  [WARNING: insufficient]");
    return 0;
}

int cmd_calibrate(const std::string& imu_path, const std::string& tracks_path,
                  const std::string& config_path, const std::string& out_dir) {
    const CalibConfig cfg = config_path.empty() ? CalibConfig{} : read_calib_config(config_path);
    const auto imu = read_imu(imu_path);
    const TrackSet tracks = read_tracks(tracks_path);

    const PipelineResult result = calibrate(imu, tracks, cfg);
    const CalibrationReport& r = result.report;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
    write_report_json(r, (fs::path(out_dir) / "report.json").string());
    write_flow_residuals_csv(r, (fs::path(out_dir) / "residuals_flow.csv").string());
    write_convergence_csv(r, (fs::path(out_dir) / "convergence.csv").string());

    const Vec3 ypr = zyx_euler_deg(r.R_cb);
    std::printf("rotation (yaw/pitch/roll): %.4f / %.4f / %.4f deg\n", ypr.x(), ypr.y(), ypr.z());
    std::printf("translation: (%.3f, %.3f, %.3f) cm\n", 100.0 * r.t_cb.x(), 100.0 * r.t_cb.y(),
                100.0 * r.t_cb.z());
    std::printf("time offset: %.4f ms\n", 1e3 * r.t_off);
    std::printf("gravity: (%.4f, %.4f, %.4f) m/s^2\n", r.g_w.x(), r.g_w.y(), r.g_w.z());
    std::printf("timing: init %.2f s, batch %.2f s (%s after %d iterations)\n", r.init_time_s,
                r.batch_time_s, r.termination.c_str(), r.batch_iterations);
    std::printf("report written to %s\n", (fs::path(out_dir) / "report.json").string().c_str());
    return 0;
}

int cmd_check(const std::string& data_dir) {
    const auto imu = read_imu((fs::path(data_dir) / "imu.csv").string());
    const TrackSet tracks = read_tracks((fs::path(data_dir) / "tracks.csv").string());
    if (imu.size() < 2) throw ValidationError("imu stream too short");

    // Rate estimates.
    const double imu_rate = (imu.size() - 1) / (imu.back().t - imu.front().t);
    double frame_rate = 0.0;
    if (tracks.frame_times.size() >= 2) {
        const double span =
            tracks.frame_times.rbegin()->second - tracks.frame_times.begin()->second;
        if (span > 0.0) frame_rate = (tracks.frame_times.size() - 1) / span;
    }

    // Excitation from dead-reckoned gyro orientation and raw specific force.
    Rotation3 R;
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    double alo = 1e300, ahi = -1e300;
    for (size_t i = 0; i < imu.size(); ++i) {
        if (i > 0) {
            const double dt = imu[i].t - imu[i - 1].t;
            R = R * exp_so3(0.5 * dt * (imu[i - 1].gyro + imu[i].gyro));
        }
        const Vec3 th = log_so3(R);
        lo = lo.cwiseMin(th);
        hi = hi.cwiseMax(th);
        const double a = imu[i].accel.norm();
        alo = std::min(alo, a);
        ahi = std::max(ahi, a);
    }
    const Vec3 span_deg = (hi - lo) * (180.0 / M_PI);
    int excited_axes = 0;
    for (int a = 0; a < 3; ++a)
        if (span_deg[a] >= 30.0) ++excited_axes;
    const double accel_var = ahi - alo;

    std::map<size_t, int> histogram;
    for (const FeatureTrack& t : tracks.tracks) ++histogram[t.obs.size()];

    std::printf("imu: %zu samples, %.1f Hz estimated\n", imu.size(), imu_rate);
    std::printf("frames: %zu, %.1f Hz estimated\n", tracks.frame_times.size(), frame_rate);
    std::printf("tracks: %zu; length histogram:\n", tracks.tracks.size());
    for (const auto& [len, count] : histogram) std::printf("  %zu frames: %d\n", len, count);
    std::printf("rotation span: (%.1f, %.1f, %.1f) deg; accel variation %.2f m/s^2\n",
                span_deg.x(), span_deg.y(), span_deg.z(), accel_var);
    std::printf("timestamps: strictly increasing\n");
    if (excited_axes < 2 || accel_var < 2.0)
        std::printf("WARNING: motion may be insufficiently excited for full calibration\n");
    else
        std::printf("excitation: OK\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RGBD-inertial spatiotemporal calibration"};
    app.require_subcommand(1);

    std::string config_path, out_dir, imu_path, tracks_path, data_dir;
    std::optional<std::uint64_t> seed;

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Synthesize a dataset with ground truth");
    sim_cmd->add_option("--config", config_path, "Simulation config (JSON)");
    sim_cmd->add_option("--out", out_dir, "Output directory")->required();
    sim_cmd->add_option("--seed", seed, "Override the noise/world seeds");

    CLI::App* cal_cmd = app.add_subcommand("calibrate", "Run the calibration pipeline");
    cal_cmd->add_option("--imu", imu_path, "IMU CSV file")->required();
    cal_cmd->add_option("--tracks", tracks_path, "Feature-track CSV file")->required();
    cal_cmd->add_option("--config", config_path, "Calibration config (JSON)");
    cal_cmd->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* chk_cmd = app.add_subcommand("check", "Diagnose a dataset directory");
    chk_cmd->add_option("--data", data_dir, "Dataset directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim_cmd->parsed()) return cmd_simulate(config_path, out_dir, seed);
        if (cal_cmd->parsed()) return cmd_calibrate(imu_path, tracks_path, config_path, out_dir);
        if (chk_cmd->parsed()) return cmd_check(data_dir);
    } catch (const ObservabilityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DegenerateGeometryError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {   // validation, io, domain
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
