#include "velocal/calibrate.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "velocal/batch.hpp"
#include "velocal/init.hpp"

namespace velocal {

namespace {

constexpr const char* kImuHeader = "# velocal-imu v1";

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// Runs one pipeline stage, prefixing the stage name onto anything it throws
/// and pointing observability failures at the usual remedy.
template <typename F>
auto run_stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const ObservabilityError& e) {
        throw ObservabilityError(std::string(name) + ": " + e.what() +
                                 " (calibration needs sufficiently excited motions)");
    } catch (const DegenerateGeometryError& e) {
        throw DegenerateGeometryError(std::string(name) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + ": " + e.what());
    } catch (const SolverError& e) {
        throw SolverError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

std::vector<ImuMeasurement> read_imu_stream(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line) || line != kImuHeader)
        throw ValidationError(name + ": missing header '" + std::string(kImuHeader) + "'");
    std::vector<ImuMeasurement> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        ImuMeasurement m;
        double v[7];
        int consumed = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf%n", &v[0], &v[1], &v[2], &v[3],
                        &v[4], &v[5], &v[6], &consumed) != 7 ||
            consumed != static_cast<int>(line.size()))
            throw ValidationError(name + ": malformed row at line " + std::to_string(lineno));
        m.t = v[0];
        m.gyro = Vec3(v[1], v[2], v[3]);
        m.accel = Vec3(v[4], v[5], v[6]);
        if (!out.empty() && m.t <= out.back().t)
            throw ValidationError(name + ": timestamps not strictly increasing at line " +
                                  std::to_string(lineno));
        out.push_back(m);
    }
    return out;
}

std::vector<ImuMeasurement> read_imu(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open imu file: " + path);
    return read_imu_stream(in, path);
}

void write_imu(const std::vector<ImuMeasurement>& imu, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write imu file: " + path);
    out << kImuHeader << "\n";
    char buf[512];
    for (const ImuMeasurement& m : imu) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", m.t, m.gyro.x(),
                      m.gyro.y(), m.gyro.z(), m.accel.x(), m.accel.y(), m.accel.z());
        out << buf;
    }
    if (!out) throw IoError("write failure: " + path);
}

PipelineResult calibrate(const std::vector<ImuMeasurement>& imu, const TrackSet& tracks,
                         const CalibConfig& cfg) {
    cfg.validate();
    if (imu.size() < 8) throw ValidationError("too few inertial measurements");

    PipelineResult out;
    CalibrationReport& rep = out.report;
    const double t_start = now_s();

    auto snapshot = [&](const std::string& stage, const Rotation3& R_cb, const Vec3& t_cb,
                        double t_off, const Vec3& g_w, const ImuIntrinsics& bias, double dt) {
        StageSnapshot s;
        s.stage = stage;
        s.R_cb = R_cb;
        s.t_cb = t_cb;
        s.t_off = t_off;
        s.g_w = g_w;
        s.gyro_bias = bias.gyro_bias;
        s.accel_bias = bias.accel_bias;
        s.wall_time_s = dt;
        rep.stages.push_back(std::move(s));
    };

    const TrackSet gated = gate_tracks(tracks, 3, cfg.min_depth, cfg.max_depth);

    // Rotation spline from raw gyroscope samples.
    double t0 = now_s();
    RotationFitConfig rfc;
    rfc.order = cfg.spline_order;
    rfc.pad = cfg.max_time_offset;
    rfc.sigma_gyro = cfg.noise.sigma_gyro;
    So3Spline rot_spline = run_stage(
        "rotation-spline", [&] { return fit_rotation_spline(imu, cfg.dt_rot, rfc); });
    snapshot("rotation-spline", Rotation3::identity(), Vec3::Zero(), 0.0, Vec3::Zero(),
             ImuIntrinsics{}, now_s() - t0);

    // Rotation-only visual odometry + hand-eye rotation and time offset.
    t0 = now_s();
    HandEyeResult he = run_stage("hand-eye", [&] {
        RansacParams rp = cfg.ransac;
        rp.seed = cfg.seed;
        const std::vector<RelativeRotation> rel =
            estimate_relative_rotations(gated, cfg.intrinsics, rp);
        HandEyeConfig hec;
        hec.max_time_offset = cfg.max_time_offset;
        return hand_eye_rotation(rel, rot_spline, hec);
    });
    Rotation3 R_cb = he.R_cb;
    double t_off = he.t_off;
    snapshot("hand-eye", R_cb, Vec3::Zero(), t_off, Vec3::Zero(), ImuIntrinsics{}, now_s() - t0);

    // Per-frame camera ego-velocities from depth-annotated optical flow.
    t0 = now_s();
    std::map<int, std::vector<FlowFeature>> flow = compute_flow_features(gated);
    std::vector<EgoVelocity> egos = run_stage("ego-velocity", [&] {
        if (flow.empty())
            throw ValidationError("no tracks span three consecutive frames");
        EgoVelocityConfig evc;
        evc.min_features = cfg.min_features;
        evc.sigma_pixel_vel = cfg.noise.sigma_pixel_vel;
        std::vector<EgoVelocity> list;
        for (const auto& [frame, feats] : flow) {
            const double s = feats.front().t + t_off;
            if (s < rot_spline.min_time() || s >= rot_spline.max_time()) continue;
            const Vec3 w_c = R_cb.matrix().transpose() * rot_spline.angular_velocity_body(s);
            if (auto ev = estimate_ego_velocity(feats, w_c, cfg.intrinsics, evc))
                list.push_back(*ev);
        }
        if (list.size() < 4)
            throw ObservabilityError("only " + std::to_string(list.size()) +
                                     " frames yielded a usable ego-velocity");
        return list;
    });
    snapshot("ego-velocity", R_cb, Vec3::Zero(), t_off, Vec3::Zero(), ImuIntrinsics{},
             now_s() - t0);

    // Linear alignment: extrinsic translation and gravity.
    t0 = now_s();
    AlignConfig ac;
    ac.gravity_magnitude = cfg.gravity_magnitude;
    AlignResult ar = run_stage("alignment", [&] {
        AlignResult a = align_translation_gravity(egos, imu, rot_spline, R_cb, t_off, ac);
        if (!a.translation_observable)
            throw ObservabilityError("extrinsic translation poorly constrained (condition " +
                                     std::to_string(a.condition) + ")");
        return a;
    });
    snapshot("alignment", R_cb, ar.t_cb, t_off, ar.g_w, ImuIntrinsics{}, now_s() - t0);

    // World-frame linear velocity spline through the ego-velocities.
    t0 = now_s();
    VelocityFitConfig vfc;
    vfc.order = cfg.spline_order;
    vfc.pad = cfg.max_time_offset;
    R3Spline vel_spline = run_stage("velocity-spline", [&] {
        return fit_velocity_spline(egos, rot_spline, R_cb, ar.t_cb, t_off, cfg.dt_vel, vfc);
    });
    snapshot("velocity-spline", R_cb, ar.t_cb, t_off, ar.g_w, ImuIntrinsics{}, now_s() - t0);

    rep.init_time_s = now_s() - t_start;

    // Robust batch refinement, one re-gating round at a time.
    const double t_batch = now_s();
    CalibrationState state(std::move(rot_spline), std::move(vel_spline), cfg.gravity_magnitude);
    state.R_cb = R_cb;
    state.t_cb = ar.t_cb;
    state.t_off = t_off;
    state.g_w = ar.g_w;
    state.project_gravity();

    BatchConfig bc;
    bc.noise = cfg.noise;
    bc.intrinsics = cfg.intrinsics;
    bc.max_time_offset = cfg.max_time_offset;
    bc.outer_rounds = 1;
    SolveReport batch_rep;
    auto problem = run_stage("batch", [&] { return BatchProblem(imu, flow, bc); });
    int total_iters = 0;
    for (int round = 0; round < cfg.outer_rounds; ++round) {
        t0 = now_s();
        batch_rep = run_stage("batch", [&] { return problem.solve(state); });
        total_iters += batch_rep.iterations;
        snapshot("batch-round-" + std::to_string(round + 1), state.R_cb, state.t_cb, state.t_off,
                 state.g_w, state.imu, now_s() - t0);
    }
    rep.batch_time_s = now_s() - t_batch;

    rep.R_cb = state.R_cb;
    rep.t_cb = state.t_cb;
    rep.t_off = state.t_off;
    rep.g_w = state.g_w;
    rep.gyro_bias = state.imu.gyro_bias;
    rep.accel_bias = state.imu.accel_bias;
    rep.gyro = batch_rep.gyro;
    rep.accel = batch_rep.accel;
    rep.flow = batch_rep.flow;
    rep.flow_residuals = batch_rep.flow_residuals;
    rep.active_flow_blocks = batch_rep.active_flow_blocks;
    rep.rejected_flow_blocks = batch_rep.rejected_flow_blocks;
    rep.batch_iterations = total_iters;
    rep.termination = batch_rep.termination;
    rep.total_time_s = now_s() - t_start;
    out.state.emplace(std::move(state));
    return out;
}

}  // namespace velocal
