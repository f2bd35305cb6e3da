#include "velocal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "velocal/errors.hpp"

namespace velocal::sim {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double eval_sum(const std::vector<Sinusoid>& terms, double t, int deriv) {
    double v = 0.0;
    for (const Sinusoid& s : terms) {
        const double w = kTwoPi * s.freq;
        const double arg = w * t + s.phase;
        switch (deriv) {
            case 0: v += s.amp * std::sin(arg); break;
            case 1: v += s.amp * w * std::cos(arg); break;
            case 2: v -= s.amp * w * w * std::sin(arg); break;
            default: throw ValidationError("unsupported sinusoid derivative");
        }
    }
    return v;
}

}  // namespace

TrajectorySpec TrajectorySpec::standard(double duration) {
    TrajectorySpec t;
    t.duration = duration;
    // Rotation: large slow swings about two axes plus a smaller third-axis
    // term; kept below ~0.5 Hz so three-point flow differentiation at 30 Hz
    // frames stays well inside tolerance.
    t.rotation[0] = {{0.55, 0.17, 0.0}};
    t.rotation[1] = {{0.50, 0.21, 1.1}};
    t.rotation[2] = {{0.30, 0.25, 2.3}};
    // Translation: ~0.8 m strokes giving multi-m/s^2 acceleration variation.
    t.position[0] = {{0.80, 0.27, 0.4}};
    t.position[1] = {{0.70, 0.22, 1.9}};
    t.position[2] = {{0.55, 0.33, 3.0}};
    return t;
}

void TrajectorySpec::validate() const {
    if (!(duration > 0.0)) throw ValidationError("trajectory duration must be positive");
    for (int a = 0; a < 3; ++a) {
        for (const auto& list : {position[a], rotation[a]})
            for (const Sinusoid& s : list) {
                if (!std::isfinite(s.amp) || !std::isfinite(s.phase))
                    throw ValidationError("sinusoid amplitude/phase must be finite");
                if (!(s.freq > 0.0)) throw ValidationError("sinusoid frequency must be positive");
            }
    }
}

Vec3 TrajectorySpec::position_at(double t) const {
    return Vec3(eval_sum(position[0], t, 0), eval_sum(position[1], t, 0),
                eval_sum(position[2], t, 0));
}

Vec3 TrajectorySpec::velocity_at(double t) const {
    return Vec3(eval_sum(position[0], t, 1), eval_sum(position[1], t, 1),
                eval_sum(position[2], t, 1));
}

Vec3 TrajectorySpec::acceleration_at(double t) const {
    return Vec3(eval_sum(position[0], t, 2), eval_sum(position[1], t, 2),
                eval_sum(position[2], t, 2));
}

Vec3 TrajectorySpec::rotvec_at(double t) const {
    return Vec3(eval_sum(rotation[0], t, 0), eval_sum(rotation[1], t, 0),
                eval_sum(rotation[2], t, 0));
}

Vec3 TrajectorySpec::rotvec_rate_at(double t) const {
    return Vec3(eval_sum(rotation[0], t, 1), eval_sum(rotation[1], t, 1),
                eval_sum(rotation[2], t, 1));
}

Rotation3 TrajectorySpec::rotation_at(double t) const { return exp_so3(rotvec_at(t)); }

Vec3 TrajectorySpec::angular_velocity_body(double t) const {
    // R = Exp(theta): Rdot = R hat(Jr(theta) thetadot)
    return right_jacobian_so3(rotvec_at(t)) * rotvec_rate_at(t);
}

std::vector<Vec3> WorldSpec::generate(const TrajectorySpec& traj) const {
    if (landmarks <= 0) throw ValidationError("landmark count must be positive");
    if (!(0.0 < near && near < far)) throw ValidationError("world radii must satisfy 0 < near < far");
    // Center the field on the trajectory's mean position.
    Vec3 center = Vec3::Zero();
    const int ns = 64;
    for (int i = 0; i < ns; ++i) center += traj.position_at(traj.duration * i / ns);
    center /= ns;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> radial(near, far);
    std::vector<Vec3> pts;
    pts.reserve(landmarks);
    while (static_cast<int>(pts.size()) < landmarks) {
        Vec3 d(uni(rng), uni(rng), uni(rng));
        if (shape == Shape::Shell) {
            const double n = d.norm();
            if (n < 1e-6 || n > 1.0) continue;
            pts.push_back(center + (radial(rng) / n) * d);
        } else {
            pts.push_back(center + far * d);
        }
    }
    return pts;
}

void SensorRig::validate() const {
    intrinsics.validate();
    if (!(imu_rate > 0.0) || !(frame_rate > 0.0)) throw ValidationError("sensor rates must be positive");
    if (sigma_gyro < 0.0 || sigma_acc < 0.0 || sigma_pixel < 0.0 || sigma_depth_rel < 0.0)
        throw ValidationError("noise sigmas must be non-negative");
    if (outlier_fraction < 0.0 || outlier_fraction >= 1.0)
        throw ValidationError("outlier fraction must be in [0, 1)");
    if (!(min_depth > 0.0) || !(max_depth > min_depth))
        throw ValidationError("depth gates must satisfy 0 < min < max");
    if (!(gravity_magnitude > 0.0)) throw ValidationError("gravity magnitude must be positive");
}

std::vector<ImuMeasurement> sample_imu(const TrajectorySpec& traj, const SensorRig& rig) {
    traj.validate();
    rig.validate();
    const long n = std::lround(traj.duration * rig.imu_rate);
    std::mt19937_64 rng(rig.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<ImuMeasurement> out;
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
        ImuMeasurement m;
        m.t = i / rig.imu_rate;
        const Mat3 Rt = traj.rotation_at(m.t).matrix().transpose();
        m.gyro = traj.angular_velocity_body(m.t) + rig.biases.gyro_bias;
        m.accel = Rt * (traj.acceleration_at(m.t) - rig.g_w) + rig.biases.accel_bias;
        if (rig.noisy) {
            for (int a = 0; a < 3; ++a) m.gyro[a] += rig.sigma_gyro * gauss(rng);
            for (int a = 0; a < 3; ++a) m.accel[a] += rig.sigma_acc * gauss(rng);
        }
        out.push_back(m);
    }
    return out;
}

TrackSet render_tracks(const TrajectorySpec& traj, const WorldSpec& world, const SensorRig& rig) {
    traj.validate();
    rig.validate();
    const std::vector<Vec3> landmarks = world.generate(traj);
    const long n_frames = std::lround(traj.duration * rig.frame_rate);
    const CameraIntrinsics& K = rig.intrinsics;
    const Mat3 Rcb_t = rig.R_cb.matrix().transpose();

    std::mt19937_64 rng(rig.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> upix_u(0.0, K.width - 1.0);
    std::uniform_real_distribution<double> upix_v(0.0, K.height - 1.0);
    std::uniform_real_distribution<double> udepth(rig.min_depth, rig.max_depth);
    std::uniform_real_distribution<double> ufrac(0.0, 1.0);

    TrackSet out;
    // Open track per landmark; closed segments get fresh ids so frame indices
    // stay consecutive within each track.
    std::vector<FeatureTrack> open(landmarks.size());
    std::int64_t next_id = 0;
    auto flush = [&](FeatureTrack& t) {
        if (!t.obs.empty()) {
            t.id = next_id++;
            out.tracks.push_back(std::move(t));
        }
        t = FeatureTrack{};
    };

    for (long k = 0; k < n_frames; ++k) {
        const double t_imu = k / rig.frame_rate;
        const double t_cam = t_imu - rig.t_off;
        const Mat3 Rwb_t = traj.rotation_at(t_imu).matrix().transpose();
        const Vec3 p_b = traj.position_at(t_imu);
        bool any = false;
        for (size_t l = 0; l < landmarks.size(); ++l) {
            const Vec3 p_c = Rcb_t * (Rwb_t * (landmarks[l] - p_b) - rig.t_cb);
            bool visible = p_c.z() >= rig.min_depth && p_c.z() <= rig.max_depth;
            Vec2 px = Vec2::Zero();
            if (visible) {
                px = project(p_c, K);
                visible = px.x() >= 0.0 && px.x() <= K.width - 1.0 && px.y() >= 0.0 &&
                          px.y() <= K.height - 1.0;
            }
            if (!visible) {
                flush(open[l]);
                continue;
            }
            FeatureObservation o;
            o.t = t_cam;
            o.pixel = px;
            o.depth = p_c.z();
            if (rig.noisy) {
                o.pixel.x() += rig.sigma_pixel * gauss(rng);
                o.pixel.y() += rig.sigma_pixel * gauss(rng);
                o.depth *= 1.0 + rig.sigma_depth_rel * gauss(rng);
            }
            if (rig.outlier_fraction > 0.0 && ufrac(rng) < rig.outlier_fraction) {
                o.pixel = Vec2(upix_u(rng), upix_v(rng));
                o.depth = udepth(rng);
            }
            open[l].frames.push_back(static_cast<int>(k));
            open[l].obs.push_back(o);
            any = true;
        }
        if (any) out.frame_times[static_cast<int>(k)] = t_cam;
    }
    for (FeatureTrack& t : open) flush(t);
    std::sort(out.tracks.begin(), out.tracks.end(),
              [](const FeatureTrack& a, const FeatureTrack& b) { return a.id < b.id; });
    return out;
}

ExcitationMetrics compute_excitation(const TrajectorySpec& traj) {
    traj.validate();
    const int n = std::max(2, static_cast<int>(traj.duration * 100.0));
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    double alo = 1e300, ahi = -1e300;
    for (int i = 0; i < n; ++i) {
        const double t = traj.duration * i / (n - 1.0);
        const Vec3 th = traj.rotvec_at(t);
        lo = lo.cwiseMin(th);
        hi = hi.cwiseMax(th);
        const double a = traj.acceleration_at(t).norm();
        alo = std::min(alo, a);
        ahi = std::max(ahi, a);
    }
    ExcitationMetrics m;
    m.rotation_range_deg = (hi - lo) * (180.0 / M_PI);
    m.accel_variation = ahi - alo;
    for (int a = 0; a < 3; ++a)
        if (m.rotation_range_deg[a] >= 30.0) ++m.excited_axes;
    m.sufficient = m.excited_axes >= 2 && m.accel_variation >= 2.0;
    return m;
}

void write_dataset(const std::vector<ImuMeasurement>& imu, const TrackSet& tracks,
                   const TrajectorySpec& traj, const SensorRig& rig, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    const std::string imu_path = (fs::path(out_dir) / "imu.csv").string();
    std::ofstream fimu(imu_path);
    if (!fimu) throw IoError("cannot write imu file: " + imu_path);
    fimu << "# velocal-imu v1\n";
    char buf[512];
    for (const ImuMeasurement& m : imu) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", m.t, m.gyro.x(),
                      m.gyro.y(), m.gyro.z(), m.accel.x(), m.accel.y(), m.accel.z());
        fimu << buf;
    }
    if (!fimu) throw IoError("write failure: " + imu_path);
    fimu.close();

    write_tracks(tracks, (fs::path(out_dir) / "tracks.csv").string());

    nlohmann::ordered_json j;
    const Eigen::Quaterniond q = rig.R_cb.quaternion();
    j["R_cb_quat_wxyz"] = {q.w(), q.x(), q.y(), q.z()};
    j["t_cb"] = {rig.t_cb.x(), rig.t_cb.y(), rig.t_cb.z()};
    j["t_off"] = rig.t_off;
    j["g_w"] = {rig.g_w.x(), rig.g_w.y(), rig.g_w.z()};
    j["gravity_magnitude"] = rig.gravity_magnitude;
    j["gyro_bias"] = {rig.biases.gyro_bias.x(), rig.biases.gyro_bias.y(), rig.biases.gyro_bias.z()};
    j["accel_bias"] = {rig.biases.accel_bias.x(), rig.biases.accel_bias.y(),
                       rig.biases.accel_bias.z()};
    j["imu_rate"] = rig.imu_rate;
    j["frame_rate"] = rig.frame_rate;
    j["duration"] = traj.duration;
    nlohmann::ordered_json poses = nlohmann::ordered_json::array();
    for (const auto& [frame, t_cam] : tracks.frame_times) {
        const double t_imu = t_cam + rig.t_off;
        const Eigen::Quaterniond qwb = traj.rotation_at(t_imu).quaternion();
        const Vec3 p = traj.position_at(t_imu);
        const Vec3 v = traj.velocity_at(t_imu);
        nlohmann::ordered_json e;
        e["frame"] = frame;
        e["t_imu"] = t_imu;
        e["t_camera"] = t_cam;
        e["q_wb_wxyz"] = {qwb.w(), qwb.x(), qwb.y(), qwb.z()};
        e["p_w"] = {p.x(), p.y(), p.z()};
        e["v_w"] = {v.x(), v.y(), v.z()};
        poses.push_back(std::move(e));
    }
    j["poses"] = std::move(poses);

    const std::string gt_path = (fs::path(out_dir) / "groundtruth.json").string();
    std::ofstream fgt(gt_path);
    if (!fgt) throw IoError("cannot write ground-truth file: " + gt_path);
    fgt << j.dump(2) << "\n";
    if (!fgt) throw IoError("write failure: " + gt_path);
}

}  // namespace velocal::sim
