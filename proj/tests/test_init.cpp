#include <random>

#include "doctest.h"
#include "velocal/init.hpp"
#include "velocal/sim.hpp"

using namespace velocal;

namespace {

std::mt19937_64 rng(2024);

Vec3 random_vec(double s) {
    std::normal_distribution<double> g(0.0, s);
    return Vec3(g(rng), g(rng), g(rng));
}

sim::SensorRig rig_with(const Vec3& rot, const Vec3& trans, double toff, bool noisy = false) {
    sim::SensorRig rig;
    rig.R_cb = exp_so3(rot);
    rig.t_cb = trans;
    rig.t_off = toff;
    rig.noisy = noisy;
    return rig;
}

}  // namespace

TEST_CASE("rotation spline fit reproduces the simulated angular velocity") {
    const sim::TrajectorySpec traj = sim::TrajectorySpec::standard(10.0);
    sim::SensorRig rig;
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig cfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, cfg);
    double ss = 0.0;
    long n = 0;
    for (const auto& m : imu) {
        ss += (spline.angular_velocity_body(m.t) - m.gyro).squaredNorm();
        n += 3;
    }
    CHECK(std::sqrt(ss / n) < 1e-4);   // noiseless: spline approximation error only
    // gauge: first control point is the identity
    CHECK(log_so3(spline.knot(0)).norm() < 1e-12);
}

TEST_CASE("rotation spline fit handles noisy gyro within the expected error") {
    const sim::TrajectorySpec traj = sim::TrajectorySpec::standard(10.0);
    sim::SensorRig rig;
    rig.noisy = true;
    rig.seed = 21;
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig cfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, cfg);
    double ss = 0.0;
    long n = 0;
    for (const auto& m : imu) {
        const Vec3 w_true = traj.angular_velocity_body(m.t);
        ss += (spline.angular_velocity_body(m.t) - w_true).squaredNorm();
        n += 3;
    }
    CHECK(std::sqrt(ss / n) < 1.5e-2);
}

TEST_CASE("rotation spline fit rejects too-short streams") {
    std::vector<ImuMeasurement> imu;
    for (int i = 0; i < 100; ++i) {
        ImuMeasurement m;
        m.t = i / 200.0;   // 0.5 s, below the minimum span
        imu.push_back(m);
    }
    RotationFitConfig cfg;
    CHECK_THROWS_AS(fit_rotation_spline(imu, 0.05, cfg), ValidationError);
}

TEST_CASE("hand-eye recovers rotation and time offset from a noiseless run") {
    const sim::TrajectorySpec traj = sim::TrajectorySpec::standard(15.0);
    const sim::SensorRig rig = rig_with(Vec3(0.3, -0.2, 0.5), Vec3::Zero(), 0.005);
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig rcfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, rcfg);

    // synthesize exact relative camera rotations on the camera clock
    std::vector<RelativeRotation> rels;
    for (int k = 0; k + 1 < 150; ++k) {
        RelativeRotation r;
        const double tb0 = k / 10.0, tb1 = (k + 1) / 10.0;
        r.t0 = tb0 - rig.t_off;
        r.t1 = tb1 - rig.t_off;
        const Rotation3 Rc0 = traj.rotation_at(tb0) * rig.R_cb;
        const Rotation3 Rc1 = traj.rotation_at(tb1) * rig.R_cb;
        r.R = Rc0.inverse() * Rc1;   // frame at t1 -> frame at t0
        rels.push_back(r);
    }
    HandEyeConfig cfg;
    const HandEyeResult res = hand_eye_rotation(rels, spline, cfg);
    CHECK(log_so3(res.R_cb.inverse() * rig.R_cb).norm() * 180.0 / M_PI < 0.01);
    CHECK(std::abs(res.t_off - rig.t_off) < 1e-4);
}

TEST_CASE("hand-eye refuses single-axis rotation") {
    // rotation about one axis only: the extrinsic rotation about that axis is
    // unobservable
    std::vector<Rotation3> knots;
    std::vector<ImuMeasurement> imu;
    for (int i = 0; i < 1000; ++i) {
        ImuMeasurement m;
        m.t = i / 200.0;
        m.gyro = Vec3(0.4, 0.0, 0.0);
        imu.push_back(m);
    }
    RotationFitConfig rcfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, rcfg);
    std::vector<RelativeRotation> rels;
    for (int k = 0; k + 1 < 40; ++k) {
        RelativeRotation r;
        r.t0 = k / 10.0;
        r.t1 = (k + 1) / 10.0;
        r.R = exp_so3(Vec3(0.04, 0.0, 0.0));
        rels.push_back(r);
    }
    HandEyeConfig cfg;
    CHECK_THROWS_AS(hand_eye_rotation(rels, spline, cfg), ObservabilityError);
}

TEST_CASE("ego-velocity recovers the exact camera velocity from noiseless flow") {
    CameraIntrinsics K;
    std::uniform_real_distribution<double> ud(1.0, 8.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 v_c = random_vec(1.0);
        const Vec3 w_c = random_vec(0.5);
        std::vector<FlowFeature> feats;
        for (int j = 0; j < 12; ++j) {
            FlowFeature f;
            f.id = j;
            f.depth = ud(rng);
            f.pixel = Vec2(60.0 + 40.0 * (j % 5), 50.0 + 50.0 * (j / 5));
            const PixelVelocity pv = optical_flow(f.pixel, f.depth, v_c, w_c, K);
            f.pixel_vel = pv.vel;
            feats.push_back(f);
        }
        EgoVelocityConfig cfg;
        const auto est = estimate_ego_velocity(feats, w_c, K, cfg);
        REQUIRE(est.has_value());
        CHECK((est->v_c - v_c).norm() < 1e-8);
    }
}

TEST_CASE("ego-velocity needs enough features") {
    CameraIntrinsics K;
    std::vector<FlowFeature> feats(3);
    for (int j = 0; j < 3; ++j) {
        feats[j].depth = 2.0;
        feats[j].pixel = Vec2(100.0 + j, 100.0);
    }
    EgoVelocityConfig cfg;
    cfg.min_features = 5;
    CHECK_FALSE(estimate_ego_velocity(feats, Vec3::Zero(), K, cfg).has_value());
}

TEST_CASE("ego-velocity downweights gross outliers in the reweighted pass") {
    CameraIntrinsics K;
    const Vec3 v_c(0.4, -0.2, 0.6), w_c(0.1, -0.05, 0.02);
    std::vector<FlowFeature> feats;
    std::uniform_real_distribution<double> ud(1.5, 6.0);
    for (int j = 0; j < 30; ++j) {
        FlowFeature f;
        f.depth = ud(rng);
        f.pixel = Vec2(40.0 + 19.0 * (j % 6), 60.0 + 33.0 * (j / 6));
        f.pixel_vel = optical_flow(f.pixel, f.depth, v_c, w_c, K).vel;
        if (j == 7 || j == 19) f.pixel_vel += Vec2(900.0, -700.0);   // gross outliers
        feats.push_back(f);
    }
    EgoVelocityConfig cfg;
    cfg.sigma_pixel_vel = 1.0;
    const auto est = estimate_ego_velocity(feats, w_c, K, cfg);
    REQUIRE(est.has_value());
    CHECK((est->v_c - v_c).norm() < 1e-6);
}

TEST_CASE("translation and gravity alignment recovers both from a noiseless run") {
    const sim::TrajectorySpec traj = sim::TrajectorySpec::standard(20.0);
    const sim::SensorRig rig = rig_with(Vec3(0.3, -0.2, 0.5), Vec3(0.1, -0.05, 0.02), 0.0);
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig rcfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, rcfg);

    // exact ego-velocities from the analytic trajectory
    std::vector<EgoVelocity> egos;
    for (int k = 1; k < 20 * 30 - 1; ++k) {
        const double t = k / 30.0;
        EgoVelocity e;
        e.t = t;
        const Vec3 w_b = traj.angular_velocity_body(t);
        const Vec3 v_b = traj.rotation_at(t).matrix().transpose() * traj.velocity_at(t);
        e.v_c = rig.R_cb.matrix().transpose() * (v_b + w_b.cross(rig.t_cb));
        e.features = 20;
        egos.push_back(e);
    }
    AlignConfig cfg;
    const AlignResult res = align_translation_gravity(egos, imu, spline, rig.R_cb, 0.0, cfg);
    CHECK(res.translation_observable);
    CHECK((res.t_cb - rig.t_cb).norm() < 1e-3);
    // the spline's world frame equals the true world up to the initial body
    // pose; compare gravity through that anchor rotation
    const Mat3 R_anchor = spline.eval(imu.front().t).matrix() *
                          traj.rotation_at(imu.front().t).matrix().transpose();
    const Vec3 g_expected = R_anchor * rig.g_w;
    const double ang = std::acos(std::clamp(
                           res.g_w.normalized().dot(g_expected.normalized()), -1.0, 1.0)) *
                       180.0 / M_PI;
    CHECK(ang < 0.02);
    CHECK(res.g_w.norm() == doctest::Approx(9.80665).epsilon(1e-12));
}

TEST_CASE("alignment flags unobservable translation on a rotation-free run") {
    // No rotation: the t_cb columns vanish and the solver must say so.
    sim::TrajectorySpec traj;
    traj.duration = 10.0;
    traj.position[0] = {{0.5, 0.3, 0.0}};
    traj.position[1] = {{0.4, 0.25, 1.0}};
    traj.position[2] = {{0.3, 0.35, 2.0}};
    sim::SensorRig rig;
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig rcfg;
    const So3Spline spline = fit_rotation_spline(imu, 0.05, rcfg);
    std::vector<EgoVelocity> egos;
    for (int k = 1; k < 10 * 30 - 1; ++k) {
        EgoVelocity e;
        e.t = k / 30.0;
        e.v_c = traj.velocity_at(e.t);
        e.features = 20;
        egos.push_back(e);
    }
    AlignConfig cfg;
    const AlignResult res = align_translation_gravity(egos, imu, spline, Rotation3(), 0.0, cfg);
    CHECK_FALSE(res.translation_observable);
    CHECK(res.t_cb.norm() < 1e-6);   // regularized to zero, not garbage
}

TEST_CASE("velocity spline reproduces a constant world velocity") {
    sim::TrajectorySpec traj;
    traj.duration = 8.0;
    sim::SensorRig rig;
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig rcfg;
    const So3Spline rot = fit_rotation_spline(imu, 0.1, rcfg);

    const Vec3 v_const(0.7, -0.3, 0.2);
    std::vector<EgoVelocity> egos;
    for (int k = 0; k < 8 * 30; ++k) {
        EgoVelocity e;
        e.t = k / 30.0;
        e.v_c = v_const;   // identity extrinsics, identity orientation
        e.features = 10;
        egos.push_back(e);
    }
    VelocityFitConfig cfg;
    const R3Spline vel = fit_velocity_spline(egos, rot, Rotation3(), Vec3::Zero(), 0.0, 0.1, cfg);
    for (double t = 0.2; t < 7.8; t += 0.37)
        CHECK((vel.eval(t) - v_const).norm() < 1e-6);
}

TEST_CASE("velocity spline tracks the true velocity on the standard run") {
    const sim::TrajectorySpec traj = sim::TrajectorySpec::standard(10.0);
    const sim::SensorRig rig = rig_with(Vec3(0.1, 0.2, -0.1), Vec3(0.05, 0.0, -0.02), 0.0);
    const auto imu = sim::sample_imu(traj, rig);
    RotationFitConfig rcfg;
    const So3Spline rot = fit_rotation_spline(imu, 0.05, rcfg);
    const Mat3 R_anchor =
        rot.eval(imu.front().t).matrix() * traj.rotation_at(imu.front().t).matrix().transpose();

    std::vector<EgoVelocity> egos;
    for (int k = 1; k < 10 * 30 - 1; ++k) {
        const double t = k / 30.0;
        EgoVelocity e;
        e.t = t;
        const Vec3 w_b = traj.angular_velocity_body(t);
        const Vec3 v_b = traj.rotation_at(t).matrix().transpose() * traj.velocity_at(t);
        e.v_c = rig.R_cb.matrix().transpose() * (v_b + w_b.cross(rig.t_cb));
        e.features = 20;
        egos.push_back(e);
    }
    VelocityFitConfig cfg;
    const R3Spline vel =
        fit_velocity_spline(egos, rot, rig.R_cb, rig.t_cb, 0.0, 0.05, cfg);
    double ss = 0.0;
    long n = 0;
    for (double t = 0.2; t < 9.8; t += 0.1) {
        ss += (vel.eval(t) - R_anchor * traj.velocity_at(t)).squaredNorm();
        n += 3;
    }
    CHECK(std::sqrt(ss / n) < 0.02);
}
