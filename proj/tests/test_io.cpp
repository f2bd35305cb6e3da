#include <sstream>

#include "doctest.h"
#include "velocal/calibrate.hpp"

using namespace velocal;

TEST_CASE("calibration config round trips losslessly") {
    CalibConfig c;
    c.dt_rot = 0.07;
    c.dt_vel = 0.04;
    c.spline_order = 5;
    c.noise.sigma_gyro = 1e-3;
    c.noise.sigma_pixel_vel = 17.5;
    c.ransac.seed = 99;
    c.max_time_offset = 0.08;
    c.outer_rounds = 3;
    c.seed = 1234567890123ull;
    c.intrinsics.fx = 458.123456789;

    const CalibConfig back = parse_calib_config(serialize_calib_config(c), "roundtrip");
    CHECK(back.dt_rot == c.dt_rot);
    CHECK(back.dt_vel == c.dt_vel);
    CHECK(back.spline_order == c.spline_order);
    CHECK(back.noise.sigma_gyro == c.noise.sigma_gyro);
    CHECK(back.noise.sigma_pixel_vel == c.noise.sigma_pixel_vel);
    CHECK(back.ransac.seed == c.ransac.seed);
    CHECK(back.max_time_offset == c.max_time_offset);
    CHECK(back.outer_rounds == c.outer_rounds);
    CHECK(back.seed == c.seed);
    CHECK(back.intrinsics.fx == c.intrinsics.fx);
    // serializing again gives the identical text
    CHECK(serialize_calib_config(back) == serialize_calib_config(c));
}

TEST_CASE("sim config round trips and partial configs take defaults") {
    SimConfig c;
    c.trajectory = sim::TrajectorySpec::standard(12.0);
    c.rig.t_off = -0.007;
    c.rig.noisy = true;
    c.world.landmarks = 123;
    const SimConfig back = parse_sim_config(serialize_sim_config(c), "roundtrip");
    CHECK(back.trajectory.duration == 12.0);
    CHECK(back.rig.t_off == c.rig.t_off);
    CHECK(back.rig.noisy);
    CHECK(back.world.landmarks == 123);
    CHECK(serialize_sim_config(back) == serialize_sim_config(c));

    const SimConfig partial = parse_sim_config(R"({"rig": {"t_off": 0.004}})", "partial");
    CHECK(partial.rig.t_off == 0.004);
    CHECK(partial.rig.imu_rate == 200.0);
    CHECK(partial.trajectory.duration == 30.0);
}

TEST_CASE("config errors name the offending field") {
    CHECK_THROWS_WITH_AS(parse_calib_config(R"({"dt_rots": 0.1})", "cfg"),
                         doctest::Contains("dt_rots"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_calib_config(R"({"noise": {"sigma_gyro": -1}})", "cfg"),
                         doctest::Contains("sigma_gyro"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_sim_config(R"({"rig": {"imu_rate": -5}})", "cfg"),
                         doctest::Contains("imu_rate"), ValidationError);
    CHECK_THROWS_AS(parse_calib_config("{not json", "cfg"), ValidationError);
}

TEST_CASE("imu reader validates header, rows and monotonicity") {
    std::istringstream ok(
        "# velocal-imu v1\n"
        "0.0,0.1,0.2,0.3,1.0,2.0,3.0\n"
        "0.005,0.1,0.2,0.3,1.0,2.0,3.0\n");
    const auto imu = read_imu_stream(ok, "test");
    REQUIRE(imu.size() == 2);
    CHECK(imu[1].t == 0.005);
    CHECK((imu[0].gyro - Vec3(0.1, 0.2, 0.3)).norm() == 0.0);

    std::istringstream bad_header("0.0,0.1,0.2,0.3,1.0,2.0,3.0\n");
    CHECK_THROWS_AS(read_imu_stream(bad_header, "test"), ValidationError);

    std::istringstream bad_row(
        "# velocal-imu v1\n"
        "0.0,0.1,0.2\n");
    CHECK_THROWS_WITH_AS(read_imu_stream(bad_row, "test"), doctest::Contains("line 2"),
                         ValidationError);

    std::istringstream shuffled(
        "# velocal-imu v1\n"
        "0.010,0,0,0,0,0,0\n"
        "0.005,0,0,0,0,0,0\n");
    CHECK_THROWS_WITH_AS(read_imu_stream(shuffled, "test"),
                         doctest::Contains("strictly increasing"), ValidationError);
}

TEST_CASE("euler factorization matches its definition") {
    const double yaw = 0.7, pitch = -0.3, roll = 0.2;
    const Mat3 R = exp_so3_matrix(Vec3(0.0, 0.0, yaw)) * exp_so3_matrix(Vec3(0.0, pitch, 0.0)) *
                   exp_so3_matrix(Vec3(roll, 0.0, 0.0));
    const Vec3 ypr = zyx_euler_deg(Rotation3(R));
    CHECK(ypr.x() == doctest::Approx(yaw * 180.0 / M_PI).epsilon(1e-10));
    CHECK(ypr.y() == doctest::Approx(pitch * 180.0 / M_PI).epsilon(1e-10));
    CHECK(ypr.z() == doctest::Approx(roll * 180.0 / M_PI).epsilon(1e-10));
}

TEST_CASE("report serialization is deterministic and carries the unit variants") {
    CalibrationReport r;
    r.R_cb = exp_so3(Vec3(0.3, -0.2, 0.5));
    r.t_cb = Vec3(0.1, -0.05, 0.02);
    r.t_off = 0.005;
    r.g_w = Vec3(0.0, 0.0, -9.80665);
    r.flow.count = 10;
    r.flow.dim_mean = Vec2(0.01, -0.02);
    StageSnapshot s;
    s.stage = "hand-eye";
    s.R_cb = r.R_cb;
    s.wall_time_s = 0.123456789123;
    r.stages.push_back(s);
    r.flow_residuals.emplace_back(1.5, Vec2(0.1, -0.2));

    const std::string a = serialize_report_json(r);
    const std::string b = serialize_report_json(r);
    CHECK(a == b);
    CHECK(a.find("\"time_offset_ms\": 5") != std::string::npos);
    CHECK(a.find("\"translation_cm\": [") != std::string::npos);
    CHECK(a.find("hand-eye") != std::string::npos);
    // nine significant digits, no more
    CHECK(a.find("0.123456789") != std::string::npos);
    CHECK(a.find("0.123456789123") == std::string::npos);
}
