#include "velocal/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "velocal/errors.hpp"

namespace velocal {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// Minimal hand-rolled JSON writer so float formatting is pinned to %.9g.
class JsonWriter {
public:
    explicit JsonWriter(std::ostream& out) : out_(out) {}

    void begin_object() { token("{"); push(); }
    void end_object() { pop(); newline(); out_ << "}"; fresh_ = false; }
    void begin_array() { token("["); push(); }
    void end_array() { pop(); newline(); out_ << "]"; fresh_ = false; }

    void key(const std::string& k) {
        comma();
        newline();
        out_ << '"' << k << "\": ";
        fresh_ = true;   // value follows inline
        pending_comma_ = false;
    }

    void value(double v) { token(fmt(v)); }
    void value(long v) { token(std::to_string(v)); }
    void value(int v) { token(std::to_string(v)); }
    void value(const std::string& s) { token('"' + s + '"'); }

    void vec3(const Vec3& v) {
        begin_array();
        value(v.x());
        value(v.y());
        value(v.z());
        end_array();
        pending_comma_ = true;
    }

private:
    void push() { ++indent_; pending_comma_ = false; }
    void pop() { --indent_; }
    void comma() {
        if (pending_comma_) out_ << ",";
    }
    void newline() {
        out_ << "\n";
        for (int i = 0; i < indent_; ++i) out_ << "  ";
    }
    void token(const std::string& s) {
        if (!fresh_) {
            comma();
            newline();
        }
        out_ << s;
        fresh_ = false;
        pending_comma_ = true;
    }

    std::ostream& out_;
    int indent_ = 0;
    bool pending_comma_ = false;
    bool fresh_ = true;   // next token goes inline (start of file / after a key)
};

void write_common_params(JsonWriter& w, const Rotation3& R_cb, const Vec3& t_cb, double t_off,
                         const Vec3& g_w, const Vec3& bw, const Vec3& ba) {
    const Vec3 rv = log_so3(R_cb);
    const Vec3 ypr = zyx_euler_deg(R_cb);
    w.key("rotation_rotvec_rad");
    w.vec3(rv);
    w.key("rotation_angle_deg");
    w.value(rv.norm() * 180.0 / M_PI);
    w.key("rotation_yaw_pitch_roll_deg");
    w.vec3(ypr);
    w.key("translation_m");
    w.vec3(t_cb);
    w.key("translation_cm");
    w.vec3(Vec3(100.0 * t_cb));
    w.key("time_offset_s");
    w.value(t_off);
    w.key("time_offset_ms");
    w.value(1e3 * t_off);
    w.key("gravity_w");
    w.vec3(g_w);
    w.key("gyro_bias");
    w.vec3(bw);
    w.key("accel_bias");
    w.vec3(ba);
}

void write_family(JsonWriter& w, const char* name, const ResidualFamilyStats& s, bool flow_dims) {
    w.key(name);
    w.begin_object();
    w.key("count");
    w.value(s.count);
    w.key("rms");
    w.value(s.rms);
    w.key("mean_norm");
    w.value(s.mean_norm);
    if (flow_dims) {
        w.key("dim_mean");
        w.begin_array();
        w.value(s.dim_mean.x());
        w.value(s.dim_mean.y());
        w.end_array();
        w.key("dim_std");
        w.begin_array();
        w.value(s.dim_std.x());
        w.value(s.dim_std.y());
        w.end_array();
    }
    w.end_object();
}

}  // namespace

Vec3 zyx_euler_deg(const Rotation3& R) {
    const Mat3 m = R.matrix();
    // R = Rz(yaw) Ry(pitch) Rx(roll)
    const double pitch = std::asin(std::clamp(-m(2, 0), -1.0, 1.0));
    double yaw, roll;
    if (std::abs(m(2, 0)) < 1.0 - 1e-12) {
        yaw = std::atan2(m(1, 0), m(0, 0));
        roll = std::atan2(m(2, 1), m(2, 2));
    } else {
        // Gimbal lock: fold everything into yaw.
        yaw = std::atan2(-m(0, 1), m(1, 1));
        roll = 0.0;
    }
    return Vec3(yaw, pitch, roll) * (180.0 / M_PI);
}

std::string serialize_report_json(const CalibrationReport& r) {
    std::ostringstream out;
    JsonWriter w(out);
    w.begin_object();
    write_common_params(w, r.R_cb, r.t_cb, r.t_off, r.g_w, r.gyro_bias, r.accel_bias);

    w.key("residuals");
    w.begin_object();
    write_family(w, "gyro", r.gyro, false);
    write_family(w, "accel", r.accel, false);
    write_family(w, "flow", r.flow, true);
    w.end_object();

    w.key("active_flow_blocks");
    w.value(r.active_flow_blocks);
    w.key("rejected_flow_blocks");
    w.value(r.rejected_flow_blocks);
    w.key("batch_iterations");
    w.value(r.batch_iterations);
    w.key("termination");
    w.value(r.termination);

    w.key("stages");
    w.begin_array();
    for (const StageSnapshot& s : r.stages) {
        w.begin_object();
        w.key("stage");
        w.value(s.stage);
        write_common_params(w, s.R_cb, s.t_cb, s.t_off, s.g_w, s.gyro_bias, s.accel_bias);
        w.key("wall_time_s");
        w.value(s.wall_time_s);
        w.end_object();
    }
    w.end_array();

    w.key("timing");
    w.begin_object();
    w.key("initialization_s");
    w.value(r.init_time_s);
    w.key("batch_s");
    w.value(r.batch_time_s);
    w.key("total_s");
    w.value(r.total_time_s);
    w.end_object();

    w.end_object();
    out << "\n";
    return out.str();
}

void write_report_json(const CalibrationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << serialize_report_json(report);
    if (!out) throw IoError("write failure: " + path);
}

void write_flow_residuals_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write residual csv: " + path);
    out << "t,ru,rv\n";
    for (const auto& [t, res] : report.flow_residuals)
        out << fmt(t) << "," << fmt(res.x()) << "," << fmt(res.y()) << "\n";
    if (!out) throw IoError("write failure: " + path);
}

void write_convergence_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write convergence csv: " + path);
    out << "stage,parameter,value\n";
    for (const StageSnapshot& s : report.stages) {
        auto row = [&](const char* name, double v) {
            out << s.stage << "," << name << "," << fmt(v) << "\n";
        };
        const Vec3 rv = log_so3(s.R_cb);
        row("rotation_x_rad", rv.x());
        row("rotation_y_rad", rv.y());
        row("rotation_z_rad", rv.z());
        row("translation_x_m", s.t_cb.x());
        row("translation_y_m", s.t_cb.y());
        row("translation_z_m", s.t_cb.z());
        row("time_offset_s", s.t_off);
        row("gravity_x", s.g_w.x());
        row("gravity_y", s.g_w.y());
        row("gravity_z", s.g_w.z());
        row("wall_time_s", s.wall_time_s);
    }
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace velocal
