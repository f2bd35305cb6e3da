#include "velocal/config.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "velocal/errors.hpp"

namespace velocal {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw ValidationError(where + ": " + msg);
}

/// Object wrapper that remembers which keys were consumed so anything left
/// over can be reported by name.
class ObjReader {
public:
    ObjReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail(where_, "expected a JSON object");
    }

    template <typename T>
    T get(const std::string& key, const T& def) {
        seen_.insert(key);
        if (!j_.contains(key)) return def;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(where_ + "." + key, "wrong type");
        }
    }

    Vec3 get_vec3(const std::string& key, const Vec3& def) {
        const std::array<double, 3> d{def.x(), def.y(), def.z()};
        const auto a = get<std::array<double, 3>>(key, d);
        return Vec3(a[0], a[1], a[2]);
    }

    const json* sub(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) fail(where_, "unknown key '" + item.key() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void require_positive(double v, const std::string& where) {
    if (!(v > 0.0)) fail(where, "must be positive");
}

NoiseConfig parse_noise(const json& j, const std::string& where) {
    ObjReader r(j, where);
    NoiseConfig n;
    n.sigma_gyro = r.get("sigma_gyro", n.sigma_gyro);
    n.sigma_acc = r.get("sigma_acc", n.sigma_acc);
    n.sigma_pixel_vel = r.get("sigma_pixel_vel", n.sigma_pixel_vel);
    n.sigma_depth_rel = r.get("sigma_depth_rel", n.sigma_depth_rel);
    n.huber_gyro = r.get("huber_gyro", n.huber_gyro);
    n.huber_acc = r.get("huber_acc", n.huber_acc);
    n.huber_flow = r.get("huber_flow", n.huber_flow);
    r.finish();
    require_positive(n.sigma_gyro, where + ".sigma_gyro");
    require_positive(n.sigma_acc, where + ".sigma_acc");
    require_positive(n.sigma_pixel_vel, where + ".sigma_pixel_vel");
    require_positive(n.sigma_depth_rel, where + ".sigma_depth_rel");
    return n;
}

json noise_to_json(const NoiseConfig& n) {
    json j;
    j["sigma_gyro"] = n.sigma_gyro;
    j["sigma_acc"] = n.sigma_acc;
    j["sigma_pixel_vel"] = n.sigma_pixel_vel;
    j["sigma_depth_rel"] = n.sigma_depth_rel;
    j["huber_gyro"] = n.huber_gyro;
    j["huber_acc"] = n.huber_acc;
    j["huber_flow"] = n.huber_flow;
    return j;
}

CameraIntrinsics parse_intrinsics(const json& j, const std::string& where) {
    ObjReader r(j, where);
    CameraIntrinsics k;
    k.fx = r.get("fx", k.fx);
    k.fy = r.get("fy", k.fy);
    k.cx = r.get("cx", k.cx);
    k.cy = r.get("cy", k.cy);
    k.width = r.get("width", k.width);
    k.height = r.get("height", k.height);
    r.finish();
    require_positive(k.fx, where + ".fx");
    require_positive(k.fy, where + ".fy");
    try {
        k.validate();
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    return k;
}

json intrinsics_to_json(const CameraIntrinsics& k) {
    json j;
    j["fx"] = k.fx;
    j["fy"] = k.fy;
    j["cx"] = k.cx;
    j["cy"] = k.cy;
    j["width"] = k.width;
    j["height"] = k.height;
    return j;
}

RansacParams parse_ransac(const json& j, const std::string& where) {
    ObjReader r(j, where);
    RansacParams p;
    p.confidence = r.get("confidence", p.confidence);
    p.max_iterations = r.get("max_iterations", p.max_iterations);
    p.min_inlier_ratio = r.get("min_inlier_ratio", p.min_inlier_ratio);
    p.inlier_threshold_rel = r.get("inlier_threshold_rel", p.inlier_threshold_rel);
    p.inlier_threshold_abs = r.get("inlier_threshold_abs", p.inlier_threshold_abs);
    p.seed = r.get("seed", p.seed);
    r.finish();
    if (!(p.confidence > 0.0 && p.confidence < 1.0)) fail(where + ".confidence", "must be in (0, 1)");
    if (p.max_iterations <= 0) fail(where + ".max_iterations", "must be positive");
    return p;
}

json ransac_to_json(const RansacParams& p) {
    json j;
    j["confidence"] = p.confidence;
    j["max_iterations"] = p.max_iterations;
    j["min_inlier_ratio"] = p.min_inlier_ratio;
    j["inlier_threshold_rel"] = p.inlier_threshold_rel;
    j["inlier_threshold_abs"] = p.inlier_threshold_abs;
    j["seed"] = p.seed;
    return j;
}

std::vector<sim::Sinusoid> parse_sinusoids(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where, "expected an array of [amp, freq, phase] triplets");
    std::vector<sim::Sinusoid> out;
    for (size_t i = 0; i < j.size(); ++i) {
        std::array<double, 3> a;
        try {
            a = j.at(i).get<std::array<double, 3>>();
        } catch (const json::exception&) {
            fail(where, "entry " + std::to_string(i) + " is not an [amp, freq, phase] triplet");
        }
        out.push_back({a[0], a[1], a[2]});
    }
    return out;
}

json sinusoids_to_json(const std::vector<sim::Sinusoid>& terms) {
    json j = json::array();
    for (const sim::Sinusoid& s : terms) j.push_back({s.amp, s.freq, s.phase});
    return j;
}

json parse_text(const std::string& text, const std::string& name) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(name + ": " + e.what());
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void CalibConfig::validate() const {
    require_positive(dt_rot, "dt_rot");
    require_positive(dt_vel, "dt_vel");
    if (spline_order < 2 || spline_order > 6) fail("spline_order", "must be in [2, 6]");
    noise.validate();
    require_positive(max_time_offset, "max_time_offset");
    require_positive(gravity_magnitude, "gravity_magnitude");
    if (outer_rounds < 1) fail("outer_rounds", "must be at least 1");
    if (min_features < 3) fail("min_features", "must be at least 3");
    if (!(min_depth > 0.0) || !(max_depth > min_depth))
        fail("min_depth/max_depth", "must satisfy 0 < min < max");
    intrinsics.validate();
}

CalibConfig parse_calib_config(const std::string& text, const std::string& name) {
    const json j = parse_text(text, name);
    ObjReader r(j, name);
    CalibConfig c;
    c.dt_rot = r.get("dt_rot", c.dt_rot);
    c.dt_vel = r.get("dt_vel", c.dt_vel);
    c.spline_order = r.get("spline_order", c.spline_order);
    if (const json* s = r.sub("noise")) c.noise = parse_noise(*s, name + ".noise");
    if (const json* s = r.sub("ransac")) c.ransac = parse_ransac(*s, name + ".ransac");
    c.max_time_offset = r.get("max_time_offset", c.max_time_offset);
    c.gravity_magnitude = r.get("gravity_magnitude", c.gravity_magnitude);
    c.outer_rounds = r.get("outer_rounds", c.outer_rounds);
    c.min_features = r.get("min_features", c.min_features);
    c.min_depth = r.get("min_depth", c.min_depth);
    c.max_depth = r.get("max_depth", c.max_depth);
    c.seed = r.get("seed", c.seed);
    if (const json* s = r.sub("intrinsics")) c.intrinsics = parse_intrinsics(*s, name + ".intrinsics");
    r.finish();
    c.validate();
    return c;
}

std::string serialize_calib_config(const CalibConfig& c) {
    json j;
    j["dt_rot"] = c.dt_rot;
    j["dt_vel"] = c.dt_vel;
    j["spline_order"] = c.spline_order;
    j["noise"] = noise_to_json(c.noise);
    j["ransac"] = ransac_to_json(c.ransac);
    j["max_time_offset"] = c.max_time_offset;
    j["gravity_magnitude"] = c.gravity_magnitude;
    j["outer_rounds"] = c.outer_rounds;
    j["min_features"] = c.min_features;
    j["min_depth"] = c.min_depth;
    j["max_depth"] = c.max_depth;
    j["seed"] = c.seed;
    j["intrinsics"] = intrinsics_to_json(c.intrinsics);
    return j.dump(2) + "\n";
}

CalibConfig read_calib_config(const std::string& path) {
    return parse_calib_config(slurp(path), path);
}

void write_calib_config(const CalibConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << serialize_calib_config(cfg);
    if (!out) throw IoError("write failure: " + path);
}

void SimConfig::validate() const {
    trajectory.validate();
    rig.validate();
    if (world.landmarks <= 0) fail("world.landmarks", "must be positive");
}

SimConfig parse_sim_config(const std::string& text, const std::string& name) {
    const json j = parse_text(text, name);
    ObjReader r(j, name);
    SimConfig c;

    if (const json* s = r.sub("trajectory")) {
        ObjReader tr(*s, name + ".trajectory");
        const double duration = tr.get("duration", 30.0);
        require_positive(duration, name + ".trajectory.duration");
        c.trajectory = sim::TrajectorySpec::standard(duration);
        static const char* axes[3] = {"x", "y", "z"};
        if (const json* p = tr.sub("position")) {
            if (!p->is_array() || p->size() != 3)
                fail(name + ".trajectory.position", "expected 3 per-axis sinusoid lists");
            for (int a = 0; a < 3; ++a)
                c.trajectory.position[a] =
                    parse_sinusoids(p->at(a), name + ".trajectory.position." + axes[a]);
        }
        if (const json* p = tr.sub("rotation")) {
            if (!p->is_array() || p->size() != 3)
                fail(name + ".trajectory.rotation", "expected 3 per-axis sinusoid lists");
            for (int a = 0; a < 3; ++a)
                c.trajectory.rotation[a] =
                    parse_sinusoids(p->at(a), name + ".trajectory.rotation." + axes[a]);
        }
        tr.finish();
    }

    if (const json* s = r.sub("world")) {
        ObjReader w(*s, name + ".world");
        const std::string shape = w.get<std::string>("shape", "shell");
        if (shape == "shell")
            c.world.shape = sim::WorldSpec::Shape::Shell;
        else if (shape == "box")
            c.world.shape = sim::WorldSpec::Shape::Box;
        else
            fail(name + ".world.shape", "must be 'shell' or 'box'");
        c.world.landmarks = w.get("landmarks", c.world.landmarks);
        c.world.near = w.get("near", c.world.near);
        c.world.far = w.get("far", c.world.far);
        c.world.seed = w.get("seed", c.world.seed);
        w.finish();
        if (c.world.landmarks <= 0) fail(name + ".world.landmarks", "must be positive");
    }

    if (const json* s = r.sub("rig")) {
        ObjReader g(*s, name + ".rig");
        sim::SensorRig& rig = c.rig;
        rig.R_cb = exp_so3(g.get_vec3("r_cb_rotvec", Vec3::Zero()));
        rig.t_cb = g.get_vec3("t_cb", rig.t_cb);
        rig.t_off = g.get("t_off", rig.t_off);
        rig.biases.gyro_bias = g.get_vec3("gyro_bias", rig.biases.gyro_bias);
        rig.biases.accel_bias = g.get_vec3("accel_bias", rig.biases.accel_bias);
        rig.gravity_magnitude = g.get("gravity_magnitude", rig.gravity_magnitude);
        rig.g_w = g.get_vec3("g_w", Vec3(0.0, 0.0, -rig.gravity_magnitude));
        rig.imu_rate = g.get("imu_rate", rig.imu_rate);
        rig.frame_rate = g.get("frame_rate", rig.frame_rate);
        rig.noisy = g.get("noisy", rig.noisy);
        rig.sigma_gyro = g.get("sigma_gyro", rig.sigma_gyro);
        rig.sigma_acc = g.get("sigma_acc", rig.sigma_acc);
        rig.sigma_pixel = g.get("sigma_pixel", rig.sigma_pixel);
        rig.sigma_depth_rel = g.get("sigma_depth_rel", rig.sigma_depth_rel);
        rig.outlier_fraction = g.get("outlier_fraction", rig.outlier_fraction);
        rig.seed = g.get("seed", rig.seed);
        rig.min_depth = g.get("min_depth", rig.min_depth);
        rig.max_depth = g.get("max_depth", rig.max_depth);
        if (const json* k = g.sub("intrinsics"))
            rig.intrinsics = parse_intrinsics(*k, name + ".rig.intrinsics");
        g.finish();
        require_positive(rig.imu_rate, name + ".rig.imu_rate");
        require_positive(rig.frame_rate, name + ".rig.frame_rate");
    }
    r.finish();
    c.validate();
    return c;
}

std::string serialize_sim_config(const SimConfig& c) {
    json j;
    json tr;
    tr["duration"] = c.trajectory.duration;
    tr["position"] = {sinusoids_to_json(c.trajectory.position[0]),
                      sinusoids_to_json(c.trajectory.position[1]),
                      sinusoids_to_json(c.trajectory.position[2])};
    tr["rotation"] = {sinusoids_to_json(c.trajectory.rotation[0]),
                      sinusoids_to_json(c.trajectory.rotation[1]),
                      sinusoids_to_json(c.trajectory.rotation[2])};
    j["trajectory"] = std::move(tr);

    json w;
    w["shape"] = c.world.shape == sim::WorldSpec::Shape::Shell ? "shell" : "box";
    w["landmarks"] = c.world.landmarks;
    w["near"] = c.world.near;
    w["far"] = c.world.far;
    w["seed"] = c.world.seed;
    j["world"] = std::move(w);

    json g;
    const Vec3 rv = log_so3(c.rig.R_cb);
    g["r_cb_rotvec"] = {rv.x(), rv.y(), rv.z()};
    g["t_cb"] = {c.rig.t_cb.x(), c.rig.t_cb.y(), c.rig.t_cb.z()};
    g["t_off"] = c.rig.t_off;
    g["gyro_bias"] = {c.rig.biases.gyro_bias.x(), c.rig.biases.gyro_bias.y(),
                      c.rig.biases.gyro_bias.z()};
    g["accel_bias"] = {c.rig.biases.accel_bias.x(), c.rig.biases.accel_bias.y(),
                       c.rig.biases.accel_bias.z()};
    g["gravity_magnitude"] = c.rig.gravity_magnitude;
    g["g_w"] = {c.rig.g_w.x(), c.rig.g_w.y(), c.rig.g_w.z()};
    g["imu_rate"] = c.rig.imu_rate;
    g["frame_rate"] = c.rig.frame_rate;
    g["noisy"] = c.rig.noisy;
    g["sigma_gyro"] = c.rig.sigma_gyro;
    g["sigma_acc"] = c.rig.sigma_acc;
    g["sigma_pixel"] = c.rig.sigma_pixel;
    g["sigma_depth_rel"] = c.rig.sigma_depth_rel;
    g["outlier_fraction"] = c.rig.outlier_fraction;
    g["seed"] = c.rig.seed;
    g["min_depth"] = c.rig.min_depth;
    g["max_depth"] = c.rig.max_depth;
    g["intrinsics"] = intrinsics_to_json(c.rig.intrinsics);
    j["rig"] = std::move(g);
    return j.dump(2) + "\n";
}

SimConfig read_sim_config(const std::string& path) { return parse_sim_config(slurp(path), path); }

void write_sim_config(const SimConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << serialize_sim_config(cfg);
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace velocal
