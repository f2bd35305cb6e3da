#include "velocal/sensors.hpp"

namespace velocal {

Vec2 project(const Vec3& p, const CameraIntrinsics& intr) {
    if (p.z() <= 0.0) throw ValidationError("projection requires positive depth");
    return Vec2(intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy);
}

Vec3 back_project(const Vec2& pixel, double depth, const CameraIntrinsics& intr) {
    if (depth <= 0.0) throw ValidationError("back-projection requires positive depth");
    return Vec3((pixel.x() - intr.cx) / intr.fx * depth,
                (pixel.y() - intr.cy) / intr.fy * depth, depth);
}

InteractionMatrices interaction_matrices(const Vec2& pixel, const CameraIntrinsics& intr) {
    const double up = pixel.x() - intr.cx;
    const double vp = pixel.y() - intr.cy;
    InteractionMatrices m;
    m.A << -intr.fx, 0.0, up,
           0.0, -intr.fy, vp;
    m.B << up * vp / intr.fy, -intr.fx - up * up / intr.fx, intr.fx * vp / intr.fy,
           intr.fy + vp * vp / intr.fy, -up * vp / intr.fx, -intr.fy * up / intr.fx;
    return m;
}

PixelVelocity optical_flow(const Vec2& pixel, double depth, const Vec3& v_c, const Vec3& w_c,
                           const CameraIntrinsics& intr, double t) {
    if (depth <= 0.0) throw ValidationError("optical flow requires positive depth");
    const InteractionMatrices m = interaction_matrices(pixel, intr);
    return {t, (1.0 / depth) * (m.A * v_c) + m.B * w_c};
}

PixelVelocity pixel_velocity_lagrange(const std::array<FeatureObservation, 3>& window) {
    const double t0 = window[0].t, t1 = window[1].t, t2 = window[2].t;
    if (!(t0 < t1 && t1 < t2))
        throw ValidationError("Lagrange window requires strictly increasing timestamps");
    // derivative of the interpolating quadratic at the middle node
    const double c0 = (t1 - t2) / ((t0 - t1) * (t0 - t2));
    const double c1 = 1.0 / (t1 - t0) + 1.0 / (t1 - t2);
    const double c2 = (t1 - t0) / ((t2 - t0) * (t2 - t1));
    PixelVelocity out;
    out.t = t1;
    out.vel = c0 * window[0].pixel + c1 * window[1].pixel + c2 * window[2].pixel;
    return out;
}

}  // namespace velocal
