#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace velocal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// hat(v) * w == v x w
inline Mat3 hat(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

inline Vec3 vee(const Mat3& m) {
    return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

Mat3 exp_so3_matrix(const Vec3& phi);
Vec3 log_so3_matrix(const Mat3& R);

/// Right Jacobian of SO(3): Exp(phi + d) = Exp(phi) * Exp(Jr(phi) * d) to first order.
Mat3 right_jacobian_so3(const Vec3& phi);
Mat3 right_jacobian_inv_so3(const Vec3& phi);

/// Left Jacobian inverse; Jl(phi) = Jr(-phi).
inline Mat3 left_jacobian_inv_so3(const Vec3& phi) { return right_jacobian_inv_so3(-phi); }

/// Element of SO(3). Unit quaternion storage, matrix form for evaluation.
/// Composition renormalizes, so long chains stay orthonormal.
class Rotation3 {
public:
    Rotation3() : q_(Eigen::Quaterniond::Identity()) {}
    explicit Rotation3(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
    explicit Rotation3(const Mat3& R) : q_(Eigen::Quaterniond(R).normalized()) {}

    static Rotation3 identity() { return Rotation3(); }

    Mat3 matrix() const { return q_.toRotationMatrix(); }
    const Eigen::Quaterniond& quaternion() const { return q_; }

    Rotation3 operator*(const Rotation3& rhs) const { return Rotation3(q_ * rhs.q_); }
    Vec3 operator*(const Vec3& v) const { return q_ * v; }

    Rotation3 inverse() const { return Rotation3(q_.conjugate()); }

private:
    Eigen::Quaterniond q_;
};

/// Rodrigues exponential; second-order Taylor below 1e-8 rad.
inline Rotation3 exp_so3(const Vec3& phi) { return Rotation3(exp_so3_matrix(phi)); }

/// Principal axis-angle, |result| <= pi. Near pi the axis comes from the
/// largest diagonal element of R; sign convention: largest-magnitude axis
/// component is non-negative.
inline Vec3 log_so3(const Rotation3& R) { return log_so3_matrix(R.matrix()); }

}  // namespace velocal
