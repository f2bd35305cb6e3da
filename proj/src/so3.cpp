#include "velocal/so3.hpp"

#include <cmath>

namespace velocal {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 exp_so3_matrix(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 W = hat(phi);
    if (theta2 < kSmallAngle * kSmallAngle) {
        // second-order Taylor: I + W + W^2/2
        return Mat3::Identity() + W + 0.5 * W * W;
    }
    const double theta = std::sqrt(theta2);
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    return Mat3::Identity() + a * W + b * W * W;
}

Vec3 log_so3_matrix(const Mat3& R) {
    const double tr = R.trace();
    const double cos_theta = 0.5 * (tr - 1.0);

    if (cos_theta > 1.0 - 1e-10) {
        // near identity: first-order with skew part
        const Vec3 w = vee(R - R.transpose()) * 0.5;
        // theta ~ |w|, sin(theta) ~ theta: w already ~ phi to second order
        return w;
    }
    if (cos_theta < -1.0 + 1e-8) {
        // near pi: per-axis magnitudes from the diagonal,
        // a_i^2 = (R_ii - cos)/(1 - cos), relative signs from the symmetric
        // off-diagonal part (the skew part vanishes here and carries no axis info)
        const double theta = std::acos(std::max(-1.0, cos_theta));
        Vec3 axis;
        for (int i = 0; i < 3; ++i)
            axis[i] = std::sqrt(std::max(0.0, (R(i, i) - cos_theta) / (1.0 - cos_theta)));
        int k = 0;
        axis.maxCoeff(&k);
        for (int i = 0; i < 3; ++i)
            if (i != k && R(k, i) + R(i, k) < 0.0) axis[i] = -axis[i];
        axis.normalize();
        // sign: the skew part is 2 sin(theta) * axis, nonzero strictly below pi;
        // only at pi itself fall back to the largest-component convention
        const Vec3 s = vee(R - R.transpose());
        if (s.norm() > 1e-12) {
            if (s.dot(axis) < 0.0) axis = -axis;
        } else {
            int j = 0;
            axis.cwiseAbs().maxCoeff(&j);
            if (axis[j] < 0.0) axis = -axis;
        }
        return theta * axis;
    }
    const double theta = std::acos(cos_theta);
    return theta / (2.0 * std::sin(theta)) * vee(R - R.transpose());
}

Mat3 right_jacobian_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 W = hat(phi);
    if (theta2 < kSmallAngle * kSmallAngle) {
        return Mat3::Identity() - 0.5 * W + (1.0 / 6.0) * W * W;
    }
    const double theta = std::sqrt(theta2);
    const double a = (1.0 - std::cos(theta)) / theta2;
    const double b = (theta - std::sin(theta)) / (theta2 * theta);
    return Mat3::Identity() - a * W + b * W * W;
}

Mat3 right_jacobian_inv_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 W = hat(phi);
    if (theta2 < kSmallAngle * kSmallAngle) {
        return Mat3::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
    }
    const double theta = std::sqrt(theta2);
    const double c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Mat3::Identity() + 0.5 * W + c * W * W;
}

}  // namespace velocal
