#include <random>

#include "doctest.h"
#include "velocal/so3.hpp"

using namespace velocal;

namespace {
std::mt19937_64 rng(12345);

Vec3 random_vec(double scale) {
    std::normal_distribution<double> g(0.0, scale);
    return Vec3(g(rng), g(rng), g(rng));
}
}  // namespace

TEST_CASE("hat and vee invert each other and encode the cross product") {
    for (int i = 0; i < 100; ++i) {
        const Vec3 v = random_vec(2.0), w = random_vec(2.0);
        CHECK((vee(hat(v)) - v).norm() == 0.0);
        CHECK((hat(v) * w - v.cross(w)).norm() < 1e-15);
        CHECK((hat(v) + hat(v).transpose()).norm() == 0.0);
    }
}

TEST_CASE("exponential map matches an independently computed rotation") {
    // Exp([0.3, -0.2, 0.5]) computed with an external rotation library.
    Mat3 expected;
    expected << 0.85953389855866325, -0.49799153700292209, -0.11491695393636675,
        0.43986763295823095, 0.83531560520670867, -0.32979433769225519,
        0.2602267140480945, 0.23292116428443665, 0.93703243728491803;
    CHECK((exp_so3_matrix(Vec3(0.3, -0.2, 0.5)) - expected).norm() < 1e-14);
}

TEST_CASE("exp/log round trip within 1e-10 over the whole angle range") {
    std::uniform_real_distribution<double> angle(1e-12, M_PI - 1e-7);
    for (int i = 0; i < 1000; ++i) {
        Vec3 axis = random_vec(1.0);
        if (axis.norm() < 1e-6) continue;
        axis.normalize();
        const Vec3 phi = angle(rng) * axis;
        const Vec3 back = log_so3_matrix(exp_so3_matrix(phi));
        CHECK((back - phi).norm() < 1e-10);
    }
    CHECK(log_so3_matrix(Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("log near pi uses the stable branch") {
    // Rotation by pi - 1e-4 about (1, 2, -2)/3; reference from an external library.
    const Vec3 expected(1.0471642178632643, 2.0943284357265286, -2.0943284357265286);
    const Mat3 R = exp_so3_matrix(expected);
    CHECK((log_so3_matrix(R) - expected).norm() < 1e-9);

    // Exactly pi: sign convention pins the largest-magnitude component non-negative.
    for (int a = 0; a < 3; ++a) {
        const Vec3 phi = M_PI * Vec3::Unit(a);
        const Vec3 l = log_so3_matrix(exp_so3_matrix(phi));
        CHECK(l[a] > 0.0);
        CHECK(std::abs(l.norm() - M_PI) < 1e-10);
    }
}

TEST_CASE("right Jacobian linearizes the exponential") {
    for (int i = 0; i < 200; ++i) {
        const Vec3 phi = random_vec(1.0);
        const Vec3 d = random_vec(1.0).normalized();
        const double eps = 1e-6;
        const Mat3 lhs = exp_so3_matrix(phi + eps * d);
        const Mat3 rhs = exp_so3_matrix(phi) * exp_so3_matrix(right_jacobian_so3(phi) * (eps * d));
        CHECK((lhs - rhs).norm() < 1e-10);
    }
}

TEST_CASE("right Jacobian inverse really inverts, including small angles") {
    for (const double scale : {1.0, 1e-3, 1e-7, 1e-10}) {
        for (int i = 0; i < 50; ++i) {
            const Vec3 phi = random_vec(scale);
            const Mat3 prod = right_jacobian_so3(phi) * right_jacobian_inv_so3(phi);
            CHECK((prod - Mat3::Identity()).norm() < 1e-8);
        }
    }
}

TEST_CASE("left Jacobian inverse relates to the right one by negation") {
    const Vec3 phi = Vec3(0.4, -0.7, 0.2);
    CHECK((left_jacobian_inv_so3(phi) - right_jacobian_inv_so3(-phi)).norm() == 0.0);
    // Jl(phi) = R(phi) Jr(phi)
    const Mat3 Jl_inv = left_jacobian_inv_so3(phi);
    const Mat3 Jl = (right_jacobian_so3(-phi));
    CHECK((Jl_inv * Jl - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("long composition chains stay orthonormal") {
    Rotation3 R;
    for (int i = 0; i < 5000; ++i) R = R * exp_so3(random_vec(0.1));
    const Mat3 m = R.matrix();
    CHECK((m * m.transpose() - Mat3::Identity()).norm() < 1e-13);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotation inverse and composition behave like the group") {
    for (int i = 0; i < 100; ++i) {
        const Rotation3 A = exp_so3(random_vec(1.0)), B = exp_so3(random_vec(1.0));
        CHECK(log_so3(A * A.inverse()).norm() < 1e-14);
        const Vec3 v = random_vec(1.0);
        CHECK(((A * B) * v - A * (B * v)).norm() < 1e-13);
        CHECK(((A * B).matrix() - A.matrix() * B.matrix()).norm() < 1e-13);
    }
}
