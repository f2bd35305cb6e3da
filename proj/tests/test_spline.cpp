#include <random>

#include "doctest.h"
#include "velocal/spline.hpp"

using namespace velocal;

namespace {

std::mt19937_64 rng(999);

Vec3 random_vec(double s) {
    std::normal_distribution<double> g(0.0, s);
    return Vec3(g(rng), g(rng), g(rng));
}

/// Independent Cox-de Boor recursion on the uniform knot vector
/// xi_m = t0 + (m - order + 1) * dt matching the control-point anchoring
/// (control point m anchored at t0 + m*dt).
double deboor_basis(int i, int k, double t, double t0, double dt) {
    if (k == 1) {
        const double lo = t0 + i * dt, hi = lo + dt;
        return (t >= lo && t < hi) ? 1.0 : 0.0;
    }
    const double lo = t0 + i * dt;
    const double a = (t - lo) / ((k - 1) * dt);
    const double b = (lo + k * dt - t) / ((k - 1) * dt);
    return a * deboor_basis(i, k - 1, t, t0, dt) + b * deboor_basis(i + 1, k - 1, t, t0, dt);
}

double deboor_eval(const std::vector<double>& c, int order, double t0, double dt, double t) {
    // Control point m pairs with basis N_m supported on [xi_m, xi_m + k*dt),
    // xi_m = t0 + (m - order + 1) * dt.
    double v = 0.0;
    for (size_t m = 0; m < c.size(); ++m)
        v += c[m] * deboor_basis(static_cast<int>(m) - (order - 1), order, t, t0, dt);
    return v;
}

}  // namespace

TEST_CASE("cumulative blending matrix for the cubic case matches the known rows") {
    const CumulativeBasis& b = CumulativeBasis::get(4);
    Eigen::MatrixXd expected(4, 4);
    expected << 1.0, 0.0, 0.0, 0.0,
        5.0 / 6.0, 0.5, -0.5, 1.0 / 6.0,
        1.0 / 6.0, 0.5, 0.5, -1.0 / 3.0,
        0.0, 0.0, 0.0, 1.0 / 6.0;
    CHECK((b.cum - expected).norm() < 1e-15);
}

TEST_CASE("cumulative basis properties hold for all supported orders") {
    for (int order = 2; order <= 6; ++order) {
        const CumulativeBasis& b = CumulativeBasis::get(order);
        Eigen::VectorXd lam;
        for (double u : {0.0, 0.2, 0.5, 0.77, 0.999}) {
            b.eval(u, lam);
            CHECK(lam[0] == doctest::Approx(1.0).epsilon(1e-14));                       // lambda_0 == 1
            for (int j = 1; j < order; ++j) {
                CHECK(lam[j] >= -1e-15);                // nonnegative
                CHECK(lam[j] <= lam[j - 1] + 1e-15);    // nonincreasing in j
            }
        }
        // endpoint: lambda_j(1) approaches lambda_{j-1}(0) of the next segment
        // (continuity is exercised on full splines below)
    }
}

TEST_CASE("R3 spline value and derivatives match the de Boor oracle") {
    // Frozen case computed with an external B-spline library: order 4,
    // t0 = 0, dt = 0.5, scalar control points.
    const std::vector<double> c{0.3, -1.2, 2.0, 0.7, -0.5, 1.5, 0.1, 0.9};
    std::vector<Vec3> pts;
    for (double v : c) pts.emplace_back(v, 2.0 * v, -v);
    R3Spline s(4, 0.0, 0.5, pts);

    const double vals[4][4] = {
        {0.0, -0.41666666666666657, 1.7000000000000006, 18.800000000000004},
        {0.375, 0.89583333333333337, 3.5750000000000011, -8.8000000000000025},
        {1.1, 0.47279999999999978, -2.3359999999999999, 2.8800000000000026},
        {2.49, 0.47309919999999994, -0.68575999999999793, 8.3520000000000074}};
    for (const auto& row : vals) {
        CHECK(s.eval(row[0]).x() == doctest::Approx(row[1]).epsilon(1e-12));
        CHECK(s.eval(row[0]).y() == doctest::Approx(2.0 * row[1]).epsilon(1e-12));
        CHECK(s.eval_derivative(row[0], 1).x() == doctest::Approx(row[2]).epsilon(1e-10));
        CHECK(s.eval_derivative(row[0], 2).x() == doctest::Approx(row[3]).epsilon(1e-10));
    }
}

TEST_CASE("R3 spline agrees with the recursive oracle on 1000 random cases") {
    std::uniform_real_distribution<double> uc(-3.0, 3.0);
    std::uniform_int_distribution<int> uorder(2, 6);
    for (int trial = 0; trial < 40; ++trial) {
        const int order = uorder(rng);
        const int n = order + 1 + (trial % 7);
        const double t0 = uc(rng), dt = 0.1 + 0.2 * std::abs(uc(rng));
        std::vector<double> c(n);
        std::vector<Vec3> pts(n);
        for (int i = 0; i < n; ++i) {
            c[i] = uc(rng);
            pts[i] = Vec3(c[i], 0.5 * c[i], -2.0 * c[i]);
        }
        R3Spline s(order, t0, dt, pts);
        std::uniform_real_distribution<double> ut(s.min_time(), s.max_time() - 1e-9);
        for (int q = 0; q < 25; ++q) {
            const double t = ut(rng);
            const double expect = deboor_eval(c, order, t0, dt, t);
            CHECK(s.eval(t).x() == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("R3 spline derivative matches finite differences of itself") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(random_vec(2.0));
    R3Spline s(4, 0.0, 0.3, pts);
    const double h = 1e-6;
    const double h2 = 1e-4;   // larger step for the second difference (roundoff)
    // grid chosen to avoid knot boundaries, where the third derivative jumps
    for (double t = 0.105; t < s.max_time() - 0.1; t += 0.1712) {
        const Vec3 fd1 = (s.eval(t + h) - s.eval(t - h)) / (2.0 * h);
        CHECK((s.eval_derivative(t, 1) - fd1).norm() < 1e-7);
        const Vec3 fd2 = (s.eval(t + h2) - 2.0 * s.eval(t) + s.eval(t - h2)) / (h2 * h2);
        CHECK((s.eval_derivative(t, 2) - fd2).norm() < 1e-5);
    }
}

TEST_CASE("spline queries outside the domain raise a domain error with the interval") {
    std::vector<Vec3> pts(6, Vec3::Zero());
    R3Spline s(4, 1.0, 0.5, pts);
    CHECK(s.min_time() == 1.0);
    CHECK(s.max_time() == doctest::Approx(2.5));
    CHECK_THROWS_AS(s.eval(0.999), DomainError);
    CHECK_THROWS_AS(s.eval(2.5), DomainError);
    CHECK_NOTHROW(s.eval(1.0));
    CHECK_NOTHROW(s.eval(2.4999));
    try {
        s.eval(5.0);
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("5.0") != std::string::npos);
        CHECK(e.lo == doctest::Approx(1.0));
        CHECK(e.hi == doctest::Approx(2.5));
    }
}

TEST_CASE("moving one control point only affects its local support") {
    std::vector<Vec3> pts(14, Vec3::Zero());
    for (auto& p : pts) p = random_vec(1.0);
    R3Spline a(4, 0.0, 0.25, pts);
    pts[7] += Vec3(1.0, 0.0, 0.0);
    R3Spline b(4, 0.0, 0.25, pts);
    for (double t = 0.0; t < a.max_time(); t += 0.01) {
        const bool involved = [&] {
            auto [lo, hi] = a.involved_knots(t);
            return 7 >= lo && 7 < hi;
        }();
        const double diff = (a.eval(t) - b.eval(t)).norm();
        if (involved)
            CHECK(diff >= 0.0);   // may change
        else
            CHECK(diff == 0.0);   // must not
    }
}

TEST_CASE("SO(3) spline reproduces a geodesic exactly") {
    const Vec3 phi(0.04, -0.03, 0.05);   // per-knot increment
    const Rotation3 R0 = exp_so3(Vec3(0.3, 0.1, -0.2));
    std::vector<Rotation3> knots;
    for (int i = 0; i < 10; ++i) knots.push_back(R0 * exp_so3(double(i) * phi));
    const double dt = 0.2;
    So3Spline s(4, 0.0, dt, knots);
    for (double t = 0.0; t < s.max_time() - 1e-9; t += 0.05) {
        // constant body angular velocity phi/dt, zero angular acceleration
        CHECK((s.angular_velocity_body(t) - phi / dt).norm() < 1e-9);
        CHECK(s.angular_acceleration_body(t).norm() < 1e-9);
    }
    // advancing by one knot spacing composes with Exp(phi)
    const Rotation3 r1 = s.eval(0.3), r2 = s.eval(0.3 + dt);
    CHECK(log_so3(r2.inverse() * (r1 * exp_so3(phi))).norm() < 1e-9);
}

TEST_CASE("SO(3) spline is continuous across segment boundaries") {
    std::vector<Rotation3> knots;
    Rotation3 R;
    for (int i = 0; i < 12; ++i) {
        R = R * exp_so3(random_vec(0.3));
        knots.push_back(R);
    }
    So3Spline s(4, 0.0, 0.25, knots);
    for (int seg = 1; seg < 8; ++seg) {
        const double tb = 0.25 * seg;
        const double eps = 1e-9;
        CHECK(log_so3(s.eval(tb - eps).inverse() * s.eval(tb + eps)).norm() < 1e-7);
        CHECK((s.angular_velocity_body(tb - eps) - s.angular_velocity_body(tb + eps)).norm() <
              1e-6);
    }
}

TEST_CASE("SO(3) angular velocity and acceleration match finite differences") {
    std::vector<Rotation3> knots;
    Rotation3 R;
    for (int i = 0; i < 12; ++i) {
        R = R * exp_so3(random_vec(0.4));
        knots.push_back(R);
    }
    for (int order : {3, 4, 5}) {
        So3Spline s(order, 0.0, 0.25, knots);
        const double h = 1e-6;
        // the grid step is chosen to stay away from knot boundaries, where
        // low orders are not smooth and finite differences are meaningless
        for (double t = 0.1; t < s.max_time() - 0.1; t += 0.1137) {
            const Vec3 w_fd =
                log_so3(s.eval(t - h).inverse() * s.eval(t + h)) / (2.0 * h);
            CHECK((s.angular_velocity_body(t) - w_fd).norm() < 2e-6);
            const Vec3 a_fd =
                (s.angular_velocity_body(t + h) - s.angular_velocity_body(t - h)) / (2.0 * h);
            CHECK((s.angular_acceleration_body(t) - a_fd).norm() < 2e-5);
        }
        // world-frame angular velocity: omega_w = R omega_b
        const double t = 1.0;
        CHECK((s.angular_velocity_world(t) -
               s.eval(t).matrix() * s.angular_velocity_body(t))
                  .norm() < 1e-12);
    }
}

TEST_CASE("SO(3) spline control-point Jacobians match central differences") {
    std::vector<Rotation3> knots;
    Rotation3 R;
    for (int i = 0; i < 8; ++i) {
        R = R * exp_so3(random_vec(0.4));
        knots.push_back(R);
    }
    So3Spline s(4, 0.0, 0.25, knots);
    const double t = 0.63;
    const So3SplineEval e = s.eval_full(t, true);
    const double h = 1e-6;
    for (int m = 0; m < 4; ++m) {
        const int ki = e.knot0 + m;
        for (int d = 0; d < 3; ++d) {
            So3Spline sp = s, sm = s;
            const Vec3 step = h * Vec3::Unit(d);
            sp.set_knot(ki, s.knot(ki) * exp_so3(step));
            sm.set_knot(ki, s.knot(ki) * exp_so3(-step));
            // value Jacobian, right perturbation of R(t)
            const Vec3 dr_fd =
                log_so3(e.R.inverse() * sp.eval(t)) / h;   // one-sided on the manifold
            const Vec3 dr_fd2 = -log_so3(e.R.inverse() * sm.eval(t)) / h;
            const Vec3 dr_an = e.dR[m].col(d);
            CHECK((0.5 * (dr_fd + dr_fd2) - dr_an).norm() < 1e-5);
            // angular velocity Jacobian
            const Vec3 dw_fd =
                (sp.angular_velocity_body(t) - sm.angular_velocity_body(t)) / (2.0 * h);
            CHECK((dw_fd - e.domega[m].col(d)).norm() < 1e-5);
        }
    }
}

TEST_CASE("cover factory pads the requested data span") {
    const R3Spline s = R3Spline::cover(4, 2.0, 7.0, 0.05, 0.1);
    CHECK(s.min_time() <= 1.9);
    CHECK(s.max_time() > 7.1);
    const So3Spline r = So3Spline::cover(4, 0.0, 30.0, 0.05, 0.1);
    CHECK(r.min_time() <= -0.1);
    CHECK(r.max_time() > 30.1);
}
