#pragma once

#include <utility>
#include <vector>

#include "velocal/errors.hpp"
#include "velocal/so3.hpp"

namespace velocal {

/// Cumulative blending matrix for a uniform B-spline of the given order.
/// lambda_j(u) = sum_n cum(j, n) * u^n, with lambda_0(u) == 1.
struct CumulativeBasis {
    int order = 0;
    Eigen::MatrixXd cum;  // order x order

    static const CumulativeBasis& get(int order);

    /// Basis values and derivatives with respect to the normalized time u.
    void eval(double u, Eigen::VectorXd& lam) const;
    void eval(double u, Eigen::VectorXd& lam, Eigen::VectorXd& dlam) const;
    void eval(double u, Eigen::VectorXd& lam, Eigen::VectorXd& dlam, Eigen::VectorXd& ddlam) const;
};

/// Segment lookup shared by both spline types. Control point i is anchored at
/// t0 + i*dt; time t falls in segment i = floor((t - t0)/dt) and is influenced
/// by control points i .. i+order-1. Domain is [t0, t0 + (n-order+1)*dt).
struct SplineLayout {
    int order = 4;
    double t0 = 0.0;
    double dt = 0.1;
    int num_knots = 0;

    double min_time() const { return t0; }
    double max_time() const { return t0 + (num_knots - order + 1) * dt; }

    /// Segment index and normalized time; throws DomainError outside the domain.
    std::pair<int, double> locate(double t) const;
    /// Half-open index range [i, i+order) of the control points influencing t.
    std::pair<int, int> involved_knots(double t) const;
};

/// Uniform cumulative B-spline on R^3 (linear velocity).
class R3Spline {
public:
    R3Spline(int order, double t0, double dt, std::vector<Vec3> control_points);

    /// Constructs a spline whose domain covers [data_start - pad, data_end + pad].
    static R3Spline cover(int order, double data_start, double data_end, double dt, double pad,
                          const Vec3& init = Vec3::Zero());

    const SplineLayout& layout() const { return layout_; }
    int order() const { return layout_.order; }
    double knot_spacing() const { return layout_.dt; }
    double min_time() const { return layout_.min_time(); }
    double max_time() const { return layout_.max_time(); }
    int size() const { return static_cast<int>(pts_.size()); }
    const Vec3& knot(int i) const { return pts_[i]; }
    Vec3& knot(int i) { return pts_[i]; }

    std::pair<int, int> involved_knots(double t) const { return layout_.involved_knots(t); }

    Vec3 eval(double t) const;
    Vec3 eval_derivative(double t, int deriv) const;

    /// Control-point weights: fills w[0..order-1] and the base index so that the
    /// requested derivative equals sum_m w[m] * knot(i0 + m). Evaluation is
    /// linear in the control points, so these are also the Jacobian entries.
    void basis_weights(double t, int deriv, int& i0, double* w) const;

private:
    SplineLayout layout_;
    std::vector<Vec3> pts_;
};

/// One SO(3) spline evaluation with everything the estimator needs at a query
/// time: value, body-frame angular velocity/acceleration, and the Jacobians
/// with respect to right-perturbations of the involved control points.
struct So3SplineEval {
    int knot0 = 0;       // first involved control point
    Rotation3 R;         // R(t), body to world
    Vec3 omega_body;     // Rdot = R * hat(omega_body)
    Vec3 alpha_body;     // d omega_body / dt
    // value Jacobians: perturbing knot (knot0+m) by eps gives R * Exp(dR[m] * eps)
    std::vector<Mat3> dR;
    // d omega_body / d eps_m
    std::vector<Mat3> domega;
};

/// Uniform cumulative B-spline on SO(3) (rotation).
class So3Spline {
public:
    So3Spline(int order, double t0, double dt, std::vector<Rotation3> control_points);

    static So3Spline cover(int order, double data_start, double data_end, double dt, double pad,
                           const Rotation3& init = Rotation3::identity());

    const SplineLayout& layout() const { return layout_; }
    int order() const { return layout_.order; }
    double knot_spacing() const { return layout_.dt; }
    double min_time() const { return layout_.min_time(); }
    double max_time() const { return layout_.max_time(); }
    int size() const { return static_cast<int>(pts_.size()); }
    const Rotation3& knot(int i) const { return pts_[i]; }
    void set_knot(int i, const Rotation3& R) { pts_[i] = R; }

    std::pair<int, int> involved_knots(double t) const { return layout_.involved_knots(t); }

    Rotation3 eval(double t) const;
    /// Body-frame angular velocity (Rdot = R * hat(omega)).
    Vec3 angular_velocity_body(double t) const;
    /// World-frame angular velocity (Rdot = hat(omega) * R).
    Vec3 angular_velocity_world(double t) const;
    Vec3 angular_acceleration_body(double t) const;

    So3SplineEval eval_full(double t, bool with_jacobians) const;

private:
    SplineLayout layout_;
    std::vector<Rotation3> pts_;
};

}  // namespace velocal
