#include "velocal/spline.hpp"

#include <array>
#include <cmath>

namespace velocal {

namespace {

double binom(int n, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

Eigen::MatrixXd blending_matrix(int k) {
    // m(s, n) = C(k-1, n)/(k-1)! * sum_{l=s}^{k-1} (-1)^{l-s} C(k, l-s) (k-1-l)^{k-1-n}
    Eigen::MatrixXd m(k, k);
    double fact = 1.0;
    for (int i = 2; i < k; ++i) fact *= i;
    for (int s = 0; s < k; ++s) {
        for (int n = 0; n < k; ++n) {
            double sum = 0.0;
            for (int l = s; l < k; ++l) {
                sum += ((l - s) % 2 == 0 ? 1.0 : -1.0) * binom(k, l - s) *
                       std::pow(double(k - 1 - l), double(k - 1 - n));
            }
            m(s, n) = binom(k - 1, n) / fact * sum;
        }
    }
    return m;
}

CumulativeBasis make_basis(int k) {
    const Eigen::MatrixXd m = blending_matrix(k);
    CumulativeBasis b;
    b.order = k;
    b.cum = Eigen::MatrixXd::Zero(k, k);
    for (int s = 0; s < k; ++s)
        for (int l = s; l < k; ++l) b.cum.row(s) += m.row(l);
    return b;
}

}  // namespace

const CumulativeBasis& CumulativeBasis::get(int order) {
    if (order < 2 || order > 6) throw ValidationError("spline order must be in [2, 6]");
    static const std::array<CumulativeBasis, 5> cache = {
        make_basis(2), make_basis(3), make_basis(4), make_basis(5), make_basis(6)};
    return cache[order - 2];
}

void CumulativeBasis::eval(double u, Eigen::VectorXd& lam) const {
    Eigen::VectorXd up(order);
    up[0] = 1.0;
    for (int n = 1; n < order; ++n) up[n] = up[n - 1] * u;
    lam = cum * up;
}

void CumulativeBasis::eval(double u, Eigen::VectorXd& lam, Eigen::VectorXd& dlam) const {
    eval(u, lam);
    Eigen::VectorXd dup = Eigen::VectorXd::Zero(order);
    for (int n = 1; n < order; ++n) dup[n] = n * std::pow(u, n - 1);
    dlam = cum * dup;
}

void CumulativeBasis::eval(double u, Eigen::VectorXd& lam, Eigen::VectorXd& dlam,
                           Eigen::VectorXd& ddlam) const {
    eval(u, lam, dlam);
    Eigen::VectorXd ddup = Eigen::VectorXd::Zero(order);
    for (int n = 2; n < order; ++n) ddup[n] = n * (n - 1) * std::pow(u, n - 2);
    ddlam = cum * ddup;
}

std::pair<int, double> SplineLayout::locate(double t) const {
    const double x = (t - t0) / dt;
    const int last = num_knots - order;
    int i = static_cast<int>(std::floor(x));
    if (i < 0 || i > last || t >= max_time()) throw DomainError(t, min_time(), max_time());
    return {i, x - i};
}

std::pair<int, int> SplineLayout::involved_knots(double t) const {
    const auto [i, u] = locate(t);
    (void)u;
    return {i, i + order};
}

R3Spline::R3Spline(int order, double t0, double dt, std::vector<Vec3> control_points)
    : layout_{order, t0, dt, static_cast<int>(control_points.size())},
      pts_(std::move(control_points)) {
    if (dt <= 0.0) throw ValidationError("knot spacing must be positive");
    if (static_cast<int>(pts_.size()) < order)
        throw ValidationError("need at least 'order' control points");
    CumulativeBasis::get(order);  // validates order
}

R3Spline R3Spline::cover(int order, double data_start, double data_end, double dt, double pad,
                         const Vec3& init) {
    const double lo = data_start - pad;
    const double hi = data_end + pad;
    if (hi <= lo) throw ValidationError("empty data span");
    const int segments = static_cast<int>(std::ceil((hi - lo) / dt)) + 1;
    return R3Spline(order, lo, dt, std::vector<Vec3>(segments + order - 1, init));
}

void R3Spline::basis_weights(double t, int deriv, int& i0, double* w) const {
    const int k = layout_.order;
    const auto [i, u] = layout_.locate(t);
    i0 = i;
    const CumulativeBasis& basis = CumulativeBasis::get(k);
    Eigen::VectorXd lam, d1, d2;
    const Eigen::VectorXd* lp = nullptr;
    double scale = 1.0;
    switch (deriv) {
        case 0: basis.eval(u, lam); lp = &lam; break;
        case 1: basis.eval(u, lam, d1); lp = &d1; scale = 1.0 / layout_.dt; break;
        case 2: basis.eval(u, lam, d1, d2); lp = &d2; scale = 1.0 / (layout_.dt * layout_.dt); break;
        default: throw ValidationError("derivative order must be 0, 1 or 2");
    }
    const Eigen::VectorXd& l = *lp;
    // v(t) = v_i + sum_j lam_j (v_{i+j} - v_{i+j-1}); regroup per control point.
    w[0] = ((deriv == 0) ? 1.0 : 0.0) - l[1] * scale;
    for (int m = 1; m < k - 1; ++m) w[m] = (l[m] - l[m + 1]) * scale;
    w[k - 1] = l[k - 1] * scale;
}

Vec3 R3Spline::eval(double t) const { return eval_derivative(t, 0); }

Vec3 R3Spline::eval_derivative(double t, int deriv) const {
    const int k = layout_.order;
    int i0 = 0;
    double w[8];
    basis_weights(t, deriv, i0, w);
    Vec3 out = Vec3::Zero();
    for (int m = 0; m < k; ++m) out += w[m] * pts_[i0 + m];
    return out;
}

So3Spline::So3Spline(int order, double t0, double dt, std::vector<Rotation3> control_points)
    : layout_{order, t0, dt, static_cast<int>(control_points.size())},
      pts_(std::move(control_points)) {
    if (dt <= 0.0) throw ValidationError("knot spacing must be positive");
    if (static_cast<int>(pts_.size()) < order)
        throw ValidationError("need at least 'order' control points");
    CumulativeBasis::get(order);
}

So3Spline So3Spline::cover(int order, double data_start, double data_end, double dt, double pad,
                           const Rotation3& init) {
    const double lo = data_start - pad;
    const double hi = data_end + pad;
    if (hi <= lo) throw ValidationError("empty data span");
    const int segments = static_cast<int>(std::ceil((hi - lo) / dt)) + 1;
    return So3Spline(order, lo, dt, std::vector<Rotation3>(segments + order - 1, init));
}

Rotation3 So3Spline::eval(double t) const { return eval_full(t, false).R; }

Vec3 So3Spline::angular_velocity_body(double t) const { return eval_full(t, false).omega_body; }

Vec3 So3Spline::angular_velocity_world(double t) const {
    const So3SplineEval e = eval_full(t, false);
    return e.R * e.omega_body;
}

Vec3 So3Spline::angular_acceleration_body(double t) const {
    return eval_full(t, false).alpha_body;
}

So3SplineEval So3Spline::eval_full(double t, bool with_jacobians) const {
    const int k = layout_.order;
    const auto [i, u] = layout_.locate(t);

    Eigen::VectorXd lam, dlam, ddlam;
    CumulativeBasis::get(k).eval(u, lam, dlam, ddlam);
    const double inv_dt = 1.0 / layout_.dt;

    // increments d_j = Log(R_{i+j-1}^T R_{i+j}) and factors A_j = Exp(lam_j d_j)
    std::vector<Vec3> d(k);
    std::vector<Mat3> A(k);
    for (int j = 1; j < k; ++j) {
        d[j] = log_so3(pts_[i + j - 1].inverse() * pts_[i + j]);
        A[j] = exp_so3_matrix(lam[j] * d[j]);
    }

    So3SplineEval out;
    out.knot0 = i;

    // value, body angular velocity and acceleration by forward recursion
    Mat3 R = pts_[i].matrix();
    Vec3 omega = Vec3::Zero();
    Vec3 alpha = Vec3::Zero();
    for (int j = 1; j < k; ++j) {
        R = R * A[j];
        const double ld = dlam[j] * inv_dt;
        const double ldd = ddlam[j] * inv_dt * inv_dt;
        const Vec3 At_omega = A[j].transpose() * omega;
        alpha = A[j].transpose() * alpha - ld * d[j].cross(At_omega) + ldd * d[j];
        omega = At_omega + ld * d[j];
    }
    out.R = Rotation3(R);
    out.omega_body = omega;
    out.alpha_body = alpha;

    if (!with_jacobians) return out;

    // suffix products P_j = A_{j+1} * ... * A_{k-1}  (P_{k-1} = I)
    std::vector<Mat3> P(k);
    P[k - 1] = Mat3::Identity();
    for (int j = k - 2; j >= 0; --j) P[j] = A[j + 1] * P[j + 1];

    // S_m = sum_{j<m} (dlam_j/dt) hat(P_j^T d_j)
    std::vector<Mat3> S(k, Mat3::Zero());
    for (int m = 2; m < k; ++m)
        S[m] = S[m - 1] + dlam[m - 1] * inv_dt * hat(P[m - 1].transpose() * d[m - 1]);

    out.dR.assign(k, Mat3::Zero());
    out.domega.assign(k, Mat3::Zero());
    for (int m = 0; m < k; ++m) {
        if (m == 0) out.dR[0] += P[0].transpose();
        if (m >= 1) {
            const Mat3 G = lam[m] * right_jacobian_so3(lam[m] * d[m]) * right_jacobian_inv_so3(d[m]);
            out.dR[m] += P[m].transpose() * G;
            out.domega[m] += (lam[m] * S[m] * P[m].transpose() * right_jacobian_so3(lam[m] * d[m]) +
                              dlam[m] * inv_dt * P[m].transpose()) *
                             right_jacobian_inv_so3(d[m]);
        }
        if (m <= k - 2) {
            const int j = m + 1;
            const Mat3 G = lam[j] * right_jacobian_so3(lam[j] * d[j]) * left_jacobian_inv_so3(d[j]);
            out.dR[m] -= P[j].transpose() * G;
            out.domega[m] -= (lam[j] * S[j] * P[j].transpose() * right_jacobian_so3(lam[j] * d[j]) +
                              dlam[j] * inv_dt * P[j].transpose()) *
                             left_jacobian_inv_so3(d[j]);
        }
    }
    return out;
}

}  // namespace velocal
