#include "velocal/init.hpp"

#include <algorithm>
#include <cmath>

#include "normal_eq.hpp"

namespace velocal {

namespace {

void check_monotonic(const std::vector<ImuMeasurement>& imu) {
    for (size_t i = 1; i < imu.size(); ++i)
        if (imu[i].t <= imu[i - 1].t)
            throw ValidationError("IMU timestamps not strictly increasing");
}

// Hamilton product matrices in (w, x, y, z) ordering: q1*q2 = L(q1) q2 = R(q2) q1.
Eigen::Matrix4d quat_left(const Eigen::Quaterniond& q) {
    Eigen::Matrix4d m;
    m << q.w(), -q.x(), -q.y(), -q.z(),
         q.x(),  q.w(), -q.z(),  q.y(),
         q.y(),  q.z(),  q.w(), -q.x(),
         q.z(), -q.y(),  q.x(),  q.w();
    return m;
}

Eigen::Matrix4d quat_right(const Eigen::Quaterniond& q) {
    Eigen::Matrix4d m;
    m << q.w(), -q.x(), -q.y(), -q.z(),
         q.x(),  q.w(),  q.z(), -q.y(),
         q.y(), -q.z(),  q.w(),  q.x(),
         q.z(),  q.y(), -q.x(),  q.w();
    return m;
}

}  // namespace

So3Spline fit_rotation_spline(const std::vector<ImuMeasurement>& gyro, double knot_spacing,
                              const RotationFitConfig& cfg) {
    if (gyro.empty()) throw ValidationError("empty gyroscope stream");
    check_monotonic(gyro);
    const double span = gyro.back().t - gyro.front().t;
    if (span < cfg.min_span)
        throw ValidationError("gyroscope span " + std::to_string(span) + " s below required " +
                              std::to_string(cfg.min_span) + " s");

    So3Spline spline =
        So3Spline::cover(cfg.order, gyro.front().t, gyro.back().t, knot_spacing, cfg.pad);

    // initial guess: dead-reckoned gyro integration sampled at the knot anchors
    {
        Rotation3 R;  // identity at the first sample
        size_t g = 0;
        for (int i = 0; i < spline.size(); ++i) {
            const double anchor = spline.layout().t0 + i * knot_spacing;
            while (g + 1 < gyro.size() && gyro[g + 1].t <= anchor) {
                const double h = gyro[g + 1].t - gyro[g].t;
                R = R * exp_so3(0.5 * h * (gyro[g].gyro + gyro[g + 1].gyro));
                ++g;
            }
            Rotation3 Ri = R;
            if (g < gyro.size() && anchor > gyro[g].t)
                Ri = R * exp_so3((anchor - gyro[g].t) * gyro[g].gyro);
            spline.set_knot(i, Ri);
        }
    }

    const int k = spline.order();
    const int n_knots = spline.size();
    const int n = 3 * n_knots;
    std::vector<bool> fixed(n, false);
    fixed[0] = fixed[1] = fixed[2] = true;  // gauge: first control point
    const double w = 1.0 / (cfg.sigma_gyro * cfg.sigma_gyro);

    auto cost_of = [&](const So3Spline& s) {
        double c = 0.0;
        for (const ImuMeasurement& m : gyro) {
            const Vec3 r = s.angular_velocity_body(m.t) - m.gyro;
            c += w * r.squaredNorm();
        }
        return c;
    };

    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd b(n);
    double lambda = 1e-6;
    double cost = cost_of(spline);
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        H.setZero();
        b.setZero();
        for (const ImuMeasurement& m : gyro) {
            const So3SplineEval e = spline.eval_full(m.t, true);
            const Vec3 r = e.omega_body - m.gyro;
            for (int a = 0; a < k; ++a) {
                const int ia = 3 * (e.knot0 + a);
                b.segment<3>(ia) -= w * e.domega[a].transpose() * r;
                for (int c2 = a; c2 < k; ++c2) {
                    const int ic = 3 * (e.knot0 + c2);
                    const Mat3 blk = w * e.domega[a].transpose() * e.domega[c2];
                    H.block<3, 3>(ia, ic) += blk;
                    if (c2 != a) H.block<3, 3>(ic, ia) += blk.transpose();
                }
            }
        }
        const double grad_inf = b.lpNorm<Eigen::Infinity>();
        if (grad_inf < cfg.gradient_tol * (1.0 + cost)) break;

        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            const Eigen::VectorXd dx = detail::solve_damped(H, b, lambda, fixed);
            So3Spline trial = spline;
            for (int i = 1; i < n_knots; ++i)
                trial.set_knot(i, trial.knot(i) * exp_so3(dx.segment<3>(3 * i)));
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost) {
                const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
                spline = std::move(trial);
                cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < 1e-12) return spline;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) break;
    }
    return spline;
}

HandEyeResult hand_eye_rotation(const std::vector<RelativeRotation>& rel_rots,
                                const So3Spline& rot_spline, const HandEyeConfig& cfg) {
    if (static_cast<int>(rel_rots.size()) < cfg.min_pairs)
        throw ValidationError("need at least " + std::to_string(cfg.min_pairs) +
                              " relative rotations for hand-eye alignment");

    // excitation: accumulated angle-weighted axis covariance must have two
    // well-separated directions
    double total_angle = 0.0;
    Mat3 axis_cov = Mat3::Zero();
    for (const RelativeRotation& r : rel_rots) {
        const Vec3 phi = log_so3(r.R);
        total_angle += phi.norm();
        axis_cov += phi * phi.transpose() / std::max(phi.norm(), 1e-12);
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(axis_cov);
    if (total_angle < cfg.min_total_rotation_deg * M_PI / 180.0 ||
        eig.eigenvalues()(1) < cfg.min_axis_eigenvalue)
        throw ObservabilityError(
            "insufficient rotational excitation for hand-eye alignment; "
            "sufficiently excited motions about at least two axes are required");

    auto body_rotation = [&](const RelativeRotation& r, double t_off,
                             Rotation3* out) -> bool {
        const double s0 = r.t0 + t_off, s1 = r.t1 + t_off;
        if (s0 < rot_spline.min_time() || s1 >= rot_spline.max_time()) return false;
        *out = rot_spline.eval(s0).inverse() * rot_spline.eval(s1);
        return true;
    };

    auto closed_form = [&](double t_off, Rotation3* R_out, double* cost_out) -> bool {
        Eigen::Matrix4d N = Eigen::Matrix4d::Zero();
        int used = 0;
        for (const RelativeRotation& r : rel_rots) {
            Rotation3 Rb;
            if (!body_rotation(r, t_off, &Rb)) continue;
            const Eigen::Matrix4d K = quat_left(Rb.quaternion()) - quat_right(r.R.quaternion());
            N += K.transpose() * K;
            ++used;
        }
        if (used < cfg.min_pairs) return false;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(N);
        const Eigen::Vector4d q = es.eigenvectors().col(0);
        const Rotation3 R(Eigen::Quaterniond(q(0), q(1), q(2), q(3)));
        double cost = 0.0;
        for (const RelativeRotation& r : rel_rots) {
            Rotation3 Rb;
            if (!body_rotation(r, t_off, &Rb)) continue;
            cost += log_so3(R * r.R * (Rb * R).inverse()).squaredNorm();
        }
        *R_out = R;
        *cost_out = cost / used;
        return true;
    };

    // coarse grid over the time offset
    double best_cost = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    Rotation3 best_R;
    for (double t = -cfg.max_time_offset; t <= cfg.max_time_offset + 1e-12;
         t += cfg.grid_step) {
        Rotation3 R;
        double cost;
        if (!closed_form(t, &R, &cost)) continue;
        if (cost < best_cost) {
            best_cost = cost;
            best_t = t;
            best_R = R;
        }
    }
    if (!std::isfinite(best_cost))
        throw ObservabilityError("no time-offset grid cell kept enough in-domain pairs");

    // joint Gauss-Newton refinement of (R_cb, t_off), central-difference Jacobians
    Rotation3 R = best_R;
    double t_off = best_t;
    int used = 0;
    auto residuals = [&](const Rotation3& Rx, double tx, Eigen::VectorXd* out) -> bool {
        std::vector<Vec3> rs;
        rs.reserve(rel_rots.size());
        for (const RelativeRotation& r : rel_rots) {
            Rotation3 Rb;
            if (!body_rotation(r, tx, &Rb)) continue;
            rs.push_back(log_so3(Rx * r.R * (Rb * Rx).inverse()));
        }
        if (static_cast<int>(rs.size()) < cfg.min_pairs) return false;
        out->resize(3 * rs.size());
        for (size_t i = 0; i < rs.size(); ++i) out->segment<3>(3 * i) = rs[i];
        used = static_cast<int>(rs.size());
        return true;
    };

    Eigen::VectorXd r0;
    if (!residuals(R, t_off, &r0)) throw ObservabilityError("hand-eye refinement degenerate");
    double cost = r0.squaredNorm();
    double lambda = 1e-8;
    const double h_rot = 1e-6, h_t = 1e-6;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        Eigen::MatrixXd J(r0.size(), 4);
        for (int a = 0; a < 3; ++a) {
            Vec3 d = Vec3::Zero();
            d[a] = h_rot;
            Eigen::VectorXd rp, rm;
            if (!residuals(R * exp_so3(d), t_off, &rp) ||
                !residuals(R * exp_so3(-d), t_off, &rm) || rp.size() != r0.size() ||
                rm.size() != r0.size())
                throw ObservabilityError("hand-eye refinement degenerate");
            J.col(a) = (rp - rm) / (2.0 * h_rot);
        }
        {
            Eigen::VectorXd rp, rm;
            if (!residuals(R, t_off + h_t, &rp) || !residuals(R, t_off - h_t, &rm) ||
                rp.size() != r0.size() || rm.size() != r0.size())
                throw ObservabilityError("hand-eye refinement degenerate");
            J.col(3) = (rp - rm) / (2.0 * h_t);
        }
        const Eigen::Matrix4d H = J.transpose() * J;
        const Eigen::Vector4d g = -J.transpose() * r0;
        if (g.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + cost)) break;

        bool accepted = false;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            Eigen::Matrix4d Hd = H;
            Hd.diagonal() += lambda * Hd.diagonal().cwiseMax(1e-12);
            const Eigen::Vector4d dx = Hd.ldlt().solve(g);
            const Rotation3 R_trial = R * exp_so3(dx.head<3>());
            const double t_trial =
                std::clamp(t_off + dx(3), -cfg.max_time_offset, cfg.max_time_offset);
            Eigen::VectorXd rt;
            if (residuals(R_trial, t_trial, &rt) && rt.squaredNorm() < cost) {
                const double rel = (cost - rt.squaredNorm()) / std::max(cost, 1e-300);
                R = R_trial;
                t_off = t_trial;
                r0 = rt;
                cost = rt.squaredNorm();
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < 1e-14) iter = cfg.max_iterations;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) break;
    }

    HandEyeResult out;
    out.R_cb = R;
    out.t_off = t_off;
    out.grid_t_off = best_t;
    out.rms = std::sqrt(cost / std::max(1, used));
    out.pairs_used = used;
    return out;
}

std::optional<EgoVelocity> estimate_ego_velocity(const std::vector<FlowFeature>& features,
                                                 const Vec3& w_c, const CameraIntrinsics& intr,
                                                 const EgoVelocityConfig& cfg) {
    if (static_cast<int>(features.size()) < cfg.min_features) return std::nullopt;

    const double w = 1.0 / cfg.sigma_pixel_vel;
    struct Row {
        Eigen::RowVector3d a;
        double y;
    };
    std::vector<Row> rows;
    rows.reserve(2 * features.size());
    std::vector<int> row_feature;
    for (size_t f = 0; f < features.size(); ++f) {
        const FlowFeature& ft = features[f];
        if (ft.depth <= 0.0) continue;
        const InteractionMatrices m = interaction_matrices(ft.pixel, intr);
        const Vec2 rhs = ft.pixel_vel - m.B * w_c;
        for (int i = 0; i < 2; ++i) {
            rows.push_back({w * m.A.row(i) / ft.depth, w * rhs(i)});
            row_feature.push_back(static_cast<int>(f));
        }
    }
    if (static_cast<int>(rows.size()) < 2 * cfg.min_features) return std::nullopt;

    auto solve = [&](const std::vector<char>& use, Vec3* v, int* count) -> bool {
        Mat3 H = Mat3::Zero();
        Vec3 b = Vec3::Zero();
        int used = 0;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (!use[i]) continue;
            H += rows[i].a.transpose() * rows[i].a;
            b += rows[i].a.transpose() * rows[i].y;
            ++used;
        }
        if (used < 2 * cfg.min_features) return false;
        Eigen::SelfAdjointEigenSolver<Mat3> eig(H);
        if (eig.eigenvalues()(0) <= 0.0 ||
            eig.eigenvalues()(2) / eig.eigenvalues()(0) > cfg.max_condition)
            throw DegenerateGeometryError("degenerate frame geometry for ego-velocity");
        *v = eig.eigenvectors() *
             (eig.eigenvectors().transpose() * b).cwiseQuotient(eig.eigenvalues());
        *count = used;
        return true;
    };

    std::vector<char> use(rows.size(), 1);
    Vec3 v;
    int used = 0;
    if (!solve(use, &v, &used)) return std::nullopt;

    // one reweighted pass: drop rows whose residual exceeds 3x the larger of
    // the configured sigma and a median-based scale estimate, so a first fit
    // skewed by gross outliers does not reject the consistent majority
    std::vector<double> abs_resid(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        abs_resid[i] = std::abs((rows[i].a * v - rows[i].y) / w);  // px/s
    std::vector<double> sorted = abs_resid;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double scale =
        std::max(cfg.sigma_pixel_vel, 1.4826 * sorted[sorted.size() / 2]);
    for (size_t i = 0; i < rows.size(); ++i)
        if (abs_resid[i] > 3.0 * scale) use[i] = 0;
    Vec3 v2;
    int used2 = 0;
    if (solve(use, &v2, &used2)) {
        v = v2;
        used = used2;
    }

    double ss = 0.0;
    int cnt = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!use[i]) continue;
        const double resid = (rows[i].a * v - rows[i].y) / w;
        ss += resid * resid;
        ++cnt;
    }

    EgoVelocity out;
    out.t = features.front().t;
    out.v_c = v;
    out.features = used / 2;
    out.residual_rms = cnt > 0 ? std::sqrt(ss / cnt) : 0.0;
    return out;
}

Vec3 integrate_rotated_accel(const std::vector<ImuMeasurement>& imu, const So3Spline& rot_spline,
                             double a, double b) {
    if (b <= a) return Vec3::Zero();
    auto accel_at = [&](double t) -> Vec3 {
        auto it = std::lower_bound(imu.begin(), imu.end(), t,
                                   [](const ImuMeasurement& m, double x) { return m.t < x; });
        if (it == imu.begin()) return it->accel;
        if (it == imu.end()) return imu.back().accel;
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double f = (t - lo.t) / (hi.t - lo.t);
        return (1.0 - f) * lo.accel + f * hi.accel;
    };
    auto integrand = [&](double t, const Vec3& acc) -> Vec3 {
        return rot_spline.eval(t).matrix() * acc;
    };

    std::vector<std::pair<double, Vec3>> nodes;
    nodes.emplace_back(a, integrand(a, accel_at(a)));
    for (const ImuMeasurement& m : imu)
        if (m.t > a && m.t < b) nodes.emplace_back(m.t, integrand(m.t, m.accel));
    nodes.emplace_back(b, integrand(b, accel_at(b)));

    Vec3 sum = Vec3::Zero();
    for (size_t i = 1; i < nodes.size(); ++i)
        sum += 0.5 * (nodes[i].first - nodes[i - 1].first) *
               (nodes[i].second + nodes[i - 1].second);
    return sum;
}

AlignResult align_translation_gravity(const std::vector<EgoVelocity>& ego_velocities,
                                      const std::vector<ImuMeasurement>& imu,
                                      const So3Spline& rot_spline, const Rotation3& R_cb,
                                      double t_off, const AlignConfig& cfg) {
    check_monotonic(imu);
    // per-ego-velocity transfer terms: v_b^w = K + M * t_cb
    struct Term {
        double t;
        Vec3 K;
        Mat3 M;
        double rms;
    };
    std::vector<Term> terms;
    for (const EgoVelocity& e : ego_velocities) {
        const double s = e.t + t_off;
        if (s < rot_spline.min_time() || s >= rot_spline.max_time()) continue;
        const Rotation3 Rwb = rot_spline.eval(s);
        const Vec3 w_world = rot_spline.angular_velocity_world(s);
        Term term;
        term.t = e.t;
        term.K = Rwb.matrix() * (R_cb.matrix() * e.v_c);
        term.M = -hat(w_world) * Rwb.matrix();
        term.rms = e.residual_rms;
        terms.push_back(term);
    }
    if (terms.size() < 4)
        throw ValidationError("need at least 3 consecutive ego-velocity pairs for alignment");

    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    int pairs = 0;
    for (size_t i = 1; i < terms.size(); ++i) {
        const Term& t0 = terms[i - 1];
        const Term& t1 = terms[i];
        const double dt = t1.t - t0.t;
        if (dt <= 0.0 || dt > cfg.max_pair_gap) continue;
        const Vec3 I_a = integrate_rotated_accel(imu, rot_spline, t0.t + t_off, t1.t + t_off);
        // (M1 - M0) t_cb - dt * g = I_a - (K1 - K0)
        Eigen::Matrix<double, 3, 6> A;
        A.leftCols<3>() = t1.M - t0.M;
        A.rightCols<3>() = -dt * Mat3::Identity();
        const Vec3 y = I_a - (t1.K - t0.K);
        const double w = 1.0 / (1e-3 + t0.rms + t1.rms);
        H += w * A.transpose() * A;
        b += w * A.transpose() * y;
        ++pairs;
    }
    if (pairs < 3) throw ValidationError("need at least 3 consecutive ego-velocity pairs");

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(H);
    const double cond =
        eig.eigenvalues()(5) / std::max(eig.eigenvalues()(0), 1e-300);

    // tiny Tikhonov on t_cb keeps the static (unobservable) case at zero
    Eigen::Matrix<double, 6, 6> Hr = H;
    Hr.topLeftCorner<3, 3>() += 1e-8 * Mat3::Identity();
    const Eigen::Matrix<double, 6, 1> x = Hr.ldlt().solve(b);

    AlignResult out;
    out.t_cb = x.head<3>();
    out.g_w = x.tail<3>();
    if (out.g_w.norm() < 1e-12) throw ObservabilityError("gravity unobservable from alignment");
    out.g_w = cfg.gravity_magnitude * out.g_w.normalized();
    out.condition = cond;
    out.translation_observable = cond <= cfg.max_condition;
    out.pairs_used = pairs;
    return out;
}

R3Spline fit_velocity_spline(const std::vector<EgoVelocity>& ego_velocities,
                             const So3Spline& rot_spline, const Rotation3& R_cb, const Vec3& t_cb,
                             double t_off, double knot_spacing, const VelocityFitConfig& cfg) {
    // same coverage as the rotation spline so batch accel queries stay in-domain
    const double lo = rot_spline.min_time();
    const double hi = rot_spline.max_time();
    const int segments = static_cast<int>(std::ceil((hi - lo) / knot_spacing));
    R3Spline spline(cfg.order, lo, knot_spacing,
                    std::vector<Vec3>(segments + cfg.order - 1, Vec3::Zero()));

    const int k = spline.order();
    const int n = spline.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);  // per-dimension scalar normal matrix
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, 3);
    double w_buf[8];
    for (const EgoVelocity& e : ego_velocities) {
        const double s = e.t + t_off;
        if (s < spline.min_time() || s >= spline.max_time()) continue;
        if (s < rot_spline.min_time() || s >= rot_spline.max_time()) continue;
        const Rotation3 Rwb = rot_spline.eval(s);
        const Vec3 w_world = rot_spline.angular_velocity_world(s);
        const Vec3 target = Rwb.matrix() * (R_cb.matrix() * e.v_c) - w_world.cross(Rwb * t_cb);
        int i0 = 0;
        spline.basis_weights(s, 0, i0, w_buf);
        const double wt = 1.0 / (1e-3 + e.residual_rms);
        for (int a = 0; a < k; ++a) {
            B.row(i0 + a) += wt * w_buf[a] * target.transpose();
            for (int c = 0; c < k; ++c) H(i0 + a, i0 + c) += wt * w_buf[a] * w_buf[c];
        }
    }
    H.diagonal().array() += cfg.tikhonov;

    Eigen::SparseMatrix<double> Hs = H.sparseView(1.0, 1e-300);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hs);
    Eigen::MatrixXd X;
    if (ldlt.info() == Eigen::Success) X = ldlt.solve(B);
    else X = H.ldlt().solve(B);
    for (int i = 0; i < n; ++i) spline.knot(i) = X.row(i).transpose();
    return spline;
}

}  // namespace velocal
