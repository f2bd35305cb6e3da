#include "velocal/batch.hpp"

#include <algorithm>
#include <cmath>

#include "normal_eq.hpp"

namespace velocal {

Mat32 gravity_tangent_basis(const Vec3& g) {
    const Vec3 n = g.normalized();
    Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 b1 = n.cross(a).normalized();
    const Vec3 b2 = n.cross(b1).normalized();
    Mat32 B;
    B.col(0) = b1;
    B.col(1) = b2;
    return B;
}

Vec3 gyro_residual(const CalibrationState& x, const Vec3& meas, double t) {
    return x.rot_spline.angular_velocity_body(t) + x.imu.gyro_bias - meas;
}

Vec3 accel_residual(const CalibrationState& x, const Vec3& meas, double t) {
    const Mat3 R = x.rot_spline.eval(t).matrix();
    const Vec3 a_w = x.vel_spline.eval_derivative(t, 1);
    return R.transpose() * (a_w - x.g_w) + x.imu.accel_bias - meas;
}

Vec2 flow_residual(const CalibrationState& x, const FlowFeature& f,
                   const CameraIntrinsics& intr) {
    const CameraKinematics k = camera_kinematics(x, f.t);
    const InteractionMatrices m = interaction_matrices(f.pixel, intr);
    return (1.0 / f.depth) * (m.A * k.v_c) + m.B * k.w_c - f.pixel_vel;
}

GyroJacobians gyro_residual_jacobians(const CalibrationState& x, const Vec3& meas, double t) {
    const So3SplineEval e = x.rot_spline.eval_full(t, true);
    GyroJacobians out;
    out.r = e.omega_body + x.imu.gyro_bias - meas;
    out.rot_knot0 = e.knot0;
    out.d_rot = e.domega;
    return out;
}

AccelJacobians accel_residual_jacobians(const CalibrationState& x, const Vec3& meas, double t,
                                        const Mat32& g_basis) {
    const So3SplineEval e = x.rot_spline.eval_full(t, true);
    const Mat3 Rt = e.R.matrix().transpose();
    const Vec3 a_w = x.vel_spline.eval_derivative(t, 1);
    const Vec3 body = Rt * (a_w - x.g_w);

    AccelJacobians out;
    out.r = body + x.imu.accel_bias - meas;
    out.rot_knot0 = e.knot0;
    out.d_rot.resize(e.dR.size());
    const Mat3 skew = hat(body);
    for (size_t m = 0; m < e.dR.size(); ++m) out.d_rot[m] = skew * e.dR[m];

    const int k = x.vel_spline.order();
    double w[8];
    x.vel_spline.basis_weights(t, 1, out.vel_knot0, w);
    out.d_vel.resize(k);
    for (int m = 0; m < k; ++m) out.d_vel[m] = w[m] * Rt;

    out.d_g = -Rt * g_basis;
    return out;
}

FlowJacobians flow_residual_jacobians(const CalibrationState& x, const FlowFeature& f,
                                      const CameraIntrinsics& intr) {
    const double s = f.t + x.t_off;
    const So3SplineEval e = x.rot_spline.eval_full(s, true);
    const Mat3 Rwb = e.R.matrix();
    const Mat3 Rcb = x.R_cb.matrix();
    const Vec3 v_w = x.vel_spline.eval(s);
    const Vec3 a_w = x.vel_spline.eval_derivative(s, 1);
    const Vec3& wb = e.omega_body;
    const Vec3& ab = e.alpha_body;

    const Vec3 u = Rwb.transpose() * v_w;          // body-frame linear velocity
    const Vec3 v_c = Rcb.transpose() * (u + wb.cross(x.t_cb));
    const Vec3 w_c = Rcb.transpose() * wb;

    const InteractionMatrices m = interaction_matrices(f.pixel, intr);
    const Mat23 G1 = (1.0 / f.depth) * m.A * Rcb.transpose();
    const Mat23 G2 = m.B * Rcb.transpose();

    FlowJacobians out;
    out.r = (1.0 / f.depth) * (m.A * v_c) + m.B * w_c - f.pixel_vel;

    const int k = x.rot_spline.order();
    out.rot_knot0 = e.knot0;
    out.d_rot.resize(k);
    const Mat3 hat_u = hat(u);
    const Mat3 hat_tcb = hat(x.t_cb);
    for (int a = 0; a < k; ++a)
        out.d_rot[a] = G1 * (hat_u * e.dR[a] - hat_tcb * e.domega[a]) + G2 * e.domega[a];

    double w[8];
    x.vel_spline.basis_weights(s, 0, out.vel_knot0, w);
    out.d_vel.resize(x.vel_spline.order());
    const Mat23 G1Rwbt = G1 * Rwb.transpose();
    for (int a = 0; a < x.vel_spline.order(); ++a) out.d_vel[a] = w[a] * G1Rwbt;

    out.d_Rcb = (1.0 / f.depth) * m.A * hat(v_c) + m.B * hat(w_c);
    out.d_tcb = G1 * hat(wb);
    out.d_toff =
        G1 * (-wb.cross(u) + Rwb.transpose() * a_w + ab.cross(x.t_cb)) + G2 * ab;
    return out;
}

BatchProblem::BatchProblem(std::vector<ImuMeasurement> imu,
                           std::map<int, std::vector<FlowFeature>> flow_features,
                           BatchConfig cfg)
    : imu_(std::move(imu)), cfg_(std::move(cfg)) {
    if (imu_.empty()) throw ValidationError("batch problem needs inertial measurements");
    if (flow_features.empty()) throw ValidationError("batch problem needs flow features");
    for (auto& [frame, feats] : flow_features)
        for (FlowFeature& f : feats)
            if (f.depth > 0.0) flow_.push_back(f);
    if (flow_.empty()) throw ValidationError("batch problem needs flow features");
    cfg_.noise.validate();
    active_.assign(flow_.size(), 1);
    flow_sigma_.assign(flow_.size(),
                       Vec2(cfg_.noise.sigma_pixel_vel, cfg_.noise.sigma_pixel_vel));
}

namespace {

struct ParamLayout {
    int n_rot = 0, n_vel = 0;
    int rot(int i) const { return 3 * i; }
    int vel(int i) const { return 3 * n_rot + 3 * i; }
    int rcb() const { return 3 * (n_rot + n_vel); }
    int tcb() const { return rcb() + 3; }
    int toff() const { return tcb() + 3; }
    int grav() const { return toff() + 1; }
    int bw() const { return grav() + 2; }
    int ba() const { return bw() + 3; }
    int size() const { return ba() + 3; }
};

double huber_rho(double s, double delta) {
    // s is the squared whitened norm
    const double r = std::sqrt(s);
    return r <= delta ? s : 2.0 * delta * r - delta * delta;
}

double huber_weight(double s, double delta) {
    const double r = std::sqrt(s);
    return r <= delta ? 1.0 : delta / r;
}

void apply_step(CalibrationState& x, const Eigen::VectorXd& dx, const ParamLayout& L,
                const Mat32& g_basis, double max_toff, bool update_biases) {
    for (int i = 0; i < L.n_rot; ++i)
        x.rot_spline.set_knot(i, x.rot_spline.knot(i) * exp_so3(dx.segment<3>(L.rot(i))));
    for (int i = 0; i < L.n_vel; ++i) x.vel_spline.knot(i) += dx.segment<3>(L.vel(i));
    x.R_cb = x.R_cb * exp_so3(dx.segment<3>(L.rcb()));
    x.t_cb += dx.segment<3>(L.tcb());
    x.t_off = std::clamp(x.t_off + dx(L.toff()), -max_toff, max_toff);
    x.g_w += g_basis * dx.segment<2>(L.grav());
    x.project_gravity();
    if (update_biases) {
        x.imu.gyro_bias += dx.segment<3>(L.bw());
        x.imu.accel_bias += dx.segment<3>(L.ba());
    }
}

}  // namespace

SolveReport BatchProblem::solve(CalibrationState& state) {
    const NoiseConfig& nc = cfg_.noise;
    ParamLayout L{state.rot_spline.size(), state.vel_spline.size()};
    const int n = L.size();
    const int krot = state.rot_spline.order();
    const int kvel = state.vel_spline.order();

    std::vector<bool> fixed(n, false);
    fixed[0] = fixed[1] = fixed[2] = true;  // gauge: first rotation control point
    if (!cfg_.estimate_biases)
        for (int i = L.bw(); i < L.ba() + 3; ++i) fixed[i] = true;

    std::vector<char>& active = active_;
    std::vector<Vec2>& flow_sigma = flow_sigma_;

    const double wg = 1.0 / (nc.sigma_gyro * nc.sigma_gyro);
    const double wa = 1.0 / (nc.sigma_acc * nc.sigma_acc);
    const double dg = nc.gyro_huber() / nc.sigma_gyro;   // whitened Huber thresholds
    const double da = nc.acc_huber() / nc.sigma_acc;
    const double df = nc.flow_huber() / nc.sigma_pixel_vel;

    auto in_flow_domain = [&](const CalibrationState& x, const FlowFeature& f) {
        const double s = f.t + x.t_off;
        return s >= x.rot_spline.min_time() && s < x.rot_spline.max_time() &&
               s >= x.vel_spline.min_time() && s < x.vel_spline.max_time();
    };

    auto total_cost = [&](const CalibrationState& x) {
        double c = 0.0;
        for (const ImuMeasurement& m : imu_) {
            c += huber_rho(wg * gyro_residual(x, m.gyro, m.t).squaredNorm(), dg);
            c += huber_rho(wa * accel_residual(x, m.accel, m.t).squaredNorm(), da);
        }
        for (size_t i = 0; i < flow_.size(); ++i) {
            if (!active[i] || !in_flow_domain(x, flow_[i])) continue;
            const Vec2 r = flow_residual(x, flow_[i], cfg_.intrinsics);
            const Vec2 rw = r.cwiseQuotient(flow_sigma[i]);
            c += huber_rho(rw.squaredNorm(), df);
        }
        return c;
    };

    SolveReport report;
    report.initial_cost = total_cost(state);
    double cost = report.initial_cost;
    report.cost_trace.push_back(cost);

    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd b(n);
    std::string termination = "max_iterations";
    int total_iters = 0;

    for (int round = 0; round < cfg_.outer_rounds; ++round) {
        CalibrationState round_start = state;

        // per-block flow sigmas: depth noise propagated through the (1/z) A v_c term
        for (size_t i = 0; i < flow_.size(); ++i) {
            if (!in_flow_domain(state, flow_[i])) continue;
            const CameraKinematics k = camera_kinematics(state, flow_[i].t);
            const InteractionMatrices m = interaction_matrices(flow_[i].pixel, cfg_.intrinsics);
            const Vec2 translational = (1.0 / flow_[i].depth) * (m.A * k.v_c);
            flow_sigma[i] = (Vec2::Constant(nc.sigma_pixel_vel * nc.sigma_pixel_vel) +
                             (nc.sigma_depth_rel * translational).cwiseAbs2())
                                .cwiseSqrt();
        }
        cost = total_cost(state);

        double lambda = 1e-6;
        bool converged = false;
        for (int iter = 0; iter < cfg_.max_iterations && !converged; ++iter, ++total_iters) {
            H.setZero();
            b.setZero();
            const Mat32 g_basis = gravity_tangent_basis(state.g_w);

            for (const ImuMeasurement& m : imu_) {
                {
                    const GyroJacobians gj = gyro_residual_jacobians(state, m.gyro, m.t);
                    const double wloss = huber_weight(wg * gj.r.squaredNorm(), dg) * wg;
                    std::vector<int> idx(3 * krot + 3);
                    Eigen::MatrixXd Jm(3, 3 * krot + 3);
                    for (int a = 0; a < krot; ++a) {
                        for (int d = 0; d < 3; ++d) idx[3 * a + d] = L.rot(gj.rot_knot0 + a) + d;
                        Jm.middleCols<3>(3 * a) = gj.d_rot[a];
                    }
                    for (int d = 0; d < 3; ++d) idx[3 * krot + d] = L.bw() + d;
                    Jm.middleCols<3>(3 * krot) = Mat3::Identity();
                    for (int a = 0; a < static_cast<int>(idx.size()); ++a) {
                        b[idx[a]] -= wloss * Jm.col(a).dot(gj.r);
                        for (int c = a; c < static_cast<int>(idx.size()); ++c) {
                            const double v = wloss * Jm.col(a).dot(Jm.col(c));
                            H(idx[a], idx[c]) += v;
                            if (idx[c] != idx[a]) H(idx[c], idx[a]) += v;
                        }
                    }
                }
                {
                    const AccelJacobians aj =
                        accel_residual_jacobians(state, m.accel, m.t, g_basis);
                    const double wloss = huber_weight(wa * aj.r.squaredNorm(), da) * wa;
                    const int cols = 3 * krot + 3 * kvel + 2 + 3;
                    std::vector<int> idx(cols);
                    Eigen::MatrixXd Jm(3, cols);
                    int o = 0;
                    for (int a = 0; a < krot; ++a, o += 3) {
                        for (int d = 0; d < 3; ++d) idx[o + d] = L.rot(aj.rot_knot0 + a) + d;
                        Jm.middleCols<3>(o) = aj.d_rot[a];
                    }
                    for (int a = 0; a < kvel; ++a, o += 3) {
                        for (int d = 0; d < 3; ++d) idx[o + d] = L.vel(aj.vel_knot0 + a) + d;
                        Jm.middleCols<3>(o) = aj.d_vel[a];
                    }
                    idx[o] = L.grav();
                    idx[o + 1] = L.grav() + 1;
                    Jm.middleCols<2>(o) = aj.d_g;
                    o += 2;
                    for (int d = 0; d < 3; ++d) idx[o + d] = L.ba() + d;
                    Jm.middleCols<3>(o) = Mat3::Identity();
                    for (int a = 0; a < cols; ++a) {
                        b[idx[a]] -= wloss * Jm.col(a).dot(aj.r);
                        for (int c = a; c < cols; ++c) {
                            const double v = wloss * Jm.col(a).dot(Jm.col(c));
                            H(idx[a], idx[c]) += v;
                            if (idx[c] != idx[a]) H(idx[c], idx[a]) += v;
                        }
                    }
                }
            }

            for (size_t i = 0; i < flow_.size(); ++i) {
                if (!active[i] || !in_flow_domain(state, flow_[i])) continue;
                const FlowJacobians fj =
                    flow_residual_jacobians(state, flow_[i], cfg_.intrinsics);
                const Vec2 inv_sigma = flow_sigma[i].cwiseInverse();
                const Vec2 rw = fj.r.cwiseProduct(inv_sigma);
                const double wloss = huber_weight(rw.squaredNorm(), df);
                const int cols = 3 * krot + 3 * kvel + 3 + 3 + 1;
                std::vector<int> idx(cols);
                Mat2x Jm(2, cols);
                int o = 0;
                for (int a = 0; a < krot; ++a, o += 3) {
                    for (int d = 0; d < 3; ++d) idx[o + d] = L.rot(fj.rot_knot0 + a) + d;
                    Jm.middleCols<3>(o) = fj.d_rot[a];
                }
                for (int a = 0; a < kvel; ++a, o += 3) {
                    for (int d = 0; d < 3; ++d) idx[o + d] = L.vel(fj.vel_knot0 + a) + d;
                    Jm.middleCols<3>(o) = fj.d_vel[a];
                }
                for (int d = 0; d < 3; ++d) idx[o + d] = L.rcb() + d;
                Jm.middleCols<3>(o) = fj.d_Rcb;
                o += 3;
                for (int d = 0; d < 3; ++d) idx[o + d] = L.tcb() + d;
                Jm.middleCols<3>(o) = fj.d_tcb;
                o += 3;
                idx[o] = L.toff();
                Jm.col(o) = fj.d_toff;
                // whiten rows
                Mat2x Jw = inv_sigma.asDiagonal() * Jm;
                for (int a = 0; a < cols; ++a) {
                    b[idx[a]] -= wloss * Jw.col(a).dot(rw);
                    for (int c = a; c < cols; ++c) {
                        const double v = wloss * Jw.col(a).dot(Jw.col(c));
                        H(idx[a], idx[c]) += v;
                        if (idx[c] != idx[a]) H(idx[c], idx[a]) += v;
                    }
                }
            }

            const double grad_inf = b.lpNorm<Eigen::Infinity>();
            if (grad_inf < cfg_.gradient_tol * (1.0 + cost)) {
                termination = "gradient";
                converged = true;
                break;
            }

            if (round == 0 && iter == 0 && cfg_.compute_gauge_spectrum) {
                Eigen::MatrixXd Hf = H;
                for (int i = 0; i < n; ++i)
                    if (fixed[i]) {
                        Hf.row(i).setZero();
                        Hf.col(i).setZero();
                        Hf(i, i) = 1.0;
                    }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hf);
                const int m = std::min<int>(8, n);
                report.gauge_eigenvalues = eig.eigenvalues().head(m);
                const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
                report.near_singular_directions = 0;
                for (int i = 0; i < n; ++i)
                    if (eig.eigenvalues()(i) < 1e-10 * scale) ++report.near_singular_directions;
            }

            bool accepted = false;
            for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
                Eigen::VectorXd dx;
                try {
                    dx = detail::solve_damped(H, b, lambda, fixed);
                } catch (const SolverError&) {
                    lambda *= 10.0;
                    continue;
                }
                CalibrationState trial = state;
                apply_step(trial, dx, L, g_basis, cfg_.max_time_offset, cfg_.estimate_biases);
                const double trial_cost = total_cost(trial);
                if (trial_cost < cost) {
                    const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
                    state = std::move(trial);
                    cost = trial_cost;
                    report.cost_trace.push_back(cost);
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    if (rel < cfg_.cost_rel_tol) {
                        termination = "cost_decrease";
                        converged = true;
                    }
                } else {
                    lambda *= 10.0;
                }
            }
            if (!accepted) {
                termination = "stalled";
                break;
            }
        }

        // between rounds: re-reject flow blocks beyond 3 sigma
        long rejected = 0;
        for (size_t i = 0; i < flow_.size(); ++i) {
            if (!active[i]) {
                ++rejected;
                continue;
            }
            if (!in_flow_domain(state, flow_[i])) continue;
            const Vec2 r = flow_residual(state, flow_[i], cfg_.intrinsics);
            if (std::abs(r.x()) > 3.0 * flow_sigma[i].x() ||
                std::abs(r.y()) > 3.0 * flow_sigma[i].y()) {
                active[i] = 0;
                ++rejected;
            }
        }
        report.rejected_flow_blocks = rejected;

        std::map<std::string, double> deltas;
        deltas["rotation_deg"] =
            log_so3(round_start.R_cb.inverse() * state.R_cb).norm() * 180.0 / M_PI;
        deltas["translation_m"] = (state.t_cb - round_start.t_cb).norm();
        deltas["time_offset_s"] = std::abs(state.t_off - round_start.t_off);
        deltas["gravity_deg"] =
            std::acos(std::clamp(state.g_w.normalized().dot(round_start.g_w.normalized()),
                                 -1.0, 1.0)) *
            180.0 / M_PI;
        report.outer_deltas.push_back(deltas);
    }

    report.iterations = total_iters;
    report.final_cost = cost;
    report.termination = termination;

    // residual statistics at convergence
    {
        double ss = 0.0, sn = 0.0;
        for (const ImuMeasurement& m : imu_) {
            const Vec3 r = gyro_residual(state, m.gyro, m.t);
            ss += r.squaredNorm();
            sn += r.norm();
        }
        report.gyro.count = static_cast<long>(imu_.size());
        report.gyro.rms = std::sqrt(ss / std::max<long>(1, 3 * report.gyro.count));
        report.gyro.mean_norm = sn / std::max<long>(1, report.gyro.count);
        ss = sn = 0.0;
        for (const ImuMeasurement& m : imu_) {
            const Vec3 r = accel_residual(state, m.accel, m.t);
            ss += r.squaredNorm();
            sn += r.norm();
        }
        report.accel.count = static_cast<long>(imu_.size());
        report.accel.rms = std::sqrt(ss / std::max<long>(1, 3 * report.accel.count));
        report.accel.mean_norm = sn / std::max<long>(1, report.accel.count);

        Vec2 mean = Vec2::Zero(), m2 = Vec2::Zero();
        long cnt = 0;
        double fss = 0.0;
        for (size_t i = 0; i < flow_.size(); ++i) {
            if (!active[i] || !in_flow_domain(state, flow_[i])) continue;
            const Vec2 r = flow_residual(state, flow_[i], cfg_.intrinsics);
            report.flow_residuals.emplace_back(flow_[i].t, r);
            mean += r;
            m2 += r.cwiseAbs2();
            fss += r.squaredNorm();
            ++cnt;
        }
        report.flow.count = cnt;
        report.active_flow_blocks = cnt;
        if (cnt > 0) {
            mean /= double(cnt);
            report.flow.dim_mean = mean;
            report.flow.dim_std = (m2 / double(cnt) - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
            report.flow.rms = std::sqrt(fss / double(2 * cnt));
        }
    }
    return report;
}

}  // namespace velocal
