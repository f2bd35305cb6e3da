#pragma once

#include <map>
#include <string>
#include <vector>

#include "velocal/init.hpp"
#include "velocal/state.hpp"
#include "velocal/tracking.hpp"

namespace velocal {

using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat2x = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Orthonormal basis of the tangent plane at g (columns orthogonal to g).
Mat32 gravity_tangent_basis(const Vec3& g);

/// r = omega_body(t) + b_w - meas  (rad/s)
Vec3 gyro_residual(const CalibrationState& x, const Vec3& meas, double t);

/// r = R(t)^T (a_w(t) - g) + b_a - meas  (m/s^2)
Vec3 accel_residual(const CalibrationState& x, const Vec3& meas, double t);

/// r = (1/z) A v_c + B w_c - measured pixel velocity  (px/s), splines queried
/// at the shifted time t + t_off.
Vec2 flow_residual(const CalibrationState& x, const FlowFeature& f, const CameraIntrinsics& intr);

struct GyroJacobians {
    Vec3 r;
    int rot_knot0 = 0;
    std::vector<Mat3> d_rot;   // per involved rotation knot (right perturbation)
    // d/d b_w is identity
};
GyroJacobians gyro_residual_jacobians(const CalibrationState& x, const Vec3& meas, double t);

struct AccelJacobians {
    Vec3 r;
    int rot_knot0 = 0, vel_knot0 = 0;
    std::vector<Mat3> d_rot;
    std::vector<Mat3> d_vel;
    Mat32 d_g;   // w.r.t. the 2-sphere tangent coordinates
    // d/d b_a is identity
};
AccelJacobians accel_residual_jacobians(const CalibrationState& x, const Vec3& meas, double t,
                                        const Mat32& g_basis);

struct FlowJacobians {
    Vec2 r;
    int rot_knot0 = 0, vel_knot0 = 0;
    std::vector<Mat23> d_rot;
    std::vector<Mat23> d_vel;
    Mat23 d_Rcb;
    Mat23 d_tcb;
    Vec2 d_toff;
};
FlowJacobians flow_residual_jacobians(const CalibrationState& x, const FlowFeature& f,
                                      const CameraIntrinsics& intr);

struct BatchConfig {
    NoiseConfig noise;
    CameraIntrinsics intrinsics;
    int max_iterations = 100;
    int outer_rounds = 2;
    double cost_rel_tol = 1e-10;
    double gradient_tol = 1e-8;
    double max_time_offset = 0.1;
    bool estimate_biases = true;
    bool compute_gauge_spectrum = false;   // dense eigendecomposition, test-sized problems only
};

struct ResidualFamilyStats {
    long count = 0;
    double rms = 0.0;
    double mean_norm = 0.0;
    Vec2 dim_mean = Vec2::Zero();   // flow only
    Vec2 dim_std = Vec2::Zero();    // flow only
};

struct SolveReport {
    int iterations = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    std::string termination;
    ResidualFamilyStats gyro, accel, flow;
    std::vector<double> cost_trace;                       // accepted-step costs
    std::vector<std::map<std::string, double>> outer_deltas;
    Eigen::VectorXd gauge_eigenvalues;                    // smallest few, if requested
    int near_singular_directions = 0;
    std::vector<std::pair<double, Vec2>> flow_residuals;  // (t, r) at convergence
    long active_flow_blocks = 0;
    long rejected_flow_blocks = 0;
};

/// The continuous-time factor graph: one block per gyro sample, accel sample
/// and per-frame flow feature, with Huber losses per family.
class BatchProblem {
public:
    BatchProblem(std::vector<ImuMeasurement> imu,
                 std::map<int, std::vector<FlowFeature>> flow_features, BatchConfig cfg);

    long num_gyro_blocks() const { return static_cast<long>(imu_.size()); }
    long num_accel_blocks() const { return static_cast<long>(imu_.size()); }
    long num_flow_blocks() const { return static_cast<long>(flow_.size()); }
    long num_blocks() const { return 2 * num_gyro_blocks() + num_flow_blocks(); }

    const std::vector<FlowFeature>& flow_blocks() const { return flow_; }

    /// Damped Gauss-Newton with manifold updates; outer rounds re-gate flow
    /// blocks beyond 3 sigma. Refines the state in place. Gating persists
    /// across calls, so rounds may also be run one at a time.
    SolveReport solve(CalibrationState& state);

private:
    std::vector<ImuMeasurement> imu_;
    std::vector<FlowFeature> flow_;
    BatchConfig cfg_;
    std::vector<char> active_;
    std::vector<Vec2> flow_sigma_;
};

}  // namespace velocal
