#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "velocal/errors.hpp"

namespace velocal::detail {

/// Solves (H + lambda * D) x = b with D = max(diag(H), floor), honoring a
/// fixed-parameter mask. H is accumulated dense (cheap scatter) and factored
/// sparse (the spline structure is banded with a small dense arrow).
inline Eigen::VectorXd solve_damped(Eigen::MatrixXd H, Eigen::VectorXd b, double lambda,
                                    const std::vector<bool>& fixed) {
    const int n = static_cast<int>(H.rows());
    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(fixed.size()) && fixed[i]) {
            H.row(i).setZero();
            H.col(i).setZero();
            H(i, i) = 1.0;
            b[i] = 0.0;
        }
    }
    if (lambda > 0.0) {
        for (int i = 0; i < n; ++i) H(i, i) += lambda * std::max(H(i, i), 1e-8);
    }
    Eigen::SparseMatrix<double> Hs = H.sparseView(1.0, 1e-300);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hs);
    if (ldlt.info() == Eigen::Success) {
        Eigen::VectorXd x = ldlt.solve(b);
        if (ldlt.info() == Eigen::Success && x.allFinite()) return x;
    }
    Eigen::VectorXd x = H.ldlt().solve(b);
    if (!x.allFinite()) throw SolverError("normal equations not solvable");
    return x;
}

}  // namespace velocal::detail
