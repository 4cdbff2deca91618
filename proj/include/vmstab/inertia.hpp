#pragma once

#include <Eigen/Dense>

#include <vector>

#include "vmstab/operators.hpp"

namespace vmstab {

struct InertiaReport {
    int neg = 0, zero = 0, pos = 0;
    std::vector<double> eigenvalues;  // ascending
    double zero_tol = 0.0;
    double margin = 0.0;  // smallest |eigenvalue| outside [-zero_tol, zero_tol]; +inf if none
    int dim() const { return neg + zero + pos; }
};

// zero_tol < 0 selects 1e-8 * ||S||_2.
InertiaReport inertia_count(const Eigen::MatrixXd& S, double zero_tol = -1.0);
// Same, reusing eigenvalues computed elsewhere.
InertiaReport inertia_from_eigenvalues(const Eigen::VectorXd& ev, double zero_tol = -1.0);

struct TruncationPair {
    Eigen::MatrixXd P;  // columns: lowest eigenvectors of A1^0 (mean-zero phi basis)
    Eigen::MatrixXd Q;  // columns: lowest eigenvectors of A2^0 (full psi basis)
    Eigen::VectorXd evP, evQ;
    int n = 0;  // requested rank
    int rank_phi() const { return static_cast<int>(P.cols()); }
    int rank_psi() const { return static_cast<int>(Q.cols()); }
};

// Relative gap below which eigenvalues n and n+1 count as one cluster.
inline constexpr double kDefaultGapTol = 1e-6;

// Strict: DegenerateCut when the cut splits a cluster of either operator.
TruncationPair truncation_projectors(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, int n,
                                     double gap_tol = kDefaultGapTol);
// Raises each rank until the cut sits in a gap; the two ranks may then differ.
TruncationPair truncation_projectors_adjusted(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, int n,
                                              double gap_tol = kDefaultGapTol);

// Compress M by blockdiag(P, Q, 1).
Eigen::MatrixXd truncate_M(const BlockMatrix& M, const TruncationPair& pair);

struct BlockDiagonalization {
    Eigen::MatrixXd J1, J2, J3;  // strictly lower blocks of the unit lower-triangular J
    Eigen::MatrixXd J;           // assembled
    Eigen::MatrixXd D1, D2, D3;  // diagonal blocks of J^T M J
    double residual = 0.0;       // ||J^T M J - diag(D1, D2, D3)||_F / ||M||_F
};

// M = [[A1, B, C], [B^T, A2, D], [C^T, D^T, A3]].
BlockDiagonalization block_diagonalize(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                                       const Eigen::MatrixXd& A3, const Eigen::MatrixXd& B,
                                       const Eigen::MatrixXd& C, const Eigen::MatrixXd& D, double cond_tol = 1e-12);

// K1 = A2 + B^T A1^{-1} B via symmetric-indefinite solves.
Eigen::MatrixXd k1_operator(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, const Eigen::MatrixXd& B,
                            double singular_tol = 1e-10);

}  // namespace vmstab
