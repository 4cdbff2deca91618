#include "vmstab/inertia.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vmstab/errors.hpp"

namespace vmstab {

InertiaReport inertia_from_eigenvalues(const Eigen::VectorXd& ev, double zero_tol) {
    InertiaReport r;
    double scale = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
        if (!std::isfinite(ev(i))) throw Error(ErrorKind::EigFailure, "non-finite eigenvalue");
        scale = std::max(scale, std::abs(ev(i)));
    }
    r.zero_tol = zero_tol < 0.0 ? 1e-8 * scale : zero_tol;
    r.margin = std::numeric_limits<double>::infinity();
    r.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
    for (double e : r.eigenvalues) {
        if (std::abs(e) <= r.zero_tol) {
            ++r.zero;
            continue;
        }
        (e < 0 ? r.neg : r.pos)++;
        r.margin = std::min(r.margin, std::abs(e));
    }
    return r;
}

InertiaReport inertia_count(const Eigen::MatrixXd& S, double zero_tol) {
    if (S.rows() != S.cols()) throw Error(ErrorKind::DimensionMismatch, "inertia of a non-square matrix");
    if (S.rows() == 0) return inertia_from_eigenvalues(Eigen::VectorXd(), zero_tol);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::EigFailure, "symmetric eigensolver did not converge");
    return inertia_from_eigenvalues(es.eigenvalues(), zero_tol);
}

namespace {

struct Eig {
    Eigen::VectorXd val;
    Eigen::MatrixXd vec;
};

Eig sym_eig(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::EigFailure, "symmetric eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

bool split_ok(const Eigen::VectorXd& ev, int n, double gap_tol) {
    if (n >= ev.size()) return true;
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    return ev(n) - ev(n - 1) > gap_tol * scale;
}

int adjust(const Eigen::VectorXd& ev, int n, double gap_tol) {
    while (n < ev.size() && !split_ok(ev, n, gap_tol)) ++n;
    return n;
}

}  // namespace

TruncationPair truncation_projectors(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, int n, double gap_tol) {
    if (n < 1 || n > A1.rows() || n > A2.rows())
        throw Error(ErrorKind::DimensionMismatch, "truncation rank " + std::to_string(n) + " out of range");
    Eig e1 = sym_eig(A1), e2 = sym_eig(A2);
    if (!split_ok(e1.val, n, gap_tol) || !split_ok(e2.val, n, gap_tol))
        throw Error(ErrorKind::DegenerateCut, "eigenvalues " + std::to_string(n) + " and " + std::to_string(n + 1) +
                                                  " are not separated at the truncation cut");
    TruncationPair p;
    p.n = n;
    p.P = e1.vec.leftCols(n);
    p.Q = e2.vec.leftCols(n);
    p.evP = e1.val.head(n);
    p.evQ = e2.val.head(n);
    return p;
}

TruncationPair truncation_projectors_adjusted(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, int n,
                                              double gap_tol) {
    if (n < 1 || n > A1.rows() || n > A2.rows())
        throw Error(ErrorKind::DimensionMismatch, "truncation rank " + std::to_string(n) + " out of range");
    Eig e1 = sym_eig(A1), e2 = sym_eig(A2);
    const int n1 = adjust(e1.val, n, gap_tol), n2 = adjust(e2.val, n, gap_tol);
    TruncationPair p;
    p.n = n;
    p.P = e1.vec.leftCols(n1);
    p.Q = e2.vec.leftCols(n2);
    p.evP = e1.val.head(n1);
    p.evQ = e2.val.head(n2);
    return p;
}

Eigen::MatrixXd truncate_M(const BlockMatrix& M, const TruncationPair& pair) {
    if (M.dim_phi != pair.P.rows() || M.dim_psi != pair.Q.rows() || M.dim() != M.dim_phi + M.dim_psi + 1)
        throw Error(ErrorKind::DimensionMismatch, "block matrix and truncation projectors disagree in size");
    const int a = pair.rank_phi(), b = pair.rank_psi();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(M.dim(), a + b + 1);
    T.block(0, 0, M.dim_phi, a) = pair.P;
    T.block(M.dim_phi, a, M.dim_psi, b) = pair.Q;
    T(M.dim() - 1, a + b) = 1.0;
    Eigen::MatrixXd R = T.transpose() * M.S * T;
    return 0.5 * (R + R.transpose());
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const Eigen::MatrixXd& A, double cond_tol, const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (A.rows() > 0 && !(lu.rcond() > cond_tol))
        throw Error(ErrorKind::SingularPivot, std::string(what) + " is ill-conditioned (rcond " +
                                                  std::to_string(lu.rcond()) + ")");
    return lu;
}

}  // namespace

BlockDiagonalization block_diagonalize(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2,
                                       const Eigen::MatrixXd& A3, const Eigen::MatrixXd& B,
                                       const Eigen::MatrixXd& C, const Eigen::MatrixXd& D, double cond_tol) {
    const Eigen::Index n1 = A1.rows(), n2 = A2.rows(), n3 = A3.rows();
    if (A1.cols() != n1 || A2.cols() != n2 || A3.cols() != n3 || B.rows() != n1 || B.cols() != n2 ||
        C.rows() != n1 || C.cols() != n3 || D.rows() != n2 || D.cols() != n3)
        throw Error(ErrorKind::DimensionMismatch, "inconsistent block sizes");
    auto lu3 = checked_lu(A3, cond_tol, "A3");
    const Eigen::MatrixXd A3iDt = lu3.solve(D.transpose());  // A3^{-1} D^T
    const Eigen::MatrixXd A3iCt = lu3.solve(C.transpose());  // A3^{-1} C^T
    BlockDiagonalization r;
    r.D2 = A2 - D * A3iDt;
    r.D3 = A3;
    auto lu2 = checked_lu(r.D2, cond_tol, "Schur complement A2 - D A3^{-1} D^T");
    const Eigen::MatrixXd W = B.transpose() - D * A3iCt;  // B^T - D A3^{-1} C^T
    r.J1 = -lu2.solve(W);
    r.J3 = -A3iDt;
    r.J2 = -A3iDt * r.J1 - A3iCt;
    r.D1 = A1 - W.transpose() * lu2.solve(W) - C * A3iCt;
    r.D1 = 0.5 * (r.D1 + r.D1.transpose());
    r.D2 = 0.5 * (r.D2 + r.D2.transpose());

    const Eigen::Index n = n1 + n2 + n3;
    r.J = Eigen::MatrixXd::Identity(n, n);
    r.J.block(n1, 0, n2, n1) = r.J1;
    r.J.block(n1 + n2, 0, n3, n1) = r.J2;
    r.J.block(n1 + n2, n1, n3, n2) = r.J3;
    Eigen::MatrixXd M(n, n);
    M << A1, B, C, B.transpose(), A2, D, C.transpose(), D.transpose(), A3;
    Eigen::MatrixXd Dg = Eigen::MatrixXd::Zero(n, n);
    Dg.block(0, 0, n1, n1) = r.D1;
    Dg.block(n1, n1, n2, n2) = r.D2;
    Dg.block(n1 + n2, n1 + n2, n3, n3) = r.D3;
    const double mn = std::max(M.norm(), 1e-300);
    r.residual = (r.J.transpose() * M * r.J - Dg).norm() / mn;
    return r;
}

Eigen::MatrixXd k1_operator(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, const Eigen::MatrixXd& B,
                            double singular_tol) {
    if (A1.rows() != A1.cols() || B.rows() != A1.rows() || B.cols() != A2.rows() || A2.rows() != A2.cols())
        throw Error(ErrorKind::DimensionMismatch, "K1 operands disagree in size");
    // Eigen's LDLT is only reliable for semidefinite input; A1 is indefinite in the interesting cases,
    // so solve through the symmetric eigendecomposition instead.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A1);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::EigFailure, "symmetric eigensolver did not converge");
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    const double smallest = ev.cwiseAbs().minCoeff();
    if (smallest <= singular_tol * scale)
        throw Error(ErrorKind::HypothesisFailure, "A1 is numerically singular on the mean-zero space (|eig| " +
                                                      std::to_string(smallest) + ")");
    const Eigen::MatrixXd& V = es.eigenvectors();
    const Eigen::MatrixXd X = V * (ev.cwiseInverse().asDiagonal() * (V.transpose() * B));
    Eigen::MatrixXd K = A2 + B.transpose() * X;
    return 0.5 * (K + K.transpose());
}

}  // namespace vmstab
