#include "vmstab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "vmstab/errors.hpp"
#include "vmstab/parallel.hpp"

namespace vmstab {

int SpectralBasis::mode(int idx) const {
    const int j = mean_zero ? idx + 1 : idx;
    return (j + 1) / 2;
}

bool SpectralBasis::is_sine(int idx) const {
    const int j = mean_zero ? idx + 1 : idx;
    return j > 0 && j % 2 == 0;
}

double SpectralBasis::norm(int idx) const {
    return mode(idx) == 0 ? 1.0 / std::sqrt(period) : std::sqrt(2.0 / period);
}

double SpectralBasis::wavenumber(int idx) const { return 2.0 * std::numbers::pi * mode(idx) / period; }

double SpectralBasis::eval(int idx, double x) const {
    const double k = wavenumber(idx);
    if (mode(idx) == 0) return norm(idx);
    return norm(idx) * (is_sine(idx) ? std::sin(k * x) : std::cos(k * x));
}

AssemblyContext::AssemblyContext(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                                 const VelocityGrid& vg, const KineticOptions& kopts, int M)
    : profile_(profile), fields_(fields), kopts_(kopts), M_(M) {
    if (M < 1) throw Error(ErrorKind::ConfigError, "basis size M must be at least 1");
    if (fields.nx() < 2 * M + 2)
        throw Error(ErrorKind::ConfigError, "N_x must be at least 2M + 2 for exact basis projection");
    grid_ = PhaseGrid::build(profile_, fields_, vg);
    kopts_.orbit.max_mode = std::max(kopts_.orbit.max_mode, M);
    plus_ = std::make_unique<OrbitBank>(grid_, fields_, Species::Plus, kopts_);
    minus_ = std::make_unique<OrbitBank>(grid_, fields_, Species::Minus, kopts_);
    const int n = vg.n, nx = grid_.nx;
    for (Species s : {Species::Plus, Species::Minus}) {
        const int si = static_cast<int>(s);
        const double q = charge(s);
        mu_e_[si].resize(grid_.size());
        mu_p_[si].resize(grid_.size());
        for (int j = 0; j < nx; ++j)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const std::size_t i = grid_.index(j, a, b);
                    const double v1 = vg.v[a], v2 = vg.v[b];
                    const double g = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                    ProfileValue pv = profile_.eval(s, g + q * fields_.phi0[j], v2 + q * fields_.psi0[j]);
                    mu_e_[si][i] = pv.mu_e;
                    mu_p_[si][i] = pv.mu_p;
                }
    }
    S_e_.assign(nx, 0.0);
    S_p_.assign(nx, 0.0);
    S_v2p_.assign(nx, 0.0);
    for (int j = 0; j < nx; ++j)
        for (int si = 0; si < 2; ++si)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const std::size_t i = grid_.index(j, a, b);
                    const double w = vg.w[a] * vg.w[b];
                    const double v1 = vg.v[a], v2 = vg.v[b];
                    const double h2 = v2 / std::sqrt(1.0 + v1 * v1 + v2 * v2);
                    S_e_[j] += w * mu_e_[si][i];
                    S_p_[j] += w * mu_p_[si][i];
                    S_v2p_[j] += w * h2 * mu_p_[si][i];
                }
}

namespace {

struct RawOperators {
    Eigen::MatrixXd A1_full, A2, B_full;
    Eigen::VectorXd C_full, D_full;
    double l = 0.0;
};

RawOperators assemble_raw(double lambda, const AssemblyContext& ctx) {
    const PhaseGrid& grid = ctx.grid();
    const int M = ctx.M(), nx = grid.nx, n = grid.vg.n;
    const double P = ctx.period();
    const int K = M + 1;
    // Velocity moments of the orbit operators at each x node.
    std::vector<cplx> KA(static_cast<std::size_t>(nx) * K), KB(KA.size()), KA2(KA.size());
    std::vector<double> KC(nx, 0.0), KD(nx, 0.0), KL(nx, 0.0);
    parallel_for(nx, [&](std::size_t j) {
        std::vector<cplx> G(K), H(K);
        cplx* ka = &KA[j * K];
        cplx* kb = &KB[j * K];
        cplx* ka2 = &KA2[j * K];
        for (int m = 0; m < K; ++m) ka[m] = kb[m] = ka2[m] = 0.0;
        for (Species s : {Species::Plus, Species::Minus}) {
            const OrbitBank& bank = ctx.bank(s);
            const auto& mue = ctx.mu_e(s);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const std::size_t i = grid.index(static_cast<int>(j), a, b);
                    if (mue[i] == 0.0) continue;
                    const double om = grid.vg.w[a] * grid.vg.w[b] * mue[i];
                    const double v1 = grid.vg.v[a], v2 = grid.vg.v[b];
                    const double gam = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                    const double h1 = v1 / gam, h2 = v2 / gam;
                    double c = 0.0;
                    bank.apply_modes(i, lambda, M, G.data(), H.data(), c);
                    for (int m = 0; m < K; ++m) {
                        ka[m] += om * G[m];
                        kb[m] += om * H[m];
                        ka2[m] += om * h2 * H[m];
                    }
                    KC[j] += om * c;
                    KD[j] += om * h2 * c;
                    KL[j] += om * h1 * c;
                }
        }
    });

    SpectralBasis basis{P, M, false};
    const int F = basis.dim();
    const double dx = P / nx;
    Eigen::MatrixXd E(F, nx);
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < nx; ++j) E(i, j) = basis.eval(i, grid.x[j]);
    auto kinetic_columns = [&](const std::vector<cplx>& Kx) {
        Eigen::MatrixXd cols(nx, F);
        for (int j = 0; j < nx; ++j)
            for (int c = 0; c < F; ++c) {
                const cplx v = Kx[static_cast<std::size_t>(j) * K + basis.mode(c)];
                cols(j, c) = basis.norm(c) * (basis.is_sine(c) ? v.imag() : v.real());
            }
        return cols;
    };
    auto local = [&](const std::vector<double>& S) {
        Eigen::VectorXd w(nx);
        for (int j = 0; j < nx; ++j) w(j) = dx * S[j];
        return Eigen::MatrixXd(E * w.asDiagonal() * E.transpose());
    };
    Eigen::VectorXd k2(F);
    for (int i = 0; i < F; ++i) k2(i) = basis.wavenumber(i) * basis.wavenumber(i);

    RawOperators r;
    r.A1_full = Eigen::MatrixXd(k2.asDiagonal()) - local(ctx.S_e()) + dx * E * kinetic_columns(KA);
    Eigen::VectorXd k2l = k2.array() + lambda * lambda;
    r.A2 = Eigen::MatrixXd(k2l.asDiagonal()) - local(ctx.S_v2p()) - dx * E * kinetic_columns(KA2);
    r.B_full = local(ctx.S_p()) + dx * E * kinetic_columns(KB);
    Eigen::VectorXd kc(nx), kd(nx);
    double lsum = 0.0;
    for (int j = 0; j < nx; ++j) {
        kc(j) = KC[j];
        kd(j) = KD[j];
        lsum += KL[j];
    }
    r.C_full = dx * E * kc;
    r.D_full = dx * E * kd;
    r.l = lsum / nx;
    return r;
}

double asymmetry(const Eigen::MatrixXd& A) {
    const double n = A.norm();
    return n > 0 ? (A - A.transpose()).norm() / n : 0.0;
}

}  // namespace

OperatorSet assemble_operator_set(double lambda, const AssemblyContext& ctx, const OperatorOptions& opts) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::ConfigError, "lambda must be non-negative");
    RawOperators r = assemble_raw(lambda, ctx);
    const int M = ctx.M();
    OperatorSet o;
    o.lambda = lambda;
    o.period = ctx.period();
    o.M = M;
    o.asym_A1 = asymmetry(r.A1_full.bottomRightCorner(2 * M, 2 * M));
    o.asym_A2 = asymmetry(r.A2);
    if (o.asym_A1 > opts.asym_tol || o.asym_A2 > opts.asym_tol)
        throw Error(ErrorKind::AsymmetryTooLarge, "relative asymmetry A1 " + std::to_string(o.asym_A1) + ", A2 " +
                                                      std::to_string(o.asym_A2) + " at lambda " +
                                                      std::to_string(lambda));
    o.A1_full = 0.5 * (r.A1_full + r.A1_full.transpose());
    // A1 1 = 0 holds exactly on the grid (orbit weights sum to one); the constant row only up to
    // phase-space quadrature. Mirror the exact column instead of averaging the two.
    o.a1_constant_row_defect = r.A1_full.row(0).cwiseAbs().maxCoeff();
    o.A1_full.col(0) = r.A1_full.col(0);
    o.A1_full.row(0) = r.A1_full.col(0).transpose();
    o.A1 = o.A1_full.bottomRightCorner(2 * M, 2 * M);
    o.A2 = 0.5 * (r.A2 + r.A2.transpose());
    o.B_full = r.B_full;
    o.B = r.B_full.bottomRows(2 * M);
    o.C_full = r.C_full;
    o.C = r.C_full.tail(2 * M);
    o.D = r.D_full;
    o.l = r.l;
    o.b_range_mean = r.B_full.row(0).cwiseAbs().maxCoeff();
    if (lambda == 0.0) {
        const double lp = ctx.kinetic_options().lambda_proj;
        RawOperators a = assemble_raw(lp, ctx);
        a.A2.diagonal().array() -= lp * lp;
        // One scale for all blocks: B vanishes identically for symmetric profiles.
        const double scale = std::max({r.A1_full.norm(), r.A2.norm(), r.B_full.norm(), 1e-300});
        o.projection_disagreement =
            std::max({(r.A1_full - a.A1_full).norm(), (r.A2 - a.A2).norm(), (r.B_full - a.B_full).norm()}) / scale;
        if (opts.check_projection && ctx.kinetic_options().check_projection &&
            o.projection_disagreement > ctx.kinetic_options().proj_tol)
            throw Error(ErrorKind::ProjectionDisagreement,
                        "lambda = 0 operators differ from the Abel limit at lambda = " + std::to_string(lp) +
                            " by " + std::to_string(o.projection_disagreement));
    }
    return o;
}

BlockMatrix assemble_M(const OperatorSet& ops, bool full_phi) {
    BlockMatrix bm;
    bm.lambda = ops.lambda;
    const Eigen::MatrixXd& A1 = full_phi ? ops.A1_full : ops.A1;
    const Eigen::MatrixXd& B = full_phi ? ops.B_full : ops.B;
    const Eigen::VectorXd& C = full_phi ? ops.C_full : ops.C;
    bm.dim_phi = static_cast<int>(A1.rows());
    bm.dim_psi = static_cast<int>(ops.A2.rows());
    const int n = bm.dim_phi + bm.dim_psi + 1;
    bm.S = Eigen::MatrixXd::Zero(n, n);
    bm.S.topLeftCorner(bm.dim_phi, bm.dim_phi) = -A1;
    bm.S.block(0, bm.dim_phi, bm.dim_phi, bm.dim_psi) = B;
    bm.S.block(bm.dim_phi, 0, bm.dim_psi, bm.dim_phi) = B.transpose();
    bm.S.block(bm.dim_phi, bm.dim_phi, bm.dim_psi, bm.dim_psi) = ops.A2;
    bm.S.block(0, n - 1, bm.dim_phi, 1) = C;
    bm.S.block(n - 1, 0, 1, bm.dim_phi) = C.transpose();
    bm.S.block(bm.dim_phi, n - 1, bm.dim_psi, 1) = -ops.D;
    bm.S.block(n - 1, bm.dim_phi, 1, bm.dim_psi) = -ops.D.transpose();
    bm.S(n - 1, n - 1) = -ops.period * (ops.lambda * ops.lambda - ops.l);
    return bm;
}

BlockMatrix assemble_M0(const OperatorSet& ops0) {
    BlockMatrix bm;
    bm.lambda = 0.0;
    bm.dim_phi = static_cast<int>(ops0.A1.rows());
    bm.dim_psi = static_cast<int>(ops0.A2.rows());
    const int n = bm.dim_phi + bm.dim_psi + 1;
    bm.S = Eigen::MatrixXd::Zero(n, n);
    bm.S.topLeftCorner(bm.dim_phi, bm.dim_phi) = -ops0.A1;
    bm.S.block(0, bm.dim_phi, bm.dim_phi, bm.dim_psi) = ops0.B;
    bm.S.block(bm.dim_phi, 0, bm.dim_psi, bm.dim_phi) = ops0.B.transpose();
    bm.S.block(bm.dim_phi, bm.dim_phi, bm.dim_psi, bm.dim_psi) = ops0.A2;
    bm.S(n - 1, n - 1) = ops0.period * ops0.l;
    return bm;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << "# " << header << ", rows=" << m.rows() << ", cols=" << m.cols() << '\n' << std::setprecision(17);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

}  // namespace vmstab
