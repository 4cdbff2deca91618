#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>

#include "vmstab/equilibrium.hpp"
#include "vmstab/kinetic_ops.hpp"

namespace vmstab {

// Real trigonometric basis orthonormal in L^2(0, P):
// 1/sqrt(P), sqrt(2/P) cos(k_m x), sqrt(2/P) sin(k_m x), m = 1..M.
// Full ordering is [1, c1, s1, c2, s2, ...]; the mean-zero basis drops the first entry.
struct SpectralBasis {
    double period = 1.0;
    int M = 1;
    bool mean_zero = false;

    int dim() const { return 2 * M + (mean_zero ? 0 : 1); }
    int mode(int idx) const;      // m of basis entry idx
    bool is_sine(int idx) const;  // false for cos and constant
    double norm(int idx) const;   // amplitude multiplying cos / sin / 1
    double eval(int idx, double x) const;
    double wavenumber(int idx) const;
};

// Everything about the equilibrium that does not depend on lambda.
class AssemblyContext {
public:
    AssemblyContext(const EquilibriumProfile& profile, const EquilibriumFields& fields, const VelocityGrid& vg,
                    const KineticOptions& kopts, int M);
    AssemblyContext(const AssemblyContext&) = delete;
    AssemblyContext& operator=(const AssemblyContext&) = delete;

    const EquilibriumProfile& profile() const { return profile_; }
    const EquilibriumFields& fields() const { return fields_; }
    const PhaseGrid& grid() const { return grid_; }
    const OrbitBank& bank(Species s) const { return s == Species::Plus ? *plus_ : *minus_; }
    const KineticOptions& kinetic_options() const { return kopts_; }
    int M() const { return M_; }
    double period() const { return fields_.period; }

    // mu_e and mu_p of each species at every phase node.
    const std::vector<double>& mu_e(Species s) const { return mu_e_[static_cast<int>(s)]; }
    const std::vector<double>& mu_p(Species s) const { return mu_p_[static_cast<int>(s)]; }
    // Local coefficient fields over the x grid.
    const std::vector<double>& S_e() const { return S_e_; }
    const std::vector<double>& S_p() const { return S_p_; }
    const std::vector<double>& S_v2p() const { return S_v2p_; }

private:
    EquilibriumProfile profile_;
    EquilibriumFields fields_;
    PhaseGrid grid_;
    KineticOptions kopts_;
    int M_;
    std::unique_ptr<OrbitBank> plus_, minus_;
    std::vector<double> mu_e_[2], mu_p_[2];
    std::vector<double> S_e_, S_p_, S_v2p_;
};

struct OperatorOptions {
    double asym_tol = 1e-2;  // relative to the Frobenius norm
    bool check_projection = true;
};

struct OperatorSet {
    double lambda = 0.0;
    double period = 1.0;
    int M = 0;
    Eigen::MatrixXd A1;       // mean-zero basis
    Eigen::MatrixXd A1_full;  // full basis (constant mode kept)
    Eigen::MatrixXd A2;       // full basis
    Eigen::MatrixXd B;        // rows mean-zero phi basis, columns full psi basis
    Eigen::MatrixXd B_full;   // rows full phi basis
    Eigen::VectorXd C, C_full, D;
    double l = 0.0;
    // diagnostics
    double asym_A1 = 0.0, asym_A2 = 0.0;
    double projection_disagreement = 0.0;  // only for lambda = 0
    double b_range_mean = 0.0;             // largest |mean| of a column of B (full rows)
    double a1_constant_row_defect = 0.0;   // max |<1, A1 e_j>| before symmetrization
};

OperatorSet assemble_operator_set(double lambda, const AssemblyContext& ctx, const OperatorOptions& opts);

struct BlockMatrix {
    double lambda = 0.0;
    int dim_phi = 0, dim_psi = 0;
    Eigen::MatrixXd S;
    int dim() const { return static_cast<int>(S.rows()); }
};

// [[-A1, B, C], [B^T, A2, -D], [C^T, -D^T, -P (lambda^2 - l)]]; full_phi keeps the constant phi mode.
BlockMatrix assemble_M(const OperatorSet& ops, bool full_phi = false);
// [[-A1, B, 0], [B^T, A2, 0], [0, 0, P l]].
BlockMatrix assemble_M0(const OperatorSet& ops0);

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path, const std::string& header);

}  // namespace vmstab
