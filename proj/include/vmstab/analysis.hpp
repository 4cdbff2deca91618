#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vmstab/inertia.hpp"
#include "vmstab/operators.hpp"

namespace vmstab {

enum class Verdict { UnstableThm1, UnstableThm2, Inconclusive, Ambiguous };
const char* to_string(Verdict v);

struct CriterionOptions {
    double zero_tol_rel = 1e-8;   // eigenvalue band, relative to the matrix 2-norm
    double l0_tol = 1e-10;        // |l0| at or below this counts as zero
    double singular_tol = 1e-10;  // relative, for the solves behind K1
};

struct HypothesisFlags {
    bool a1_kernel_constants = false;  // A1^0 nonsingular on the mean-zero space
    double a1_min_abs_eig = 0.0, a1_zero_tol = 0.0;
    bool l0_nonzero = false;
    double l0 = 0.0, l0_tol = 0.0;
    bool a2_kernel_trivial = false;
    double a2_min_abs_eig = 0.0, a2_zero_tol = 0.0;
};

HypothesisFlags check_hypotheses(const OperatorSet& ops0, const CriterionOptions& opts = {});

struct CriterionVerdict {
    int lhs = 0;  // neg(K1^0)
    int rhs = 0;  // neg(A1^0) + neg(-l0)
    HypothesisFlags hypotheses;
    Verdict verdict = Verdict::Ambiguous;
    std::string reason;
    InertiaReport K1, A1, A2;
    int neg_minus_l0 = 0;
    int dim = 0;  // basis size M
};

CriterionVerdict evaluate_criterion(const OperatorSet& ops0, const CriterionOptions& opts = {});

struct TruncationRow {
    int n = 0, rank_phi = 0, rank_psi = 0;
    int neg_A1 = 0, neg_K1 = 0, zero_K1 = 0;
};

struct TruncationSweep {
    std::vector<TruncationRow> rows;
    int N1 = 0;  // smallest n from which neg(A1_n) and neg(K1_n) stay constant; 0 if never
};

// neg(A1_n^0) and neg(K1_n^0) for n = 1 .. 2M, cut by the lambda = 0 eigenprojectors.
TruncationSweep truncation_sweep(const OperatorSet& ops0, const CriterionOptions& opts = {});

// Operator sets per lambda, cached; assembly is the expensive part.
class LambdaProblem {
public:
    LambdaProblem(const AssemblyContext& ctx, const OperatorOptions& oopts);
    const AssemblyContext& context() const { return ctx_; }
    std::shared_ptr<const OperatorSet> at(double lambda) const;
    BlockMatrix M(double lambda) const { return assemble_M(*at(lambda)); }
    std::size_t evaluations() const;

private:
    const AssemblyContext& ctx_;
    OperatorOptions oopts_;
    mutable std::mutex mu_;
    mutable std::map<double, std::shared_ptr<const OperatorSet>> cache_;
};

// Truncated M_n^lambda as a function of lambda, with projectors from the lambda = 0 operators.
class TruncatedFamily {
public:
    TruncatedFamily(const LambdaProblem& problem, const TruncationPair& pair) : problem_(problem), pair_(pair) {}
    Eigen::MatrixXd at(double lambda) const { return truncate_M(problem_.M(lambda), pair_); }
    const TruncationPair& pair() const { return pair_; }
    int plateau() const { return pair_.rank_phi() + 1; }

private:
    const LambdaProblem& problem_;
    TruncationPair pair_;
};

struct ScanOptions {
    int points = 40;
    double lambda_min = 1e-2;
    double lambda_max = 0.0;  // 0: find by doubling until the plateau holds twice
    double lambda_start = 1.0;
    int max_doublings = 24;
    double zero_tol_rel = 1e-8;
    double eig_tol = 1e-10;     // |nu| / ||M|| stopping rule for the crossing
    double bracket_tol = 1e-12; // relative bracket width at which refinement stops
    int max_iter = 200;
};

struct ScanRow {
    double lambda = 0.0;
    int neg = 0, zero = 0, pos = 0;
    double margin = 0.0;
    double tracked = 0.0;  // eigenvalue of smallest modulus
};

struct ScanResult {
    double lambda_max = 0.0;
    int plateau = 0;
    std::vector<ScanRow> rows;
    std::vector<std::pair<int, int>> brackets;  // row index pairs where neg changes
    std::vector<std::pair<double, int>> plateau_checks;  // (lambda, neg) seen while locating lambda_max
};

// Lambda_max by doubling from lambda_start until neg = plateau at two consecutive points.
double find_lambda_max(const TruncatedFamily& fam, const ScanOptions& opts,
                       std::vector<std::pair<double, int>>* seen = nullptr);

ScanResult scan_lambda(const TruncatedFamily& fam, const ScanOptions& opts);
ScanResult scan_lambda(const std::function<Eigen::MatrixXd(double)>& fam, int plateau, const ScanOptions& opts);

struct Crossing {
    double lambda = 0.0;
    Eigen::VectorXd u;        // unit kernel vector in truncated coordinates
    double margin = 0.0;      // |nu(lambda_n)| / ||M||
    double bracket_lo = 0.0, bracket_hi = 0.0;
    int neg_lo = 0, neg_hi = 0;
    int iterations = 0;
    double trivial_overlap = 0.0;
};

Crossing find_kernel_crossing(const std::function<Eigen::MatrixXd(double)>& fam, double lo, double hi,
                              const ScanOptions& opts);

struct NHistoryRow {
    int n = 0, rank_phi = 0, rank_psi = 0;
    double lambda_n = 0.0;
    double cauchy = 0.0;  // |lambda_n - previous|
    double margin = 0.0;
    int crossings = 0;
};

struct Refinement {
    double lambda0 = 0.0;
    int n = 0;
    TruncationPair pair;
    Crossing crossing;
    ScanResult scan;
    std::vector<NHistoryRow> history;
    bool cauchy_decreasing = true;
};

Refinement refine_n(const LambdaProblem& problem, const OperatorSet& ops0, const std::vector<int>& n_list,
                    const ScanOptions& opts);

struct ModeResiduals {
    double poisson = 0.0;  // relative
    double ampere = 0.0;
    double current = 0.0;
    double vlasov = 0.0;
};

struct GrowingMode {
    double lambda0 = 0.0;
    Eigen::VectorXd phi, psi;  // full-basis coefficients (phi has zero mean)
    double b = 0.0;
    std::vector<double> x, phi_x, psi_x, E1, E2, B;
    std::vector<double> f[2];  // per species, on the phase grid
    std::vector<double> rho, j1, j2;
    ModeResiduals residuals;
    std::vector<NHistoryRow> n_history;
};

// u = (phi in the mean-zero basis, psi in the full basis, b).
GrowingMode reconstruct_mode(double lambda0, const Eigen::VectorXd& u, const AssemblyContext& ctx);
// Lift a truncated kernel vector to basis coordinates; sign fixed by the largest entry.
Eigen::VectorXd lift_kernel_vector(const Eigen::VectorXd& u_n, const TruncationPair& pair);
ModeResiduals mode_residual(const GrowingMode& mode, const AssemblyContext& ctx);

// Zero-field dispersion functions for a spatially homogeneous profile.
struct DispersionOracle {
    const EquilibriumProfile& profile;
    const VelocityGrid& vg;
    // k^2 - sum_s int mu_e Re(i k vhat1 / (lambda + i k vhat1)) dv
    double electrostatic(int m, double lambda) const;
    // k^2 + lambda^2 - sum_s int vhat2 mu_p dv - sum_s int mu_e vhat2^2 Re(lambda / (lambda + i k vhat1)) dv
    double transverse(int m, double lambda) const;
    // Largest root in (lambda_lo, lambda_hi), if the function changes sign on the sampling grid.
    std::optional<double> root(int m, bool electrostatic_branch, double lambda_lo = 1e-4,
                               double lambda_hi = 20.0) const;
};

}  // namespace vmstab
