#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vmstab/fourier.hpp"

namespace vmstab {

enum class Species { Plus = 0, Minus = 1 };

inline double charge(Species s) { return s == Species::Plus ? 1.0 : -1.0; }
inline const char* species_name(Species s) { return s == Species::Plus ? "+" : "-"; }

struct ProfileValue {
    double mu = 0.0;
    double mu_e = 0.0;
    double mu_p = 0.0;
};

// mu(e, p) and its partials for each species.
class ProfileModel {
public:
    virtual ~ProfileModel() = default;
    virtual ProfileValue eval(Species s, double e, double p) const = 0;
    virtual std::string family() const = 0;
};

using ParamMap = std::map<std::string, double>;

// Families: homogeneous-maxwellian, two-stream, purely-magnetic-symmetric,
// nonmonotone-ring. Unknown parameter names are rejected.
std::shared_ptr<const ProfileModel> make_builtin_profile(const std::string& family, const ParamMap& params);

// CSV with header e,p,mu_plus,mu_minus on a full rectangular (e, p) grid.
std::shared_ptr<const ProfileModel> load_tabulated_profile(const std::string& path);

struct EquilibriumProfile {
    std::shared_ptr<const ProfileModel> model;
    double period = 1.0;
    double alpha = 3.0;
    double c_weight = 1.0;
    double v_max = 6.0;
    double n0 = 0.0;

    ProfileValue eval(Species s, double e, double p) const { return model->eval(s, e, p); }
    double weight(double e) const;
    void validate() const;
};

struct VelocityGrid {
    int n = 0;
    double v_max = 0.0;
    int panels = 1;
    std::vector<double> v;  // ascending, symmetric about 0
    std::vector<double> w;

    // Composite rule: `panels` equal subintervals of [-v_max, v_max], n / panels nodes each.
    static VelocityGrid gauss_legendre(int n, double v_max, int panels = 1);
};

struct EquilibriumFields {
    double period = 1.0;
    std::vector<double> x, phi0, psi0, E1_0, B0;
    TrigSeries phi_s, psi_s, E_s, B_s;

    int nx() const { return static_cast<int>(x.size()); }
    // True when both potentials are identically zero.
    bool zero() const;

    static EquilibriumFields from_potentials(double period, const std::vector<double>& phi,
                                             const std::vector<double>& psi);
    static EquilibriumFields vacuum(double period, int nx);
};

// rho = sum_s q_s int mu_s dv and j2 = sum_s q_s int vhat2 mu_s dv on the x grid.
struct Moments {
    std::vector<double> rho, j2;
};

Moments compute_moments(const EquilibriumProfile& profile, const VelocityGrid& vg,
                        const std::vector<double>& phi, const std::vector<double>& psi);

struct EquilibriumOptions {
    std::string method = "picard";  // picard | newton
    int max_iter = 500;
    double tol = 1e-10;
    double damping = 0.5;
    double neutrality_tol = 1e-8;
    // Initial guess: amplitude * cos(2 pi mode x / P) for each potential.
    double guess_phi = 0.0;
    double guess_psi = 0.0;
    int guess_mode = 1;
    double guess_shift_psi = 0.0;  // constant added to the psi guess
    bool even = false;             // enforce x -> -x symmetry of the iterates
};

struct EquilibriumResidual {
    double poisson = 0.0;          // sup |-phi'' - n0 - rho|
    double ampere = 0.0;           // sup |psi'' + j2|
    double neutrality_rho = 0.0;   // mean(n0 + rho)
    double neutrality_j2 = 0.0;    // mean(j2)
};

struct EquilibriumSolve {
    EquilibriumFields fields;
    EquilibriumResidual residual;
    int iterations = 0;
    std::string method;
};

EquilibriumSolve solve_equilibrium(const EquilibriumProfile& profile, int nx, const VelocityGrid& vg,
                                   const EquilibriumOptions& opts);

EquilibriumResidual equilibrium_residual(const EquilibriumFields& fields, const EquilibriumProfile& profile,
                                         const VelocityGrid& vg);

struct CoefficientFields {
    std::vector<double> S_e;    // sum_s int mu_e dv
    std::vector<double> S_p;    // sum_s int mu_p dv
    std::vector<double> S_v2p;  // sum_s int vhat2 mu_p dv
    double tail = 0.0;
};

// Throws TailTooLarge when the boundary-shell indicator exceeds tail_tol.
CoefficientFields eval_coefficient_fields(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                                          const VelocityGrid& vg, double tail_tol);

// max over x nodes and the boundary of [-v_max, v_max]^2 of (mu + |mu_e| + |mu_p|) * v_max^2.
double tail_indicator(const EquilibriumProfile& profile, const EquilibriumFields& fields, double v_max);

// Smallest v_max on a 0.25 ladder whose tail indicator is below tol.
double choose_v_max(const EquilibriumProfile& profile, const EquilibriumFields& fields, double tol);

// max over nodes of (|mu_e| + |mu_p|) (1 + |e|)^alpha, the smallest admissible c_weight.
double weight_bound_constant(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                             const VelocityGrid& vg);

}  // namespace vmstab
