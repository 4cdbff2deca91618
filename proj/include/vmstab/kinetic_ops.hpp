#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vmstab/characteristics.hpp"
#include "vmstab/equilibrium.hpp"

namespace vmstab {

// Tensor phase-space grid: x nodes (uniform) times a Gauss-Legendre velocity square.
struct PhaseGrid {
    double period = 1.0;
    int nx = 0;
    VelocityGrid vg;
    std::vector<double> x;
    std::vector<double> weight[2];  // w_s(e_s) at every node, indexed by species
    std::uint64_t hash = 0;

    std::size_t size() const { return static_cast<std::size_t>(nx) * vg.n * vg.n; }
    std::size_t index(int j, int a, int b) const { return (static_cast<std::size_t>(j) * vg.n + a) * vg.n + b; }
    // Quadrature weight of a node without the species weight.
    double measure(std::size_t i) const;

    static PhaseGrid build(const EquilibriumProfile& profile, const EquilibriumFields& fields, const VelocityGrid& vg);
};

struct PhaseFunction {
    Species species = Species::Plus;
    std::vector<double> values;
    std::uint64_t grid_hash = 0;
};

using PhaseFn = std::function<double(double x, double v1, double v2)>;

PhaseFunction sample_phase_function(const PhaseGrid& grid, Species sp, const PhaseFn& f);

double weighted_inner(const PhaseGrid& grid, const PhaseFunction& f, const PhaseFunction& g);
double weighted_norm(const PhaseGrid& grid, const PhaseFunction& f);

// Transport derivative: spectral in x, Lagrange (Gauss-Legendre nodes) in v.
PhaseFunction apply_D(const PhaseGrid& grid, const EquilibriumFields& fields, const PhaseFunction& k);

struct KineticOptions {
    OrbitOptions orbit;
    bool force_integration = false;  // integrate even when the fields vanish
    double tail_tol = 1e-12;
    bool strict_tail = false;        // TailTooLarge for unclosed orbits with exp(-lambda T) > tail_tol
    double lambda_proj = 1e-2;
    double proj_tol = 0.1;
    bool check_projection = true;
};

struct OrbitBankStats {
    std::size_t closed = 0, window = 0, stationary = 0, free = 0;
    long max_steps = 0;
    int max_samples = 0;
    double max_period = 0.0;
    double max_spectral_tail = 0.0;
};

// One backward orbit per phase node, reused for every Q^lambda and P application.
class OrbitBank {
public:
    OrbitBank(const PhaseGrid& grid, const EquilibriumFields& fields, Species sp, const KineticOptions& opts);

    Species species() const { return sp_; }
    const PhaseGrid& grid() const { return *grid_; }
    const Orbit& orbit(std::size_t i) const { return orbits_[i]; }
    const OrbitBankStats& stats() const { return stats_; }

    // Quadrature weights over the orbit samples: Q^lambda for lambda > 0, orbit average for 0.
    void weights(std::size_t i, double lambda, std::vector<double>& w) const;
    // Samples of node i (generated in closed form for free streaming).
    void samples(std::size_t i, std::vector<double>& X, std::vector<double>& V1, std::vector<double>& V2) const;

    // Q (or P when lambda == 0) of exp(i k_m x) and vhat2 exp(i k_m x) for m = 0..M, and of vhat1.
    void apply_modes(std::size_t i, double lambda, int M, cplx* G, cplx* H, double& c) const;

    double apply_fn(std::size_t i, double lambda, const PhaseFn& k) const;

private:
    const PhaseGrid* grid_;
    Species sp_;
    KineticOptions opts_;
    double period_;
    int free_samples_;
    std::vector<Orbit> orbits_;
    OrbitBankStats stats_;
};

PhaseFunction apply_Q_lambda(const OrbitBank& bank, const PhaseFn& k, double lambda);
// Grid function interpolated along orbits (trigonometric in x, local cubic in v).
PhaseFunction apply_Q_lambda(const OrbitBank& bank, const PhaseFunction& k, double lambda);

struct ProjectionResult {
    PhaseFunction value;
    double disagreement = 0.0;  // ||P k - Q^{lambda_proj} k|| / ||k||
};

ProjectionResult apply_projection(const OrbitBank& bank, const PhaseFn& k, const KineticOptions& opts);
ProjectionResult apply_projection(const OrbitBank& bank, const PhaseFunction& k, const KineticOptions& opts);

}  // namespace vmstab
