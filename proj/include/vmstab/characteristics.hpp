#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "vmstab/equilibrium.hpp"

namespace vmstab {

struct PhasePoint {
    double x = 0.0;
    double v1 = 0.0;
    double v2 = 0.0;
    Species species = Species::Plus;
};

struct StepOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 1e-2;
    double h_min = 1e-13;
    double h_max = 0.0;       // 0 selects period / 8
    double fixed_step = 0.0;  // > 0 disables error control
    long max_steps = 2000000;
};

struct Trajectory {
    std::vector<double> s;  // 0 first, strictly decreasing
    std::vector<PhasePoint> states;
    double e_drift = 0.0;
    double p_drift = 0.0;
};

// Equilibrium fields along a path, by trigonometric interpolation.
class FieldEvaluator {
public:
    explicit FieldEvaluator(const EquilibriumFields& f) : f_(&f), zero_(f.zero()) {}
    void fields(double x, double& E, double& B) const { TrigSeries::eval_pair(f_->E_s, f_->B_s, x, E, B); }
    void potentials(double x, double& phi, double& psi) const {
        TrigSeries::eval_pair(f_->phi_s, f_->psi_s, x, phi, psi);
    }
    bool zero() const { return zero_; }
    double period() const { return f_->period; }
    const EquilibriumFields& data() const { return *f_; }

private:
    const EquilibriumFields* f_;
    bool zero_;
};

using State = std::array<double, 3>;  // X (unreduced), V1, V2

// One accepted Dormand-Prince step with its continuous extension.
struct DenseStep {
    double s0 = 0.0;
    double h = 0.0;
    std::array<State, 5> r{};
    State at(double s) const;
};

State characteristic_rhs(const FieldEvaluator& fe, Species sp, const State& y);

// Adaptive (or fixed-step) DOPRI5 from s = 0 to s_end. on_step returns false to stop early.
void integrate_characteristic(const FieldEvaluator& fe, Species sp, const State& y0, double s_end,
                              const StepOptions& opts, const std::function<bool(const DenseStep&)>& on_step);

Trajectory integrate_trajectory(const EquilibriumFields& fields, const PhasePoint& start, double s_end,
                                const StepOptions& opts);

std::pair<double, double> invariants_of(const PhasePoint& point, const EquilibriumFields& fields);

enum class OrbitKind { Closed, Window, Stationary, Free };

struct OrbitOptions {
    StepOptions step;
    double T_cap = 4000.0;
    int nq_min = 64;
    int nq_max = 2048;
    double spectral_tol = 1e-9;
    int max_mode = 16;
};

// Backward orbit of one phase point resampled on N uniform times s_q = -q T / N.
// For a closed orbit T is its period; for a window it is the integration length.
struct Orbit {
    OrbitKind kind = OrbitKind::Closed;
    double period = 0.0;
    std::vector<double> X, V1, V2;
    long steps = 0;
    double spectral_tail = 0.0;
};

Orbit compute_orbit(const FieldEvaluator& fe, Species sp, double x, double v1, double v2, const OrbitOptions& opts);

void write_trajectory_csv(const Trajectory& t, const EquilibriumFields& fields, const std::string& path);

}  // namespace vmstab
