#include "vmstab/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vmstab/errors.hpp"
#include "vmstab/parallel.hpp"

namespace vmstab {

double EquilibriumProfile::weight(double e) const { return c_weight * std::pow(1.0 + std::abs(e), -alpha); }

void EquilibriumProfile::validate() const {
    if (!model) throw Error(ErrorKind::ConfigError, "profile has no model");
    if (!(period > 0.0)) throw Error(ErrorKind::ConfigError, "period must be positive");
    if (!(alpha > 2.0)) throw Error(ErrorKind::ConfigError, "alpha must exceed 2");
    if (!(c_weight > 0.0)) throw Error(ErrorKind::ConfigError, "c_weight must be positive");
    if (!(v_max > 0.0)) throw Error(ErrorKind::ConfigError, "v_max must be positive");
}

namespace {

// Gauss-Legendre nodes and weights on [-1, 1], ascending; mirrored so the rule is exactly symmetric.
void unit_gauss_legendre(int n, std::vector<double>& t_out, std::vector<double>& w_out) {
    t_out.assign(n, 0.0);
    w_out.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
            double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = n * (t * p1 - p0) / (t * t - 1.0);
        double w = 2.0 / ((1.0 - t * t) * dp * dp);
        if (2 * i + 1 == n) t = 0.0;
        t_out[n - 1 - i] = t;
        t_out[i] = -t;
        w_out[i] = w_out[n - 1 - i] = w;
    }
}

}  // namespace

VelocityGrid VelocityGrid::gauss_legendre(int n, double v_max, int panels) {
    if (panels < 1 || n % panels != 0 || n / panels < 2)
        throw Error(ErrorKind::ConfigError, "velocity grid needs a multiple of the panel count with at least 2 nodes per panel");
    VelocityGrid g;
    g.n = n;
    g.v_max = v_max;
    g.panels = panels;
    g.v.assign(n, 0.0);
    g.w.assign(n, 0.0);
    const int m = n / panels;
    std::vector<double> t, w;
    unit_gauss_legendre(m, t, w);
    // Equal panels; the upper half is built and mirrored.
    const double h = v_max / panels;
    for (int k = n / 2; k < n; ++k) {
        const int p = k / m, i = k % m;
        const double c = -v_max + (2 * p + 1) * h;
        g.v[k] = (2 * p + 1 == panels && 2 * i + 1 == m) ? 0.0 : c + h * t[i];
        g.w[k] = h * w[i];
        g.v[n - 1 - k] = -g.v[k];
        g.w[n - 1 - k] = g.w[k];
    }
    return g;
}

bool EquilibriumFields::zero() const {
    for (std::size_t i = 0; i < phi0.size(); ++i)
        if (phi0[i] != 0.0 || psi0[i] != 0.0) return false;
    return true;
}

EquilibriumFields EquilibriumFields::from_potentials(double period, const std::vector<double>& phi,
                                                     const std::vector<double>& psi) {
    if (phi.size() != psi.size() || phi.empty())
        throw Error(ErrorKind::DimensionMismatch, "potential arrays differ in length");
    EquilibriumFields f;
    f.period = period;
    const int n = static_cast<int>(phi.size());
    f.x.resize(n);
    for (int j = 0; j < n; ++j) f.x[j] = period * j / n;
    f.phi0 = phi;
    f.psi0 = psi;
    f.E1_0 = spectral_derivative(phi, period, 1);
    for (double& e : f.E1_0) e = -e;
    f.B0 = spectral_derivative(psi, period, 1);
    f.phi_s = TrigSeries(f.phi0, period);
    f.psi_s = TrigSeries(f.psi0, period);
    f.E_s = TrigSeries(f.E1_0, period);
    f.B_s = TrigSeries(f.B0, period);
    return f;
}

EquilibriumFields EquilibriumFields::vacuum(double period, int nx) {
    std::vector<double> z(nx, 0.0);
    return from_potentials(period, z, z);
}

namespace {

// Velocity integrals at one x node for given potentials.
struct LocalMoments {
    double rho = 0, j2 = 0;
    double S_e = 0, S_p = 0, S_v2e = 0, S_v2p = 0;
};

LocalMoments local_moments(const EquilibriumProfile& profile, const VelocityGrid& vg, double phi, double psi) {
    LocalMoments m;
    for (Species s : {Species::Plus, Species::Minus}) {
        const double q = charge(s);
        double rho = 0, j2 = 0, se = 0, sp = 0, sv2e = 0, sv2p = 0;
        for (int a = 0; a < vg.n; ++a) {
            for (int b = 0; b < vg.n; ++b) {
                const double v1 = vg.v[a], v2 = vg.v[b];
                const double g = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                const double w = vg.w[a] * vg.w[b];
                ProfileValue pv = profile.eval(s, g + q * phi, v2 + q * psi);
                const double h2 = v2 / g;
                rho += w * pv.mu;
                j2 += w * h2 * pv.mu;
                se += w * pv.mu_e;
                sp += w * pv.mu_p;
                sv2e += w * h2 * pv.mu_e;
                sv2p += w * h2 * pv.mu_p;
            }
        }
        m.rho += q * rho;
        m.j2 += q * j2;
        m.S_e += se;
        m.S_p += sp;
        m.S_v2e += sv2e;
        m.S_v2p += sv2p;
    }
    return m;
}

std::vector<LocalMoments> all_moments(const EquilibriumProfile& profile, const VelocityGrid& vg,
                                      const std::vector<double>& phi, const std::vector<double>& psi) {
    std::vector<LocalMoments> out(phi.size());
    parallel_for(phi.size(), [&](std::size_t j) { out[j] = local_moments(profile, vg, phi[j], psi[j]); });
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sup_centered(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s = std::max(s, std::abs(x - m));
    return s;
}

struct ResidualArrays {
    std::vector<double> poisson, ampere;
};

ResidualArrays residual_arrays(const EquilibriumProfile& profile, const std::vector<LocalMoments>& mom,
                               const std::vector<double>& phi, const std::vector<double>& psi) {
    auto phixx = spectral_derivative(phi, profile.period, 2);
    auto psixx = spectral_derivative(psi, profile.period, 2);
    ResidualArrays r;
    r.poisson.resize(phi.size());
    r.ampere.resize(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) {
        r.poisson[j] = -phixx[j] - profile.n0 - mom[j].rho;
        r.ampere[j] = psixx[j] + mom[j].j2;
    }
    return r;
}

void symmetrize_even(std::vector<double>& y) {
    const std::size_t n = y.size();
    for (std::size_t j = 1; j < (n + 1) / 2; ++j) {
        double a = 0.5 * (y[j] + y[n - j]);
        y[j] = y[n - j] = a;
    }
}

void remove_mean(std::vector<double>& y) {
    const double m = mean(y);
    for (double& v : y) v -= m;
}

Eigen::MatrixXd second_derivative_matrix(int n, double period) {
    Eigen::MatrixXd D(n, n);
    std::vector<double> e(n, 0.0);
    for (int k = 0; k < n; ++k) {
        e.assign(n, 0.0);
        e[k] = 1.0;
        auto col = spectral_derivative(e, period, 2);
        for (int j = 0; j < n; ++j) D(j, k) = col[j];
    }
    return D;
}

}  // namespace

Moments compute_moments(const EquilibriumProfile& profile, const VelocityGrid& vg, const std::vector<double>& phi,
                        const std::vector<double>& psi) {
    auto mom = all_moments(profile, vg, phi, psi);
    Moments m;
    for (auto& l : mom) {
        m.rho.push_back(l.rho);
        m.j2.push_back(l.j2);
    }
    return m;
}

EquilibriumSolve solve_equilibrium(const EquilibriumProfile& profile, int nx, const VelocityGrid& vg,
                                   const EquilibriumOptions& opts) {
    profile.validate();
    if (nx < 4) throw Error(ErrorKind::ConfigError, "N_x must be at least 4");
    const double P = profile.period;
    std::vector<double> phi(nx), psi(nx);
    for (int j = 0; j < nx; ++j) {
        const double c = std::cos(2.0 * std::numbers::pi * opts.guess_mode * j / nx);
        phi[j] = opts.guess_phi * c;
        psi[j] = opts.guess_psi * c + opts.guess_shift_psi;
    }
    EquilibriumSolve out;
    out.method = opts.method;
    auto converged = [&](const ResidualArrays& r) {
        return std::max(sup_centered(r.poisson), sup_centered(r.ampere)) <= opts.tol;
    };

    bool done = false;
    if (opts.method == "picard") {
        for (int it = 0; it <= opts.max_iter; ++it) {
            auto mom = all_moments(profile, vg, phi, psi);
            auto r = residual_arrays(profile, mom, phi, psi);
            if (converged(r)) {
                out.iterations = it;
                done = true;
                break;
            }
            if (it == opts.max_iter) break;
            std::vector<double> src1(nx), src2(nx), phin, psin;
            for (int j = 0; j < nx; ++j) {
                src1[j] = profile.n0 + mom[j].rho;
                src2[j] = mom[j].j2;
            }
            solve_periodic_poisson(src1, P, phin);
            solve_periodic_poisson(src2, P, psin);
            for (int j = 0; j < nx; ++j) {
                phi[j] = (1.0 - opts.damping) * phi[j] + opts.damping * phin[j];
                psi[j] = (1.0 - opts.damping) * psi[j] + opts.damping * psin[j];
            }
            if (opts.even) {
                symmetrize_even(phi);
                symmetrize_even(psi);
            }
        }
    } else if (opts.method == "newton") {
        const Eigen::MatrixXd D2 = second_derivative_matrix(nx, P);
        auto norm_of = [](const ResidualArrays& r, const std::vector<double>& ph, const std::vector<double>& ps) {
            return std::max(sup_centered(r.poisson), sup_centered(r.ampere)) + std::abs(mean(ph)) +
                   std::abs(mean(ps));
        };
        for (int it = 0; it <= opts.max_iter; ++it) {
            auto mom = all_moments(profile, vg, phi, psi);
            auto r = residual_arrays(profile, mom, phi, psi);
            if (converged(r) && std::abs(mean(phi)) <= opts.tol && std::abs(mean(psi)) <= opts.tol) {
                out.iterations = it;
                done = true;
                break;
            }
            if (it == opts.max_iter) break;
            // Solvability: the residual means are the neutrality defects, not iterated on.
            const double mp = mean(r.poisson), ma = mean(r.ampere);
            Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * nx + 2, 2 * nx);
            Eigen::VectorXd F(2 * nx + 2);
            J.block(0, 0, nx, nx) = -D2;
            J.block(nx, nx, nx, nx) = D2;
            for (int j = 0; j < nx; ++j) {
                J(j, j) -= mom[j].S_e;
                J(j, nx + j) -= mom[j].S_p;
                J(nx + j, j) += mom[j].S_v2e;
                J(nx + j, nx + j) += mom[j].S_v2p;
                J(2 * nx, j) = 1.0 / nx;
                J(2 * nx + 1, nx + j) = 1.0 / nx;
                F(j) = r.poisson[j] - mp;
                F(nx + j) = r.ampere[j] - ma;
            }
            F(2 * nx) = mean(phi);
            F(2 * nx + 1) = mean(psi);
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
            cod.setThreshold(1e-11);
            Eigen::VectorXd dy = -cod.solve(F);
            const double f0 = norm_of(r, phi, psi);
            double step = 1.0;
            std::vector<double> phin(nx), psin(nx);
            for (int ls = 0; ls < 12; ++ls) {
                for (int j = 0; j < nx; ++j) {
                    phin[j] = phi[j] + step * dy(j);
                    psin[j] = psi[j] + step * dy(nx + j);
                }
                if (opts.even) {
                    symmetrize_even(phin);
                    symmetrize_even(psin);
                }
                auto m2 = all_moments(profile, vg, phin, psin);
                auto r2 = residual_arrays(profile, m2, phin, psin);
                const double f1 = norm_of(r2, phin, psin);
                if (f1 < f0 || ls == 11) break;
                step *= 0.5;
            }
            phi = phin;
            psi = psin;
        }
    } else {
        throw Error(ErrorKind::ConfigError, "unknown equilibrium method '" + opts.method + "'");
    }
    if (!done)
        throw Error(ErrorKind::NonConvergence,
                    "equilibrium solver (" + opts.method + ") hit the iteration cap of " +
                        std::to_string(opts.max_iter));
    remove_mean(phi);
    remove_mean(psi);
    out.fields = EquilibriumFields::from_potentials(P, phi, psi);
    out.residual = equilibrium_residual(out.fields, profile, vg);
    if (std::abs(out.residual.neutrality_rho) > opts.neutrality_tol ||
        std::abs(out.residual.neutrality_j2) > opts.neutrality_tol)
        throw Error(ErrorKind::NeutralityViolation,
                    "mean(n0 + rho) = " + std::to_string(out.residual.neutrality_rho) +
                        ", mean(j2) = " + std::to_string(out.residual.neutrality_j2));
    return out;
}

EquilibriumResidual equilibrium_residual(const EquilibriumFields& fields, const EquilibriumProfile& profile,
                                         const VelocityGrid& vg) {
    auto mom = all_moments(profile, vg, fields.phi0, fields.psi0);
    auto r = residual_arrays(profile, mom, fields.phi0, fields.psi0);
    EquilibriumResidual res;
    for (std::size_t j = 0; j < r.poisson.size(); ++j) {
        res.poisson = std::max(res.poisson, std::abs(r.poisson[j]));
        res.ampere = std::max(res.ampere, std::abs(r.ampere[j]));
    }
    res.neutrality_rho = -mean(r.poisson);
    res.neutrality_j2 = mean(r.ampere);
    return res;
}

double tail_indicator(const EquilibriumProfile& profile, const EquilibriumFields& fields, double v_max) {
    const int per_side = 64;
    double worst = 0.0;
    for (int j = 0; j < fields.nx(); ++j) {
        for (Species s : {Species::Plus, Species::Minus}) {
            const double q = charge(s);
            for (int k = 0; k <= per_side; ++k) {
                const double t = -v_max + 2.0 * v_max * k / per_side;
                const double pts[4][2] = {{t, -v_max}, {t, v_max}, {-v_max, t}, {v_max, t}};
                for (auto& pt : pts) {
                    const double g = std::sqrt(1.0 + pt[0] * pt[0] + pt[1] * pt[1]);
                    ProfileValue pv = profile.eval(s, g + q * fields.phi0[j], pt[1] + q * fields.psi0[j]);
                    worst = std::max(worst, std::abs(pv.mu) + std::abs(pv.mu_e) + std::abs(pv.mu_p));
                }
            }
        }
    }
    return worst * v_max * v_max;
}

double choose_v_max(const EquilibriumProfile& profile, const EquilibriumFields& fields, double tol) {
    for (double v = 1.0; v <= 64.0; v += 0.25)
        if (tail_indicator(profile, fields, v) <= tol) return v;
    throw Error(ErrorKind::TailTooLarge, "profile tail does not decay below tolerance within |v| <= 64");
}

CoefficientFields eval_coefficient_fields(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                                          const VelocityGrid& vg, double tail_tol) {
    CoefficientFields c;
    c.tail = tail_indicator(profile, fields, vg.v_max);
    if (c.tail > tail_tol)
        throw Error(ErrorKind::TailTooLarge, "velocity shell indicator " + std::to_string(c.tail) +
                                                 " exceeds tolerance " + std::to_string(tail_tol));
    auto mom = all_moments(profile, vg, fields.phi0, fields.psi0);
    for (auto& l : mom) {
        c.S_e.push_back(l.S_e);
        c.S_p.push_back(l.S_p);
        c.S_v2p.push_back(l.S_v2p);
    }
    return c;
}

double weight_bound_constant(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                             const VelocityGrid& vg) {
    double c = 0.0;
    for (int j = 0; j < fields.nx(); ++j)
        for (Species s : {Species::Plus, Species::Minus}) {
            const double q = charge(s);
            for (int a = 0; a < vg.n; ++a)
                for (int b = 0; b < vg.n; ++b) {
                    const double v1 = vg.v[a], v2 = vg.v[b];
                    const double e = std::sqrt(1.0 + v1 * v1 + v2 * v2) + q * fields.phi0[j];
                    ProfileValue pv = profile.eval(s, e, v2 + q * fields.psi0[j]);
                    c = std::max(c, (std::abs(pv.mu_e) + std::abs(pv.mu_p)) * std::pow(1.0 + std::abs(e), profile.alpha));
                }
        }
    return c;
}

}  // namespace vmstab
